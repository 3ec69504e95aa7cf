//! Instance- and scene-level text guidance losses and the frozen embedding
//! store they read from.

use std::cell::Cell;
use std::collections::BTreeMap;

use langtrack_numeric::{kl_divergence, softmax, Tensor2D};

use crate::error::{argument, Error, Result};

thread_local! {
    static STORE_READS: Cell<u64> = const { Cell::new(0) };
}

/// Number of embedding lookups performed on this thread so far. Tests use it
/// to check that inference never consults the store.
pub fn store_reads() -> u64 {
    STORE_READS.with(Cell::get)
}

/// Frozen description embeddings, keyed by the exact description string.
#[derive(Clone, Debug, PartialEq)]
pub struct LanguageEmbeddingStore {
    dim: usize,
    vectors: BTreeMap<String, Vec<f64>>,
}

impl LanguageEmbeddingStore {
    pub fn new(dim: usize) -> Result<Self> {
        if dim < 1 {
            return Err(Error::Validation("embedding dimension must be >= 1".into()));
        }
        Ok(Self {
            dim,
            vectors: BTreeMap::new(),
        })
    }

    pub fn from_records(
        dim: usize,
        records: impl IntoIterator<Item = (String, Vec<f64>)>,
    ) -> Result<Self> {
        let mut store = Self::new(dim)?;
        for (description, vector) in records {
            store.insert(description, vector)?;
        }
        Ok(store)
    }

    fn insert(&mut self, description: String, vector: Vec<f64>) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::Validation(format!(
                "embedding for {description:?} has dimension {}, store has {}",
                vector.len(),
                self.dim
            )));
        }
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "embedding for {description:?} is not finite"
            )));
        }
        if self.vectors.insert(description.clone(), vector).is_some() {
            return Err(Error::Validation(format!(
                "duplicate description {description:?}"
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    /// Records in description order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.vectors.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn lookup(&self, description: &str) -> Result<&[f64]> {
        STORE_READS.with(|c| c.set(c.get() + 1));
        self.vectors
            .get(description)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::Lookup(description.to_string()))
    }
}

/// Free-function form of [`LanguageEmbeddingStore::lookup`].
pub fn lookup_embedding<'a>(
    store: &'a LanguageEmbeddingStore,
    description: &str,
) -> Result<&'a [f64]> {
    store.lookup(description)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GuidanceConfig {
    pub alpha: f64,
    pub beta: f64,
}

impl Default for GuidanceConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            beta: 1.0,
        }
    }
}

impl GuidanceConfig {
    pub const BASELINE: GuidanceConfig = GuidanceConfig {
        alpha: 0.0,
        beta: 0.0,
    };

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta)] {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::Config(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// A guidance loss value; `empty` is set when there was nothing to average
/// over and the value defaulted to zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GuidanceLoss {
    pub value: f64,
    pub empty: bool,
}

fn kl_rows(rows: &Tensor2D, target: impl Fn(usize) -> Vec<f64>) -> Result<f64> {
    let mut total = 0.0;
    for r in 0..rows.rows() {
        total += kl_divergence(&softmax(rows.row(r))?, &target(r))?;
    }
    Ok(total / rows.rows() as f64)
}

/// Mean over nodes of `KL(softmax(node_i) || softmax(text_i))`.
pub fn isg_loss(
    projected_nodes: &Tensor2D,
    instance_embeddings: &Tensor2D,
) -> Result<GuidanceLoss> {
    if projected_nodes.shape() != instance_embeddings.shape() {
        return argument(format!(
            "projected nodes {:?} vs instance embeddings {:?}",
            projected_nodes.shape(),
            instance_embeddings.shape()
        ));
    }
    if projected_nodes.rows() == 0 {
        log::warn!("instance guidance loss over zero nodes");
        return Ok(GuidanceLoss {
            value: 0.0,
            empty: true,
        });
    }
    let targets: Vec<Vec<f64>> = (0..instance_embeddings.rows())
        .map(|r| softmax(instance_embeddings.row(r)))
        .collect::<Result<_, _>>()?;
    Ok(GuidanceLoss {
        value: kl_rows(projected_nodes, |r| targets[r].clone())?,
        empty: false,
    })
}

/// Mean over edges of `KL(softmax(edge) || softmax(scene))`.
pub fn spg_loss(projected_edges: &Tensor2D, scene_embedding: &[f64]) -> Result<GuidanceLoss> {
    if projected_edges.cols() != scene_embedding.len() {
        return argument(format!(
            "projected edges have {} columns, scene embedding {}",
            projected_edges.cols(),
            scene_embedding.len()
        ));
    }
    if projected_edges.rows() == 0 {
        log::warn!("scene guidance loss over zero edges");
        return Ok(GuidanceLoss {
            value: 0.0,
            empty: true,
        });
    }
    let target = softmax(scene_embedding)?;
    Ok(GuidanceLoss {
        value: kl_rows(projected_edges, |_| target.clone())?,
        empty: false,
    })
}

pub fn total_loss(lc: f64, l_isg: f64, l_spg: f64, cfg: &GuidanceConfig) -> f64 {
    lc + cfg.alpha * l_isg + cfg.beta * l_spg
}
