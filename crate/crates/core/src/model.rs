//! Edge-classifying message-passing network.
//!
//! Nodes start from an encoded appearance vector, edges from their
//! handcrafted features. Each step first updates every edge from its two
//! endpoint embeddings, then rebuilds every node embedding from the messages
//! it receives over past edges and over future edges, each produced by its
//! own MLP. Messages of one direction are averaged and the two directions
//! summed; nodes without edges keep their embedding. Parameters are shared
//! across steps.

use std::rc::Rc;

use langtrack_numeric::{Activation, BoundMlp, Checkpoint, InputPart, Mlp, Tape, Tensor2D, Var};
use rand::Rng;

use crate::error::{argument, Error, Result};
use crate::graph::{TrackGraph, EDGE_FEATURE_DIM};

/// Which node embedding is projected for instance-level guidance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IsgSource {
    /// The encoder output, before any message passing.
    PreMessagePassing,
    /// The node embedding after the last message-passing step.
    PostMessagePassing,
}

impl IsgSource {
    pub fn name(self) -> &'static str {
        match self {
            IsgSource::PreMessagePassing => "pre-message-passing",
            IsgSource::PostMessagePassing => "post-message-passing",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "pre-message-passing" => Some(IsgSource::PreMessagePassing),
            "post-message-passing" => Some(IsgSource::PostMessagePassing),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelConfig {
    pub appearance_dim: usize,
    pub node_dim: usize,
    pub edge_dim: usize,
    pub text_dim: usize,
    pub mp_steps: usize,
    pub isg_source: IsgSource,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            appearance_dim: 32,
            node_dim: 2048,
            edge_dim: 16,
            text_dim: 512,
            mp_steps: 8,
            isg_source: IsgSource::PreMessagePassing,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let dims = [
            ("appearance_dim", self.appearance_dim),
            ("node_dim", self.node_dim),
            ("edge_dim", self.edge_dim),
            ("text_dim", self.text_dim),
            ("mp_steps", self.mp_steps),
        ];
        for (name, v) in dims {
            if v < 1 {
                return Err(Error::Config(format!("{name} must be >= 1")));
            }
        }
        Ok(())
    }
}

const COMPONENTS: [&str; 8] = [
    "node_encoder",
    "edge_encoder",
    "edge_update",
    "node_update_past",
    "node_update_future",
    "edge_classifier",
    "isg_projection",
    "spg_projection",
];

/// Every learnable tensor of the tracker.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    pub config: ModelConfig,
    pub node_encoder: Mlp,
    pub edge_encoder: Mlp,
    pub edge_update: Mlp,
    pub node_update_past: Mlp,
    pub node_update_future: Mlp,
    pub edge_classifier: Mlp,
    pub isg_projection: Mlp,
    pub spg_projection: Mlp,
}

type Arch = Vec<(Vec<usize>, Vec<Activation>)>;

fn architecture(c: &ModelConfig) -> Arch {
    use Activation::*;
    let (a, m, d, t) = (c.appearance_dim, c.node_dim, c.edge_dim, c.text_dim);
    vec![
        (vec![a, m, m], vec![Relu, Relu]),
        (vec![EDGE_FEATURE_DIM, d, d], vec![Relu, Relu]),
        (vec![2 * m + d, d, d], vec![Relu, Relu]),
        (vec![m + d, m], vec![Relu]),
        (vec![m + d, m], vec![Relu]),
        (vec![d, d, 1], vec![Relu, Sigmoid]),
        (vec![m, t], vec![Identity]),
        (vec![d, t], vec![Identity]),
    ]
}

impl ModelParams {
    pub fn init<R: Rng + ?Sized>(config: ModelConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let mut mlps = Vec::with_capacity(COMPONENTS.len());
        for (dims, acts) in architecture(&config) {
            mlps.push(Mlp::init(&dims, &acts, rng)?);
        }
        Ok(Self::from_components(config, mlps))
    }

    pub fn zeros(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let mut mlps = Vec::with_capacity(COMPONENTS.len());
        for (dims, acts) in architecture(&config) {
            mlps.push(Mlp::zeros(&dims, &acts)?);
        }
        Ok(Self::from_components(config, mlps))
    }

    fn from_components(config: ModelConfig, mlps: Vec<Mlp>) -> Self {
        let mut it = mlps.into_iter();
        let mut next = || it.next().expect("one MLP per component");
        Self {
            config,
            node_encoder: next(),
            edge_encoder: next(),
            edge_update: next(),
            node_update_past: next(),
            node_update_future: next(),
            edge_classifier: next(),
            isg_projection: next(),
            spg_projection: next(),
        }
    }

    fn components(&self) -> [&Mlp; 8] {
        [
            &self.node_encoder,
            &self.edge_encoder,
            &self.edge_update,
            &self.node_update_past,
            &self.node_update_future,
            &self.edge_classifier,
            &self.isg_projection,
            &self.spg_projection,
        ]
    }

    /// All tensors with stable names; this order defines the parameter ids
    /// used on the tape and by the optimizer.
    pub fn named_tensors(&self) -> Vec<(String, &Tensor2D)> {
        COMPONENTS
            .iter()
            .zip(self.components())
            .flat_map(|(name, mlp)| mlp.named_tensors(name))
            .collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut Tensor2D> {
        let mut out = Vec::new();
        for mlp in [
            &mut self.node_encoder,
            &mut self.edge_encoder,
            &mut self.edge_update,
            &mut self.node_update_past,
            &mut self.node_update_future,
            &mut self.edge_classifier,
            &mut self.isg_projection,
            &mut self.spg_projection,
        ] {
            out.extend(mlp.tensors_mut());
        }
        out
    }

    pub fn shapes(&self) -> Vec<(usize, usize)> {
        self.named_tensors()
            .iter()
            .map(|(_, t)| t.shape())
            .collect()
    }

    pub fn num_parameters(&self) -> usize {
        self.named_tensors().iter().map(|(_, t)| t.len()).sum()
    }

    pub fn bind(&self, tape: &mut Tape) -> BoundModel {
        let mut next = 0;
        let c = self.components().map(|mlp| mlp.bind(tape, &mut next));
        let [node_encoder, edge_encoder, edge_update, node_update_past, node_update_future, edge_classifier, isg_projection, spg_projection] =
            c;
        BoundModel {
            config: self.config,
            node_encoder,
            edge_encoder,
            edge_update,
            node_update_past,
            node_update_future,
            edge_classifier,
            isg_projection,
            spg_projection,
        }
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let c = &self.config;
        let meta = vec![
            ("appearance_dim".to_string(), c.appearance_dim.to_string()),
            ("node_dim".to_string(), c.node_dim.to_string()),
            ("edge_dim".to_string(), c.edge_dim.to_string()),
            ("text_dim".to_string(), c.text_dim.to_string()),
            ("mp_steps".to_string(), c.mp_steps.to_string()),
            ("isg_source".to_string(), c.isg_source.name().to_string()),
        ];
        let tensors = self
            .named_tensors()
            .into_iter()
            .map(|(n, t)| (n, t.clone()))
            .collect();
        Checkpoint { meta, tensors }
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let dim = |key: &str| -> Result<usize> {
            ckpt.meta_value(key)
                .ok_or_else(|| Error::Validation(format!("checkpoint lacks meta key {key}")))?
                .parse()
                .map_err(|_| Error::Validation(format!("checkpoint meta {key} is not an integer")))
        };
        let source = ckpt
            .meta_value("isg_source")
            .unwrap_or("pre-message-passing");
        let config = ModelConfig {
            appearance_dim: dim("appearance_dim")?,
            node_dim: dim("node_dim")?,
            edge_dim: dim("edge_dim")?,
            text_dim: dim("text_dim")?,
            mp_steps: dim("mp_steps")?,
            isg_source: IsgSource::from_name(source)
                .ok_or_else(|| Error::Validation(format!("unknown isg_source {source:?}")))?,
        };
        let mut params = Self::zeros(config)?;
        let names: Vec<String> = params.named_tensors().into_iter().map(|(n, _)| n).collect();
        if ckpt.tensors.len() != names.len() {
            return Err(Error::Validation(format!(
                "checkpoint holds {} tensors, model needs {}",
                ckpt.tensors.len(),
                names.len()
            )));
        }
        for (name, slot) in names.iter().zip(params.tensors_mut()) {
            let t = ckpt
                .tensor(name)
                .ok_or_else(|| Error::Validation(format!("checkpoint lacks tensor {name}")))?;
            if t.shape() != slot.shape() {
                return Err(Error::Validation(format!(
                    "tensor {name} has shape {:?}, expected {:?}",
                    t.shape(),
                    slot.shape()
                )));
            }
            *slot = t.clone();
        }
        Ok(params)
    }
}

/// Numeric view of one graph, or of a disjoint union of graphs that are
/// processed in a single pass.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphBatch {
    pub node_features: Tensor2D,
    pub edge_features: Tensor2D,
    pub src: Rc<[usize]>,
    pub dst: Rc<[usize]>,
    /// 1.0 for nodes without any incident edge, 0.0 otherwise.
    pub isolated: Rc<[f64]>,
    /// Reciprocal number of incoming (past) edges per node, 0 when none.
    pub past_norm: Rc<[f64]>,
    /// Reciprocal number of outgoing (future) edges per node, 0 when none.
    pub future_norm: Rc<[f64]>,
}

fn reciprocal_degrees(index: &[usize], n: usize) -> Rc<[f64]> {
    let mut deg = vec![0.0; n];
    for &i in index {
        deg[i] += 1.0;
    }
    deg.iter()
        .map(|&d| if d > 0.0 { 1.0 / d } else { 0.0 })
        .collect()
}

impl GraphBatch {
    /// Builds a batch from raw parts. `edges` are `(u, v, features)` with `u`
    /// the earlier node.
    pub fn from_parts(
        node_features: Tensor2D,
        edges: &[(usize, usize, [f64; EDGE_FEATURE_DIM])],
    ) -> Result<Self> {
        let n = node_features.rows();
        let mut data = Vec::with_capacity(edges.len() * EDGE_FEATURE_DIM);
        let mut isolated = vec![1.0; n];
        for &(u, v, f) in edges {
            if u >= n || v >= n || u == v {
                return argument(format!("edge {u}->{v} invalid for {n} nodes"));
            }
            isolated[u] = 0.0;
            isolated[v] = 0.0;
            data.extend_from_slice(&f);
        }
        let src: Rc<[usize]> = edges.iter().map(|e| e.0).collect();
        let dst: Rc<[usize]> = edges.iter().map(|e| e.1).collect();
        Ok(Self {
            node_features,
            edge_features: Tensor2D::from_vec(edges.len(), EDGE_FEATURE_DIM, data)?,
            past_norm: reciprocal_degrees(&dst, n),
            future_norm: reciprocal_degrees(&src, n),
            src,
            dst,
            isolated: isolated.into(),
        })
    }

    /// Node inputs are tracklet embeddings; the frame-gap feature is divided
    /// by the window length so the same model serves every level.
    pub fn from_graph(graph: &TrackGraph) -> Result<Self> {
        let nodes = graph.nodes();
        let dim = nodes.first().map_or(0, |t| t.embedding().len());
        let mut data = Vec::with_capacity(nodes.len() * dim);
        for t in nodes {
            if t.embedding().len() != dim {
                return argument("tracklet embeddings differ in dimension");
            }
            data.extend_from_slice(t.embedding());
        }
        let node_features = Tensor2D::from_vec(nodes.len(), dim, data)?;
        let scale = 1.0 / f64::from(graph.window_len());
        let edges: Vec<_> = graph
            .edges()
            .iter()
            .map(|e| {
                let mut f = e.features;
                f[4] *= scale;
                (e.u, e.v, f)
            })
            .collect();
        Self::from_parts(node_features, &edges)
    }

    /// Disjoint union; node and edge indices of later batches are shifted.
    pub fn union(batches: &[GraphBatch]) -> Result<Self> {
        let Some(first) = batches.first() else {
            return argument("union of zero batches");
        };
        if batches.len() == 1 {
            return Ok(first.clone());
        }
        let dim = first.node_features.cols();
        let (mut nodes, mut feats, mut src, mut dst, mut iso) =
            (Vec::new(), Vec::new(), Vec::new(), Vec::new(), Vec::new());
        let (mut past, mut future) = (Vec::new(), Vec::new());
        let mut offset = 0;
        for b in batches {
            if b.node_features.cols() != dim && b.num_nodes() > 0 {
                return argument("batches differ in node feature dimension");
            }
            nodes.extend_from_slice(b.node_features.as_slice());
            feats.extend_from_slice(b.edge_features.as_slice());
            src.extend(b.src.iter().map(|&i| i + offset));
            dst.extend(b.dst.iter().map(|&i| i + offset));
            iso.extend_from_slice(&b.isolated);
            past.extend_from_slice(&b.past_norm);
            future.extend_from_slice(&b.future_norm);
            offset += b.num_nodes();
        }
        Ok(Self {
            node_features: Tensor2D::from_vec(offset, dim, nodes)?,
            edge_features: Tensor2D::from_vec(src.len(), EDGE_FEATURE_DIM, feats)?,
            src: src.into(),
            dst: dst.into(),
            isolated: iso.into(),
            past_norm: past.into(),
            future_norm: future.into(),
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.node_features.rows()
    }

    pub fn num_edges(&self) -> usize {
        self.src.len()
    }
}

/// Model parameters registered on a tape.
pub struct BoundModel {
    pub config: ModelConfig,
    node_encoder: BoundMlp,
    edge_encoder: BoundMlp,
    edge_update: BoundMlp,
    node_update_past: BoundMlp,
    node_update_future: BoundMlp,
    edge_classifier: BoundMlp,
    isg_projection: BoundMlp,
    spg_projection: BoundMlp,
}

/// Tape variables of one forward pass. Edge-related entries are `None` for
/// graphs without edges.
#[derive(Clone, Copy, Debug)]
pub struct ForwardVars {
    pub initial_nodes: Var,
    pub nodes: Var,
    pub edges: Option<Var>,
}

impl BoundModel {
    pub fn encode(&self, tape: &mut Tape, batch: &GraphBatch) -> Result<ForwardVars> {
        if batch.num_nodes() == 0 {
            return argument("cannot encode an empty graph");
        }
        if batch.node_features.cols() != self.config.appearance_dim {
            return argument(format!(
                "node features have {} columns, encoder expects {}",
                batch.node_features.cols(),
                self.config.appearance_dim
            ));
        }
        let x = tape.constant(batch.node_features.clone());
        let nodes = self.node_encoder.forward(tape, x)?;
        let edges = if batch.num_edges() > 0 {
            let f = tape.constant(batch.edge_features.clone());
            Some(self.edge_encoder.forward(tape, f)?)
        } else {
            None
        };
        Ok(ForwardVars {
            initial_nodes: nodes,
            nodes,
            edges,
        })
    }

    pub fn step(
        &self,
        tape: &mut Tape,
        batch: &GraphBatch,
        state: ForwardVars,
    ) -> Result<ForwardVars> {
        let Some(e) = state.edges else {
            return Ok(state);
        };
        let h = state.nodes;
        let n = batch.num_nodes();
        let part = |input, rows: Option<&Rc<[usize]>>| InputPart {
            input,
            rows: rows.cloned(),
        };
        let e = self.edge_update.forward_parts(
            tape,
            &[
                part(h, Some(&batch.src)),
                part(h, Some(&batch.dst)),
                part(e, None),
            ],
        )?;
        let past = self
            .node_update_past
            .forward_parts(tape, &[part(h, Some(&batch.dst)), part(e, None)])?;
        let past = tape.scatter_add_rows(past, batch.dst.clone(), n)?;
        let past = tape.scale_rows(past, batch.past_norm.clone())?;
        let future = self
            .node_update_future
            .forward_parts(tape, &[part(h, Some(&batch.src)), part(e, None)])?;
        let future = tape.scatter_add_rows(future, batch.src.clone(), n)?;
        let future = tape.scale_rows(future, batch.future_norm.clone())?;
        let kept = tape.scale_rows(h, batch.isolated.clone())?;
        let sum = tape.add(past, future)?;
        let nodes = tape.add(sum, kept)?;
        Ok(ForwardVars {
            initial_nodes: state.initial_nodes,
            nodes,
            edges: Some(e),
        })
    }

    /// Encoder followed by `steps` message-passing rounds.
    pub fn forward(
        &self,
        tape: &mut Tape,
        batch: &GraphBatch,
        steps: usize,
    ) -> Result<ForwardVars> {
        if steps < 1 {
            return argument("message passing needs at least one step");
        }
        let mut state = self.encode(tape, batch)?;
        for _ in 0..steps {
            state = self.step(tape, batch, state)?;
        }
        Ok(state)
    }

    /// Edge probabilities as an `E x 1` column.
    pub fn classify(&self, tape: &mut Tape, edges: Var) -> Result<Var> {
        Ok(self.edge_classifier.forward(tape, edges)?)
    }

    pub fn project_nodes(&self, tape: &mut Tape, state: &ForwardVars) -> Result<Var> {
        let source = match self.config.isg_source {
            IsgSource::PreMessagePassing => state.initial_nodes,
            IsgSource::PostMessagePassing => state.nodes,
        };
        Ok(self.isg_projection.forward(tape, source)?)
    }

    pub fn project_edges(&self, tape: &mut Tape, edges: Var) -> Result<Var> {
        Ok(self.spg_projection.forward(tape, edges)?)
    }
}

/// A graph carried through the model outside of training: current node and
/// edge embeddings plus how many message-passing rounds produced them.
#[derive(Clone, Debug)]
pub struct EncodedGraph {
    pub batch: GraphBatch,
    pub initial_nodes: Tensor2D,
    pub nodes: Tensor2D,
    /// `E x edge_dim`; empty when the graph has no edges.
    pub edges: Tensor2D,
    pub steps_done: usize,
}

pub fn encode_graph(graph: &TrackGraph, params: &ModelParams) -> Result<EncodedGraph> {
    encode_batch(GraphBatch::from_graph(graph)?, params)
}

pub fn encode_batch(batch: GraphBatch, params: &ModelParams) -> Result<EncodedGraph> {
    let mut tape = Tape::new();
    let model = params.bind(&mut tape);
    let vars = model.encode(&mut tape, &batch)?;
    let nodes = tape.value(vars.nodes).clone();
    let edges = match vars.edges {
        Some(e) => tape.value(e).clone(),
        None => Tensor2D::zeros(0, params.config.edge_dim),
    };
    Ok(EncodedGraph {
        batch,
        initial_nodes: nodes.clone(),
        nodes,
        edges,
        steps_done: 0,
    })
}

pub fn message_pass(graph: &mut EncodedGraph, params: &ModelParams, steps: usize) -> Result<()> {
    if steps < 1 {
        return argument("message passing needs at least one step");
    }
    let mut tape = Tape::new();
    let model = params.bind(&mut tape);
    let nodes = tape.constant(graph.nodes.clone());
    let edges = (graph.batch.num_edges() > 0).then(|| tape.constant(graph.edges.clone()));
    let mut state = ForwardVars {
        initial_nodes: nodes,
        nodes,
        edges,
    };
    for _ in 0..steps {
        state = model.step(&mut tape, &graph.batch, state)?;
    }
    graph.nodes = tape.value(state.nodes).clone();
    if let Some(e) = state.edges {
        graph.edges = tape.value(e).clone();
    }
    graph.steps_done += steps;
    Ok(())
}

/// One probability per edge, in the graph's edge order.
pub fn classify_edges(graph: &EncodedGraph, params: &ModelParams) -> Result<Vec<f64>> {
    if graph.steps_done == 0 {
        return Err(Error::State(
            "edges can only be classified after message passing".into(),
        ));
    }
    if graph.batch.num_edges() == 0 {
        return Ok(Vec::new());
    }
    Ok(params.edge_classifier.forward(&graph.edges)?.into_vec())
}

pub fn project_nodes_for_isg(graph: &EncodedGraph, params: &ModelParams) -> Result<Tensor2D> {
    let source = match params.config.isg_source {
        IsgSource::PreMessagePassing => &graph.initial_nodes,
        IsgSource::PostMessagePassing => &graph.nodes,
    };
    Ok(params.isg_projection.forward(source)?)
}

pub fn project_edges_for_spg(graph: &EncodedGraph, params: &ModelParams) -> Result<Tensor2D> {
    if graph.batch.num_edges() == 0 {
        return Ok(Tensor2D::zeros(0, params.config.text_dim));
    }
    Ok(params.spg_projection.forward(&graph.edges)?)
}

/// Full inference pass: encode, `mp_steps` rounds, classify.
pub fn edge_probabilities(graph: &TrackGraph, params: &ModelParams) -> Result<Vec<f64>> {
    if graph.edges().is_empty() {
        return Ok(Vec::new());
    }
    let batch = GraphBatch::from_graph(graph)?;
    let mut tape = Tape::new();
    let model = params.bind(&mut tape);
    let vars = model.forward(&mut tape, &batch, params.config.mp_steps)?;
    let edges = vars.edges.expect("graph has edges");
    let probs = model.classify(&mut tape, edges)?;
    Ok(tape.value(probs).as_slice().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_config() -> ModelConfig {
        ModelConfig {
            appearance_dim: 3,
            node_dim: 8,
            edge_dim: 4,
            text_dim: 5,
            mp_steps: 2,
            ..Default::default()
        }
    }

    fn path_batch() -> GraphBatch {
        let nodes = Tensor2D::from_rows(&[
            vec![1.0, 0.0, 0.5],
            vec![0.9, 0.1, 0.4],
            vec![0.0, 1.0, -0.5],
        ])
        .unwrap();
        GraphBatch::from_parts(
            nodes,
            &[
                (0, 1, [0.1, 0.0, 0.0, 0.0, 0.2, 0.05]),
                (1, 2, [1.0, -0.5, 0.3, 0.1, 0.2, 0.9]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn zero_encoders_give_zero_embeddings() {
        let params = ModelParams::zeros(small_config()).unwrap();
        let g = encode_batch(path_batch(), &params).unwrap();
        assert!(g.nodes.as_slice().iter().all(|&v| v == 0.0));
        assert!(g.edges.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn classify_requires_message_passing() {
        let params = ModelParams::init(small_config(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let mut g = encode_batch(path_batch(), &params).unwrap();
        assert!(matches!(classify_edges(&g, &params), Err(Error::State(_))));
        assert!(message_pass(&mut g, &params, 0).is_err());
        message_pass(&mut g, &params, 2).unwrap();
        let p = classify_edges(&g, &params).unwrap();
        assert_eq!(p.len(), 2);
        assert!(p.iter().all(|&x| x > 0.0 && x < 1.0));
    }

    #[test]
    fn zero_classifier_gives_half() {
        let mut params =
            ModelParams::init(small_config(), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        params.edge_classifier = ModelParams::zeros(small_config()).unwrap().edge_classifier;
        let mut g = encode_batch(path_batch(), &params).unwrap();
        message_pass(&mut g, &params, 1).unwrap();
        assert_eq!(classify_edges(&g, &params).unwrap(), vec![0.5, 0.5]);
    }

    #[test]
    fn edgeless_graph_keeps_embeddings() {
        let params = ModelParams::init(small_config(), &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        let nodes = Tensor2D::from_rows(&[vec![1.0, 2.0, 3.0], vec![-1.0, 0.0, 1.0]]).unwrap();
        let mut g = encode_batch(GraphBatch::from_parts(nodes, &[]).unwrap(), &params).unwrap();
        assert_eq!(g.edges.rows(), 0);
        let before = g.nodes.clone();
        message_pass(&mut g, &params, 5).unwrap();
        assert_eq!(g.nodes, before);
        assert!(classify_edges(&g, &params).unwrap().is_empty());
    }

    #[test]
    fn zero_update_collapses_connected_nodes() {
        let mut params =
            ModelParams::init(small_config(), &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let zeros = ModelParams::zeros(small_config()).unwrap();
        params.node_update_past = zeros.node_update_past.clone();
        params.node_update_future = zeros.node_update_future;
        params.edge_update = zeros.edge_update;
        let mut g = encode_batch(path_batch(), &params).unwrap();
        message_pass(&mut g, &params, 1).unwrap();
        assert!(g.nodes.as_slice().iter().all(|&v| v == 0.0));
        assert!(g.edges.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn projections_have_text_dim() {
        let params = ModelParams::init(small_config(), &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let mut g = encode_batch(path_batch(), &params).unwrap();
        message_pass(&mut g, &params, 2).unwrap();
        assert_eq!(project_nodes_for_isg(&g, &params).unwrap().shape(), (3, 5));
        assert_eq!(project_edges_for_spg(&g, &params).unwrap().shape(), (2, 5));
        let zero = ModelParams::zeros(small_config()).unwrap();
        assert!(project_nodes_for_isg(&g, &zero)
            .unwrap()
            .as_slice()
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let params = ModelParams::init(small_config(), &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        let batch = GraphBatch::from_parts(Tensor2D::zeros(2, 4), &[]).unwrap();
        assert!(matches!(
            encode_batch(batch, &params),
            Err(Error::Argument(_))
        ));
    }

    #[test]
    fn checkpoint_round_trip() {
        let params = ModelParams::init(small_config(), &mut ChaCha8Rng::seed_from_u64(6)).unwrap();
        let text = params.to_checkpoint().to_text();
        let back = ModelParams::from_checkpoint(&Checkpoint::parse(&text).unwrap()).unwrap();
        assert_eq!(back, params);
    }

    #[test]
    fn union_shifts_indices() {
        let a = path_batch();
        let u = GraphBatch::union(&[a.clone(), a]).unwrap();
        assert_eq!(u.num_nodes(), 6);
        assert_eq!(&*u.src, &[0, 1, 3, 4]);
        assert_eq!(&*u.dst, &[1, 2, 4, 5]);
    }
}
