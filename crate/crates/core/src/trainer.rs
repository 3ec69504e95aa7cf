//! Training: labelled hierarchy graphs per clip, the combined loss and the
//! optimisation loop.
//!
//! Training graphs are teacher-forced. Level one holds single detections;
//! the nodes of every later level are the ground-truth identities of each
//! window of the level below, so every level sees correctly merged
//! tracklets regardless of how good the current model is.

use std::collections::BTreeMap;

use langtrack_numeric::{AdamConfig, AdamState, Gradients, Tape, Tensor2D};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{argument, Error, Result};
use crate::graph::{
    aggregate_tracklet, build_graph, build_hierarchy, lift_detections, Detection, TrackGraph,
    Tracklet,
};
use crate::guidance::{GuidanceConfig, LanguageEmbeddingStore};
use crate::io::AnnotationSet;
use crate::model::{GraphBatch, ModelParams};

/// Hierarchy levels at which the guidance losses are applied.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GuidanceLevels {
    All,
    Lowest,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub level_sizes: Vec<u32>,
    pub knn_k: usize,
    pub batch_clips: usize,
    pub epochs: usize,
    pub lr: f64,
    pub weight_decay: f64,
    pub focal_gamma: f64,
    pub guidance: GuidanceConfig,
    /// When false the guidance terms are never built and no embedding store
    /// is needed; this is the plain edge-classification trainer.
    pub guidance_enabled: bool,
    pub guidance_levels: GuidanceLevels,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            level_sizes: crate::graph::DEFAULT_LEVEL_SIZES.to_vec(),
            knn_k: crate::graph::DEFAULT_KNN_K,
            batch_clips: 8,
            epochs: 30,
            lr: 3e-4,
            weight_decay: 1e-4,
            focal_gamma: 1.0,
            guidance: GuidanceConfig::default(),
            guidance_enabled: true,
            guidance_levels: GuidanceLevels::All,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        crate::graph::validate_level_sizes(&self.level_sizes)?;
        self.guidance.validate()?;
        if self.knn_k < 1 || self.batch_clips < 1 {
            return Err(Error::Config("knn_k and batch_clips must be >= 1".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite())
            || !(self.weight_decay >= 0.0)
            || !(self.focal_gamma >= 0.0)
        {
            return Err(Error::Config(
                "lr must be > 0, weight_decay and focal_gamma >= 0".into(),
            ));
        }
        Ok(())
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            weight_decay: self.weight_decay,
            ..AdamConfig::default()
        }
    }
}

/// One training clip: labelled detections and their language annotations.
#[derive(Clone, Debug)]
pub struct TrainingClip {
    pub name: String,
    pub detections: Vec<Detection>,
    pub annotations: AnnotationSet,
}

/// 1 for edges joining consecutive tracklets of one identity: same majority
/// ground-truth id and no tracklet of that id in between.
pub fn edge_labels(graph: &TrackGraph) -> Result<Vec<bool>> {
    let nodes = graph.nodes();
    let mut ids = Vec::with_capacity(nodes.len());
    for t in nodes {
        if t.detections().iter().any(|d| d.gt_id.is_none()) {
            return argument("edge labels need a ground-truth id on every detection");
        }
        ids.push(t.majority_gt_id().expect("labelled"));
    }
    let mut by_id: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
    for (i, &id) in ids.iter().enumerate() {
        by_id.entry(id).or_default().push(i);
    }
    let mut next_of = vec![None; nodes.len()];
    for members in by_id.values_mut() {
        members.sort_by_key(|&i| (nodes[i].start_frame(), i));
        for w in members.windows(2) {
            next_of[w[0]] = Some(w[1]);
        }
    }
    Ok(graph
        .edges()
        .iter()
        .map(|e| next_of[e.u] == Some(e.v))
        .collect())
}

/// Level-(l+1) tracklets: detections of one identity inside one window of
/// the current level, merged.
fn teacher_merge(tracklets: Vec<Tracklet>, window_size: u32) -> Result<Vec<Tracklet>> {
    let mut groups: BTreeMap<(u32, u32), Vec<Tracklet>> = BTreeMap::new();
    for t in tracklets {
        let id = t
            .majority_gt_id()
            .ok_or_else(|| Error::Argument("training detection without ground-truth id".into()))?;
        groups
            .entry(((t.start_frame() - 1) / window_size, id))
            .or_default()
            .push(t);
    }
    groups
        .into_values()
        .map(|parts| aggregate_tracklet(&parts))
        .collect()
}

/// Everything one clip contributes to the loss at one level.
#[derive(Clone, Debug)]
pub struct LevelData {
    pub batch: GraphBatch,
    pub labels: Vec<bool>,
    /// One instance-description embedding per node.
    pub instance_targets: Option<Tensor2D>,
    /// The scene-description embedding as a single row.
    pub scene_target: Option<Tensor2D>,
}

#[derive(Clone, Debug)]
pub struct PreparedClip {
    pub name: String,
    pub levels: Vec<LevelData>,
}

/// Teacher-forced graphs of every level of a clip. Text targets are looked
/// up only when `store` is given.
pub fn prepare_clip(
    clip: &TrainingClip,
    store: Option<&LanguageEmbeddingStore>,
    cfg: &TrainConfig,
) -> Result<PreparedClip> {
    if clip.detections.is_empty() {
        return argument(format!("clip {} has no detections", clip.name));
    }
    let num_frames = clip
        .detections
        .iter()
        .map(|d| d.frame)
        .max()
        .expect("nonempty");
    let schedule = build_hierarchy(num_frames, &cfg.level_sizes)?;
    let scene = match store {
        Some(s) => {
            let v = s.lookup(&clip.annotations.scene_description()?)?;
            Some(Tensor2D::from_vec(1, v.len(), v.to_vec())?)
        }
        None => None,
    };
    let mut current = lift_detections(&clip.detections);
    let mut levels = Vec::with_capacity(schedule.num_levels());
    for (level, windows) in schedule.windows.iter().enumerate() {
        let size = schedule.level_sizes[level];
        let mut buckets: Vec<Vec<Tracklet>> = vec![Vec::new(); windows.len()];
        for t in &current {
            buckets[((t.start_frame() - 1) / size) as usize].push(t.clone());
        }
        let mut batches = Vec::new();
        let mut labels = Vec::new();
        let mut node_ids = Vec::new();
        for (bucket, &window) in buckets.into_iter().zip(windows) {
            if bucket.is_empty() {
                continue;
            }
            let graph = build_graph(bucket, cfg.knn_k, window)?;
            labels.extend(edge_labels(&graph)?);
            node_ids.extend(
                graph
                    .nodes()
                    .iter()
                    .map(|t| t.majority_gt_id().expect("labelled")),
            );
            batches.push(GraphBatch::from_graph(&graph)?);
        }
        let batch = GraphBatch::union(&batches)?;
        let instance_targets = match store {
            Some(s) => {
                let mut data = Vec::with_capacity(node_ids.len() * s.dim());
                let mut cache: BTreeMap<u32, &[f64]> = BTreeMap::new();
                for id in &node_ids {
                    if !cache.contains_key(id) {
                        let description =
                            clip.annotations.instance_description(*id).map_err(|_| {
                                Error::Lookup(format!(
                                    "instance description of track {id} in {}",
                                    clip.name
                                ))
                            })?;
                        cache.insert(*id, s.lookup(&description)?);
                    }
                    data.extend_from_slice(cache[id]);
                }
                Some(Tensor2D::from_vec(node_ids.len(), s.dim(), data)?)
            }
            None => None,
        };
        levels.push(LevelData {
            batch,
            labels,
            instance_targets,
            scene_target: scene.clone(),
        });
        current = teacher_merge(current, size)?;
    }
    Ok(PreparedClip {
        name: clip.name.clone(),
        levels,
    })
}

/// Loss terms summed over levels.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LossComponents {
    pub lc: f64,
    pub isg: f64,
    pub spg: f64,
    pub total: f64,
}

impl LossComponents {
    fn add_scaled(&mut self, other: &LossComponents, w: f64) {
        self.lc += w * other.lc;
        self.isg += w * other.isg;
        self.spg += w * other.spg;
        self.total += w * other.total;
    }
}

/// Loss of one clip, with its gradients scaled by `weight`.
pub fn clip_loss(
    params: &ModelParams,
    clip: &PreparedClip,
    cfg: &TrainConfig,
    weight: f64,
) -> Result<(LossComponents, Gradients)> {
    let mut tape = Tape::new();
    let model = params.bind(&mut tape);
    let mut terms = Vec::new();
    let mut parts = LossComponents::default();
    for (level, data) in clip.levels.iter().enumerate() {
        let vars = model.forward(&mut tape, &data.batch, params.config.mp_steps)?;
        if let Some(edges) = vars.edges {
            let probs = model.classify(&mut tape, edges)?;
            let lc = tape.focal_bce_mean(probs, &data.labels, cfg.focal_gamma)?;
            parts.lc += tape.scalar(lc)?;
            terms.push(lc);
        }
        let guided =
            cfg.guidance_enabled && (level == 0 || cfg.guidance_levels == GuidanceLevels::All);
        if !guided {
            continue;
        }
        let missing = || {
            Error::State(
                "guidance is enabled but the clip was prepared without text targets".into(),
            )
        };
        let targets = data.instance_targets.as_ref().ok_or_else(missing)?;
        let projected = model.project_nodes(&mut tape, &vars)?;
        let isg = tape.kl_rows_mean(projected, targets)?;
        parts.isg += tape.scalar(isg)?;
        terms.push(tape.scale(isg, cfg.guidance.alpha));
        if let Some(edges) = vars.edges {
            let scene = data.scene_target.as_ref().ok_or_else(missing)?;
            let projected = model.project_edges(&mut tape, edges)?;
            let spg = tape.kl_rows_mean(projected, scene)?;
            parts.spg += tape.scalar(spg)?;
            terms.push(tape.scale(spg, cfg.guidance.beta));
        }
    }
    let Some(mut total) = terms.first().copied() else {
        return Ok((parts, Gradients::default()));
    };
    for &t in &terms[1..] {
        total = tape.add(total, t)?;
    }
    parts.total = tape.scalar(total)?;
    let scaled = tape.scale(total, weight);
    let grads = tape.backward(scaled)?;
    Ok((parts, grads))
}

/// One optimiser step on the mean loss of `batch`.
pub fn train_step(
    params: &mut ModelParams,
    adam: &mut AdamState,
    batch: &[&PreparedClip],
    cfg: &TrainConfig,
) -> Result<LossComponents> {
    if batch.is_empty() {
        return argument("empty training batch");
    }
    let shapes = params.shapes();
    let mut grads: Vec<Tensor2D> = shapes.iter().map(|&(r, c)| Tensor2D::zeros(r, c)).collect();
    let mut mean = LossComponents::default();
    let w = 1.0 / batch.len() as f64;
    for clip in batch {
        let (parts, g) = clip_loss(params, clip, cfg, w)?;
        mean.add_scaled(&parts, w);
        for (acc, (i, _)) in grads.iter_mut().zip(shapes.iter().enumerate()) {
            if let Some(gi) = g.get(i) {
                acc.add_assign(gi);
            }
        }
    }
    adam.step(&mut params.tensors_mut(), &grads)?;
    Ok(mean)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainReport {
    /// Mean batch loss of every epoch.
    pub epoch_losses: Vec<LossComponents>,
    pub steps: u64,
}

/// Trains `params` in place for `cfg.epochs` epochs; clips are reshuffled
/// every epoch by a generator seeded from `cfg.seed`.
pub fn train(
    params: &mut ModelParams,
    clips: &[PreparedClip],
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    let mut adam = AdamState::new(cfg.adam(), &params.shapes());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5ee_d0fb_a7c4);
    let mut report = TrainReport::default();
    let mut order: Vec<usize> = (0..clips.len()).collect();
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = LossComponents::default();
        let batches: Vec<&[usize]> = order.chunks(cfg.batch_clips).collect();
        for chunk in &batches {
            let batch: Vec<&PreparedClip> = chunk.iter().map(|&i| &clips[i]).collect();
            let parts = train_step(params, &mut adam, &batch, cfg)?;
            epoch_loss.add_scaled(&parts, 1.0 / batches.len() as f64);
        }
        log::info!(
            "epoch {epoch}: total {:.5} lc {:.5} isg {:.5} spg {:.5}",
            epoch_loss.total,
            epoch_loss.lc,
            epoch_loss.isg,
            epoch_loss.spg
        );
        report.epoch_losses.push(epoch_loss);
    }
    report.steps = adam.step_count();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::BBox;

    fn det(frame: u32, x: f64, id: u32) -> Detection {
        Detection::new(frame, BBox::new(x, 0.0, 10.0, 20.0), vec![x])
            .unwrap()
            .with_gt_id(id)
    }

    #[test]
    fn labels_follow_consecutive_rule() {
        let dets = vec![
            det(1, 0.0, 1),
            det(2, 0.0, 1),
            det(3, 0.0, 1),
            det(2, 50.0, 2),
        ];
        let g = build_graph(lift_detections(&dets), 10, (1, 5)).unwrap();
        let labels = edge_labels(&g).unwrap();
        for (e, l) in g.edges().iter().zip(&labels) {
            let (a, b) = (&g.nodes()[e.u], &g.nodes()[e.v]);
            let same = a.majority_gt_id() == b.majority_gt_id();
            let consecutive = b.start_frame() == a.end_frame() + 1;
            assert_eq!(
                *l,
                same && consecutive,
                "edge {}->{}",
                a.start_frame(),
                b.start_frame()
            );
        }
        assert_eq!(labels.iter().filter(|&&l| l).count(), 2);
        let unlabeled = vec![Detection::new(1, BBox::new(0.0, 0.0, 1.0, 1.0), vec![0.0]).unwrap()];
        let g = build_graph(lift_detections(&unlabeled), 3, (1, 5)).unwrap();
        assert!(edge_labels(&g).is_err());
    }

    #[test]
    fn teacher_merge_groups_by_window_and_id() {
        let dets: Vec<Detection> = (1..=10)
            .flat_map(|f| [det(f, 0.0, 1), det(f, 50.0, 2)])
            .collect();
        let merged = teacher_merge(lift_detections(&dets), 5).unwrap();
        assert_eq!(merged.len(), 4);
        assert!(merged.iter().all(|t| t.len() == 5));
    }
}
