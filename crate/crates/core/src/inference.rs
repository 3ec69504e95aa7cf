//! From edge probabilities to trajectories.
//!
//! Nothing in this module takes a [`crate::guidance::LanguageEmbeddingStore`]:
//! tracking runs on detections and model parameters alone.

use std::collections::BTreeMap;

use crate::error::{argument, Error, Result};
use crate::graph::{
    aggregate_tracklet, build_graph, build_hierarchy, lift_detections, Detection, TrackGraph,
    Tracklet,
};
use crate::model::{edge_probabilities, ModelParams};

/// Produces one association probability per edge of a graph.
pub trait EdgeScorer {
    fn score(&self, graph: &TrackGraph) -> Result<Vec<f64>>;
}

/// Scores edges with the learned classifier.
pub struct ModelScorer<'a>(pub &'a ModelParams);

impl EdgeScorer for ModelScorer<'_> {
    fn score(&self, graph: &TrackGraph) -> Result<Vec<f64>> {
        edge_probabilities(graph, self.0)
    }
}

/// Ground-truth classifier: probability 1 when both endpoints carry the same
/// majority ground-truth id, 0 otherwise.
pub struct OracleScorer;

impl EdgeScorer for OracleScorer {
    fn score(&self, graph: &TrackGraph) -> Result<Vec<f64>> {
        let ids: Vec<Option<u32>> = graph.nodes().iter().map(Tracklet::majority_gt_id).collect();
        graph
            .edges()
            .iter()
            .map(|e| match (ids[e.u], ids[e.v]) {
                (Some(a), Some(b)) => Ok(if a == b { 1.0 } else { 0.0 }),
                _ => argument("oracle scoring needs ground-truth ids on every detection"),
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrackConfig {
    pub level_sizes: Vec<u32>,
    pub knn_k: usize,
    pub threshold: f64,
}

impl Default for TrackConfig {
    fn default() -> Self {
        Self {
            level_sizes: crate::graph::DEFAULT_LEVEL_SIZES.to_vec(),
            knn_k: crate::graph::DEFAULT_KNN_K,
            threshold: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrackResult {
    /// Track id of every input detection, indexed like the input.
    pub ids: Vec<u32>,
    /// Detections of every track in frame order.
    pub trajectories: BTreeMap<u32, Vec<Detection>>,
}

impl TrackResult {
    pub fn num_tracks(&self) -> usize {
        self.trajectories.len()
    }
}

/// Greedy rounding: edges are visited by decreasing probability (ties keep
/// graph edge order) and accepted when above `threshold` and neither
/// endpoint already has an accepted edge on that side. Returns accepted edge
/// indices in ascending order.
pub fn round_edges(graph: &TrackGraph, probs: &[f64], threshold: f64) -> Result<Vec<usize>> {
    if probs.len() != graph.edges().len() {
        return argument(format!(
            "{} probabilities for {} edges",
            probs.len(),
            graph.edges().len()
        ));
    }
    if !(threshold > 0.0 && threshold < 1.0) {
        return argument(format!("threshold must lie in (0, 1), got {threshold}"));
    }
    let endpoints: Vec<(usize, usize)> = graph.edges().iter().map(|e| (e.u, e.v)).collect();
    let accepted = round_pairs(&endpoints, graph.nodes().len(), probs, threshold);
    debug_assert!(check_degrees(&endpoints, &accepted, graph.nodes().len()).is_ok());
    Ok(accepted)
}

pub(crate) fn round_pairs(
    endpoints: &[(usize, usize)],
    num_nodes: usize,
    probs: &[f64],
    threshold: f64,
) -> Vec<usize> {
    let mut order: Vec<usize> = (0..endpoints.len()).collect();
    order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]));
    let mut has_succ = vec![false; num_nodes];
    let mut has_pred = vec![false; num_nodes];
    let mut accepted = Vec::new();
    for i in order {
        if !(probs[i] > threshold) {
            break;
        }
        let (u, v) = endpoints[i];
        if !has_succ[u] && !has_pred[v] {
            has_succ[u] = true;
            has_pred[v] = true;
            accepted.push(i);
        }
    }
    accepted.sort_unstable();
    accepted
}

/// At most one accepted successor and predecessor per node.
pub fn check_degrees(
    endpoints: &[(usize, usize)],
    accepted: &[usize],
    num_nodes: usize,
) -> Result<()> {
    let mut succ = vec![0u32; num_nodes];
    let mut pred = vec![0u32; num_nodes];
    for &i in accepted {
        let &(u, v) = endpoints
            .get(i)
            .ok_or_else(|| Error::Internal(format!("accepted edge {i} does not exist")))?;
        succ[u] += 1;
        pred[v] += 1;
        if succ[u] > 1 || pred[v] > 1 {
            return Err(Error::Internal(format!(
                "edge {u}->{v} breaks the one-successor/one-predecessor rule"
            )));
        }
    }
    Ok(())
}

/// Merges the tracklets joined by `accepted` (indices into `edges`).
/// Components come back in canonical tracklet order.
pub fn merge_components(
    tracklets: &[Tracklet],
    edges: &[(usize, usize)],
    accepted: &[usize],
) -> Result<Vec<Tracklet>> {
    let n = tracklets.len();
    check_degrees(edges, accepted, n)?;
    let mut next = vec![None; n];
    let mut has_pred = vec![false; n];
    for &i in accepted {
        let (u, v) = edges[i];
        next[u] = Some(v);
        has_pred[v] = true;
    }
    let mut merged = Vec::new();
    let mut visited = 0;
    for start in (0..n).filter(|&i| !has_pred[i]) {
        let mut parts = vec![tracklets[start].clone()];
        let mut cur = start;
        while let Some(v) = next[cur] {
            parts.push(tracklets[v].clone());
            cur = v;
        }
        visited += parts.len();
        merged.push(aggregate_tracklet(&parts)?);
    }
    if visited != n {
        return Err(Error::Internal("accepted edges contain a cycle".into()));
    }
    merged.sort_by(Tracklet::canonical_cmp);
    Ok(merged)
}

/// Trajectories from tracklets joined by accepted `(u, v)` pairs; ids are
/// 1..C by first frame, then canonical tracklet order.
pub fn assign_ids(tracklets: &[Tracklet], accepted: &[(usize, usize)]) -> Result<TrackResult> {
    let all: Vec<usize> = (0..accepted.len()).collect();
    let merged = merge_components(tracklets, accepted, &all)?;
    result_from_tracklets(&merged)
}

fn result_from_tracklets(tracklets: &[Tracklet]) -> Result<TrackResult> {
    let total: usize = tracklets.iter().map(Tracklet::len).sum();
    let mut ids = vec![0u32; total];
    let mut trajectories = BTreeMap::new();
    for (k, t) in tracklets.iter().enumerate() {
        let id = k as u32 + 1;
        for &s in t.sources() {
            if s >= total || ids[s] != 0 {
                return Err(Error::Internal(format!(
                    "detection {s} assigned twice or out of range"
                )));
            }
            ids[s] = id;
        }
        trajectories.insert(id, t.detections().to_vec());
    }
    Ok(TrackResult { ids, trajectories })
}

/// Runs the whole hierarchy: every window of every level is turned into a
/// graph, scored, rounded and merged; the final tracklets become tracks.
pub fn track_video(
    detections: &[Detection],
    scorer: &dyn EdgeScorer,
    config: &TrackConfig,
) -> Result<TrackResult> {
    if detections.is_empty() {
        return argument("tracking needs at least one detection");
    }
    for d in detections {
        d.validate()?;
    }
    let num_frames = detections.iter().map(|d| d.frame).max().expect("nonempty");
    let schedule = build_hierarchy(num_frames, &config.level_sizes)?;
    let mut current = lift_detections(detections);
    for (level, windows) in schedule.windows.iter().enumerate() {
        let size = schedule.level_sizes[level];
        let mut buckets: Vec<Vec<Tracklet>> = vec![Vec::new(); windows.len()];
        for t in current {
            buckets[((t.start_frame() - 1) / size) as usize].push(t);
        }
        let mut next = Vec::new();
        for (bucket, &window) in buckets.into_iter().zip(windows) {
            if bucket.len() < 2 {
                next.extend(bucket);
                continue;
            }
            let graph = build_graph(bucket, config.knn_k, window)?;
            let probs = scorer.score(&graph)?;
            let accepted = round_edges(&graph, &probs, config.threshold)?;
            let endpoints: Vec<(usize, usize)> = graph.edges().iter().map(|e| (e.u, e.v)).collect();
            next.extend(merge_components(graph.nodes(), &endpoints, &accepted)?);
        }
        log::debug!("level {level}: {} tracklets", next.len());
        current = next;
    }
    current.sort_by(Tracklet::canonical_cmp);
    result_from_tracklets(&current)
}
