//! Association graphs over detections and tracklets, and the frame-window
//! hierarchy they are built on.
//!
//! Level one of the hierarchy links single detections inside short windows;
//! every later level links the tracklets produced by the level below inside
//! windows that are exact unions of the lower windows.

use std::cmp::Ordering;

use crate::error::{argument, Error, Result};

/// Default hierarchy: windows of 5, 25, 75 and 150 frames.
pub const DEFAULT_LEVEL_SIZES: [u32; 4] = [5, 25, 75, 150];
/// Default number of candidate successors kept per node.
pub const DEFAULT_KNN_K: usize = 10;

const PRUNE_CENTER_WEIGHT: f64 = 0.05;
const PRUNE_GAP_WEIGHT: f64 = 0.01;

/// Number of handcrafted edge features.
pub const EDGE_FEATURE_DIM: usize = 6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BBox {
    pub left: f64,
    pub top: f64,
    pub width: f64,
    pub height: f64,
}

impl BBox {
    pub fn new(left: f64, top: f64, width: f64, height: f64) -> Self {
        Self {
            left,
            top,
            width,
            height,
        }
    }

    pub fn center(&self) -> (f64, f64) {
        (self.left + 0.5 * self.width, self.top + 0.5 * self.height)
    }

    pub fn area(&self) -> f64 {
        self.width.max(0.0) * self.height.max(0.0)
    }

    pub fn iou(&self, other: &BBox) -> f64 {
        let ix = (self.left + self.width).min(other.left + other.width) - self.left.max(other.left);
        let iy = (self.top + self.height).min(other.top + other.height) - self.top.max(other.top);
        if ix <= 0.0 || iy <= 0.0 {
            return 0.0;
        }
        let inter = ix * iy;
        let union = self.area() + other.area() - inter;
        if union <= 0.0 {
            0.0
        } else {
            inter / union
        }
    }

    fn total_cmp(&self, other: &BBox) -> Ordering {
        self.left
            .total_cmp(&other.left)
            .then(self.top.total_cmp(&other.top))
            .then(self.width.total_cmp(&other.width))
            .then(self.height.total_cmp(&other.height))
    }
}

/// One bounding-box observation.
#[derive(Clone, Debug, PartialEq)]
pub struct Detection {
    /// 1-based frame index.
    pub frame: u32,
    pub bbox: BBox,
    pub appearance: Vec<f64>,
    pub confidence: f64,
    pub visibility: f64,
    /// Ground-truth identity; only present for training and evaluation data.
    pub gt_id: Option<u32>,
}

impl Detection {
    pub fn new(frame: u32, bbox: BBox, appearance: Vec<f64>) -> Result<Self> {
        let det = Self {
            frame,
            bbox,
            appearance,
            confidence: 1.0,
            visibility: 1.0,
            gt_id: None,
        };
        det.validate()?;
        Ok(det)
    }

    pub fn with_gt_id(mut self, id: u32) -> Self {
        self.gt_id = Some(id);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.frame < 1 {
            return argument("detection frame must be >= 1");
        }
        if !(self.bbox.width > 0.0 && self.bbox.height > 0.0) {
            return argument(format!(
                "detection box at frame {} has non-positive size",
                self.frame
            ));
        }
        Ok(())
    }
}

/// A temporally ordered run of detections believed to share one identity.
#[derive(Clone, Debug, PartialEq)]
pub struct Tracklet {
    detections: Vec<Detection>,
    /// Position of each detection in the caller's original detection list.
    sources: Vec<usize>,
    /// Detection-count weighted mean appearance, the node encoder's input.
    embedding: Vec<f64>,
}

impl Tracklet {
    pub fn single(detection: Detection, source: usize) -> Self {
        let embedding = detection.appearance.clone();
        Self {
            detections: vec![detection],
            sources: vec![source],
            embedding,
        }
    }

    pub fn detections(&self) -> &[Detection] {
        &self.detections
    }

    pub fn sources(&self) -> &[usize] {
        &self.sources
    }

    pub fn embedding(&self) -> &[f64] {
        &self.embedding
    }

    pub fn set_embedding(&mut self, embedding: Vec<f64>) {
        self.embedding = embedding;
    }

    pub fn len(&self) -> usize {
        self.detections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.detections.is_empty()
    }

    pub fn start_frame(&self) -> u32 {
        self.detections[0].frame
    }

    pub fn end_frame(&self) -> u32 {
        self.detections[self.detections.len() - 1].frame
    }

    pub fn first(&self) -> &Detection {
        &self.detections[0]
    }

    pub fn last(&self) -> &Detection {
        &self.detections[self.detections.len() - 1]
    }

    /// Most frequent ground-truth id (smallest id on ties), `None` when no
    /// detection is labelled.
    pub fn majority_gt_id(&self) -> Option<u32> {
        let mut ids: Vec<u32> = self.detections.iter().filter_map(|d| d.gt_id).collect();
        ids.sort_unstable();
        let mut best: Option<(u32, usize)> = None;
        for chunk in ids.chunk_by(|a, b| a == b) {
            if best.is_none_or(|(_, n)| chunk.len() > n) {
                best = Some((chunk[0], chunk.len()));
            }
        }
        best.map(|(id, _)| id)
    }

    /// Deterministic ordering independent of how tracklets were supplied.
    pub(crate) fn canonical_cmp(&self, other: &Tracklet) -> Ordering {
        self.start_frame()
            .cmp(&other.start_frame())
            .then(self.end_frame().cmp(&other.end_frame()))
            .then(self.first().bbox.total_cmp(&other.first().bbox))
            .then(self.len().cmp(&other.len()))
            .then_with(|| {
                for (a, b) in self.detections.iter().zip(&other.detections) {
                    let o = a
                        .bbox
                        .total_cmp(&b.bbox)
                        .then(cmp_slices(&a.appearance, &b.appearance));
                    if o != Ordering::Equal {
                        return o;
                    }
                }
                Ordering::Equal
            })
            .then_with(|| self.sources.cmp(&other.sources))
    }
}

fn cmp_slices(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        let o = x.total_cmp(y);
        if o != Ordering::Equal {
            return o;
        }
    }
    a.len().cmp(&b.len())
}

/// One single-detection tracklet per detection, in input order.
pub fn lift_detections(detections: &[Detection]) -> Vec<Tracklet> {
    detections
        .iter()
        .enumerate()
        .map(|(i, d)| Tracklet::single(d.clone(), i))
        .collect()
}

/// Merges temporally disjoint tracklets into one.
pub fn aggregate_tracklet(parts: &[Tracklet]) -> Result<Tracklet> {
    if parts.is_empty() || parts.iter().any(Tracklet::is_empty) {
        return Err(Error::Merge(
            "cannot merge an empty set of tracklets".into(),
        ));
    }
    if parts.len() == 1 {
        return Ok(parts[0].clone());
    }
    let dim = parts[0].embedding.len();
    if parts.iter().any(|p| p.embedding.len() != dim) {
        return Err(Error::Merge(
            "tracklet embeddings differ in dimension".into(),
        ));
    }
    let mut pairs: Vec<(Detection, usize)> = parts
        .iter()
        .flat_map(|p| p.detections.iter().cloned().zip(p.sources.iter().copied()))
        .collect();
    pairs.sort_by_key(|(d, _)| d.frame);
    if let Some(w) = pairs.windows(2).find(|w| w[0].0.frame == w[1].0.frame) {
        return Err(Error::Merge(format!(
            "two detections in frame {}",
            w[0].0.frame
        )));
    }
    let total: usize = parts.iter().map(Tracklet::len).sum();
    let mut embedding = vec![0.0; dim];
    // Summing in start-frame order makes the result independent of the
    // order in which parts were passed.
    let mut ordered: Vec<&Tracklet> = parts.iter().collect();
    ordered.sort_by_key(|p| p.start_frame());
    for p in ordered {
        let w = p.len() as f64 / total as f64;
        for (e, v) in embedding.iter_mut().zip(&p.embedding) {
            *e += w * v;
        }
    }
    let (detections, sources) = pairs.into_iter().unzip();
    Ok(Tracklet {
        detections,
        sources,
        embedding,
    })
}

/// `1 - cos(a, b)`; vectors with zero norm are maximally distant.
pub fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        1.0
    } else {
        1.0 - dot / (na * nb)
    }
}

/// Handcrafted features of the hypothesis "`v` continues `u`":
/// relative center offset (x, y), log height and width ratios, frame gap and
/// boundary appearance cosine distance.
pub fn edge_features(u: &Tracklet, v: &Tracklet) -> Result<[f64; EDGE_FEATURE_DIM]> {
    if u.end_frame() >= v.start_frame() {
        return argument(format!(
            "tracklets overlap in time ({}..{} vs {}..{})",
            u.start_frame(),
            u.end_frame(),
            v.start_frame(),
            v.end_frame()
        ));
    }
    let (a, b) = (u.last(), v.first());
    let (xa, ya) = a.bbox.center();
    let (xb, yb) = b.bbox.center();
    let hsum = a.bbox.height + b.bbox.height;
    Ok([
        2.0 * (xb - xa) / hsum,
        2.0 * (yb - ya) / hsum,
        (a.bbox.height / b.bbox.height).ln(),
        (a.bbox.width / b.bbox.width).ln(),
        f64::from(v.start_frame() - u.end_frame()),
        cosine_distance(&a.appearance, &b.appearance),
    ])
}

fn pruning_score(features: &[f64; EDGE_FEATURE_DIM]) -> f64 {
    let center = features[0].hypot(features[1]);
    features[5] + PRUNE_CENTER_WEIGHT * center + PRUNE_GAP_WEIGHT * features[4]
}

#[derive(Clone, Debug, PartialEq)]
pub struct HierarchySchedule {
    pub level_sizes: Vec<u32>,
    /// Inclusive `(start, end)` frame windows per level.
    pub windows: Vec<Vec<(u32, u32)>>,
}

impl HierarchySchedule {
    pub fn num_levels(&self) -> usize {
        self.level_sizes.len()
    }
}

pub fn validate_level_sizes(level_sizes: &[u32]) -> Result<()> {
    if level_sizes.is_empty() || level_sizes[0] == 0 {
        return Err(Error::Config(
            "hierarchy needs at least one positive level size".into(),
        ));
    }
    for w in level_sizes.windows(2) {
        if w[1] <= w[0] || w[1] % w[0] != 0 {
            return Err(Error::Config(format!(
                "level size {} is not a larger multiple of {}",
                w[1], w[0]
            )));
        }
    }
    Ok(())
}

/// Tiles `[1, num_frames]` with each level's window size; the last window
/// of a level may be shorter.
pub fn build_hierarchy(num_frames: u32, level_sizes: &[u32]) -> Result<HierarchySchedule> {
    if num_frames < 1 {
        return Err(Error::Config("a sequence needs at least one frame".into()));
    }
    validate_level_sizes(level_sizes)?;
    let windows = level_sizes
        .iter()
        .map(|&size| {
            (0..num_frames.div_ceil(size))
                .map(|i| {
                    let start = 1 + i * size;
                    (start, (start + size - 1).min(num_frames))
                })
                .collect()
        })
        .collect();
    Ok(HierarchySchedule {
        level_sizes: level_sizes.to_vec(),
        windows,
    })
}

/// Candidate association between an earlier node `u` and a later node `v`.
#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub features: [f64; EDGE_FEATURE_DIM],
}

impl Edge {
    pub fn gap(&self) -> f64 {
        self.features[4]
    }
}

/// Association graph over the tracklets of one window. Nodes are kept in a
/// canonical order and edges sorted by `(frame gap, u, v)`, which is the
/// deterministic tie-break used downstream.
#[derive(Clone, Debug, PartialEq)]
pub struct TrackGraph {
    nodes: Vec<Tracklet>,
    edges: Vec<Edge>,
    window: (u32, u32),
}

impl TrackGraph {
    pub fn nodes(&self) -> &[Tracklet] {
        &self.nodes
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn window(&self) -> (u32, u32) {
        self.window
    }

    pub fn window_len(&self) -> u32 {
        self.window.1 - self.window.0 + 1
    }

    pub fn into_nodes(self) -> Vec<Tracklet> {
        self.nodes
    }

    /// Checks the structural invariants; used by tests and debug assertions.
    pub fn check_invariants(&self) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for e in &self.edges {
            if e.u == e.v || e.u >= self.nodes.len() || e.v >= self.nodes.len() {
                return Err(Error::Internal(format!(
                    "bad edge endpoints {}->{}",
                    e.u, e.v
                )));
            }
            if self.nodes[e.u].end_frame() >= self.nodes[e.v].start_frame() {
                return Err(Error::Internal(format!(
                    "edge {}->{} is not temporally ordered",
                    e.u, e.v
                )));
            }
            if !seen.insert((e.u.min(e.v), e.u.max(e.v))) {
                return Err(Error::Internal(format!("duplicate edge {}-{}", e.u, e.v)));
            }
        }
        Ok(())
    }
}

/// Builds the candidate graph for one window: every node keeps edges to its
/// `knn_k` best-scoring later nodes, scored by appearance distance plus small
/// center-offset and gap penalties.
pub fn build_graph(
    mut tracklets: Vec<Tracklet>,
    knn_k: usize,
    window: (u32, u32),
) -> Result<TrackGraph> {
    if knn_k < 1 {
        return Err(Error::Config("knn_k must be >= 1".into()));
    }
    if window.0 < 1 || window.1 < window.0 {
        return argument(format!("invalid window {window:?}"));
    }
    if tracklets.iter().any(Tracklet::is_empty) {
        return argument("empty tracklet");
    }
    if let Some(t) = tracklets
        .iter()
        .find(|t| t.start_frame() < window.0 || t.end_frame() > window.1)
    {
        return argument(format!(
            "tracklet {}..{} outside window {window:?}",
            t.start_frame(),
            t.end_frame()
        ));
    }
    tracklets.sort_by(Tracklet::canonical_cmp);
    let max_gap = window.1 - window.0 + 1;

    let mut edges = Vec::new();
    let mut candidates: Vec<(f64, f64, usize, [f64; EDGE_FEATURE_DIM])> = Vec::new();
    for (ui, u) in tracklets.iter().enumerate() {
        candidates.clear();
        for (vi, v) in tracklets.iter().enumerate() {
            if v.start_frame() <= u.end_frame() || v.start_frame() - u.end_frame() > max_gap {
                continue;
            }
            let f = edge_features(u, v)?;
            candidates.push((pruning_score(&f), f[4], vi, f));
        }
        candidates.sort_by(|a, b| {
            a.0.total_cmp(&b.0)
                .then(a.1.total_cmp(&b.1))
                .then(a.2.cmp(&b.2))
        });
        edges.extend(candidates.iter().take(knn_k).map(|&(_, _, vi, f)| Edge {
            u: ui,
            v: vi,
            features: f,
        }));
    }
    edges.sort_by(|a, b| {
        a.gap()
            .total_cmp(&b.gap())
            .then(a.u.cmp(&b.u))
            .then(a.v.cmp(&b.v))
    });
    let graph = TrackGraph {
        nodes: tracklets,
        edges,
        window,
    };
    debug_assert!(graph.check_invariants().is_ok());
    Ok(graph)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn det(frame: u32, x: f64, app: Vec<f64>) -> Detection {
        Detection::new(frame, BBox::new(x, 10.0, 20.0, 40.0), app).unwrap()
    }

    #[test]
    fn hierarchy_window_counts() {
        let h = build_hierarchy(150, &DEFAULT_LEVEL_SIZES).unwrap();
        let counts: Vec<usize> = h.windows.iter().map(Vec::len).collect();
        assert_eq!(counts, vec![30, 6, 2, 1]);
        assert_eq!(
            build_hierarchy(5, &[5]).unwrap().windows,
            vec![vec![(1, 5)]]
        );
        assert_eq!(
            build_hierarchy(7, &[5]).unwrap().windows,
            vec![vec![(1, 5), (6, 7)]]
        );
    }

    #[test]
    fn hierarchy_rejects_non_multiples() {
        assert!(matches!(
            build_hierarchy(10, &[5, 12]),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            build_hierarchy(10, &[5, 5]),
            Err(Error::Config(_))
        ));
        assert!(build_hierarchy(0, &[5]).is_err());
        assert!(build_hierarchy(10, &[]).is_err());
    }

    #[test]
    fn hierarchy_levels_nest() {
        let h = build_hierarchy(163, &[5, 25, 75, 150]).unwrap();
        for lvl in 1..h.num_levels() {
            for &(s, e) in &h.windows[lvl] {
                let covered: Vec<_> = h.windows[lvl - 1]
                    .iter()
                    .filter(|w| w.0 >= s && w.1 <= e)
                    .collect();
                assert_eq!(covered.first().unwrap().0, s);
                assert_eq!(covered.last().unwrap().1, e);
                for pair in covered.windows(2) {
                    assert_eq!(pair[0].1 + 1, pair[1].0);
                }
            }
        }
    }

    #[test]
    fn lifting() {
        let dets = vec![
            det(1, 0.0, vec![1.0]),
            det(2, 0.0, vec![1.0]),
            det(7, 0.0, vec![1.0]),
        ];
        let ts = lift_detections(&dets);
        assert_eq!(ts.len(), 3);
        assert!(ts.iter().all(|t| t.len() == 1));
        assert_eq!((ts[2].start_frame(), ts[2].end_frame()), (7, 7));
        assert!(lift_detections(&[]).is_empty());
    }

    #[test]
    fn aggregation() {
        let a = Tracklet::single(det(1, 0.0, vec![1.0, 1.0]), 0);
        let b = Tracklet::single(det(2, 0.0, vec![3.0, 3.0]), 1);
        assert_eq!(aggregate_tracklet(std::slice::from_ref(&a)).unwrap(), a);
        let m = aggregate_tracklet(&[b.clone(), a.clone()]).unwrap();
        assert_eq!(m.embedding(), &[2.0, 2.0]);
        assert_eq!(m.sources(), &[0, 1]);
        assert!(matches!(
            aggregate_tracklet(&[a.clone(), a.clone()]),
            Err(Error::Merge(_))
        ));
        assert!(aggregate_tracklet(&[]).is_err());

        let left = aggregate_tracklet(
            &(1..=5)
                .map(|f| Tracklet::single(det(f, 0.0, vec![0.0]), 0))
                .collect::<Vec<_>>(),
        )
        .unwrap();
        let right = aggregate_tracklet(
            &(6..=10)
                .map(|f| Tracklet::single(det(f, 0.0, vec![0.0]), 0))
                .collect::<Vec<_>>(),
        )
        .unwrap();
        let both = aggregate_tracklet(&[left, right]).unwrap();
        assert_eq!((both.start_frame(), both.end_frame()), (1, 10));
    }

    #[test]
    fn feature_examples() {
        let u = Tracklet::single(det(1, 5.0, vec![1.0, 0.0]), 0);
        let v = Tracklet::single(det(2, 5.0, vec![1.0, 0.0]), 1);
        let f = edge_features(&u, &v).unwrap();
        assert_eq!(f, [0.0, 0.0, 0.0, 0.0, 1.0, 0.0]);

        let tall = Tracklet::single(
            Detection::new(1, BBox::new(0.0, 0.0, 10.0, 40.0), vec![1.0]).unwrap(),
            0,
        );
        let short = Tracklet::single(
            Detection::new(3, BBox::new(0.0, 0.0, 10.0, 20.0), vec![1.0]).unwrap(),
            1,
        );
        let f = edge_features(&tall, &short).unwrap();
        assert!((f[2] - 2f64.ln()).abs() < 1e-15);
        assert_eq!(f[3], 0.0);

        let w = Tracklet::single(det(3, 5.0, vec![0.0, 1.0]), 2);
        assert!((edge_features(&u, &w).unwrap()[5] - 1.0).abs() < 1e-15);
        assert!(edge_features(&v, &u).is_err());
        assert!(edge_features(&u, &u).is_err());
    }

    #[test]
    fn graph_examples() {
        let a = Tracklet::single(det(1, 0.0, vec![1.0]), 0);
        let b = Tracklet::single(det(2, 0.0, vec![1.0]), 1);
        assert_eq!(
            build_graph(vec![a.clone(), b], 10, (1, 5))
                .unwrap()
                .edges()
                .len(),
            1
        );
        assert!(build_graph(vec![a], 10, (1, 5)).unwrap().edges().is_empty());
        assert!(build_graph(vec![], 1, (1, 5)).unwrap().edges().is_empty());
    }

    #[test]
    fn graph_rejects_out_of_window_tracklets() {
        let a = Tracklet::single(det(9, 0.0, vec![1.0]), 0);
        assert!(build_graph(vec![a.clone()], 3, (1, 5)).is_err());
        assert!(build_graph(vec![a], 0, (1, 10)).is_err());
    }

    #[test]
    fn majority_id() {
        let mut ts: Vec<Tracklet> = [3, 1, 3, 1, 2]
            .iter()
            .enumerate()
            .map(|(i, &id)| Tracklet::single(det(i as u32 + 1, 0.0, vec![1.0]).with_gt_id(id), i))
            .collect();
        assert_eq!(aggregate_tracklet(&ts).unwrap().majority_gt_id(), Some(1));
        ts.truncate(1);
        assert_eq!(ts[0].majority_gt_id(), Some(3));
        assert_eq!(
            Tracklet::single(det(1, 0.0, vec![]), 0).majority_gt_id(),
            None
        );
    }
}
