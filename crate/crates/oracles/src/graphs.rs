//! Small random graphs and clips for model and trainer checks.

use langtrack::graph::{BBox, Detection, TrackGraph};
use langtrack::model::GraphBatch;
use langtrack::numeric::Tensor2D;
use langtrack::trainer::{LevelData, PreparedClip};
use rand::Rng;

pub type RawEdge = (usize, usize, [f64; 6]);

pub fn uniform<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Tensor2D {
    Tensor2D::from_vec(
        rows,
        cols,
        (0..rows * cols)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect(),
    )
    .expect("shape")
}

/// Node features and directed edges `u -> v` with `u < v`, at least one
/// edge whenever there are two nodes.
pub fn random_graph<R: Rng + ?Sized>(
    rng: &mut R,
    num_nodes: usize,
    feature_dim: usize,
) -> (Tensor2D, Vec<RawEdge>) {
    let features = uniform(rng, num_nodes, feature_dim);
    let mut edges = Vec::new();
    for u in 0..num_nodes {
        for v in u + 1..num_nodes {
            if rng.random_bool(0.35) {
                edges.push((u, v, std::array::from_fn(|_| rng.random_range(-1.0..1.0))));
            }
        }
    }
    if edges.is_empty() && num_nodes >= 2 {
        edges.push((
            0,
            num_nodes - 1,
            std::array::from_fn(|_| rng.random_range(-1.0..1.0)),
        ));
    }
    (features, edges)
}

/// A clip of `levels` independent random graphs with random labels and text
/// targets.
pub fn random_clip<R: Rng + ?Sized>(
    rng: &mut R,
    levels: usize,
    max_nodes: usize,
    appearance_dim: usize,
    text_dim: usize,
) -> PreparedClip {
    let levels = (0..levels)
        .map(|_| {
            let n = rng.random_range(2..=max_nodes);
            let (features, edges) = random_graph(rng, n, appearance_dim);
            let labels = edges.iter().map(|_| rng.random_bool(0.4)).collect();
            LevelData {
                batch: GraphBatch::from_parts(features, &edges).expect("valid graph"),
                labels,
                instance_targets: Some(uniform(rng, n, text_dim)),
                scene_target: Some(uniform(rng, 1, text_dim)),
            }
        })
        .collect();
    PreparedClip {
        name: "random".into(),
        levels,
    }
}

/// Detections in frames `1..=frames`, up to `per_frame` each, with random
/// boxes and appearance.
pub fn random_detections<R: Rng + ?Sized>(
    rng: &mut R,
    frames: u32,
    per_frame: usize,
    dim: usize,
) -> Vec<Detection> {
    let mut out = Vec::new();
    for frame in 1..=frames {
        for _ in 0..rng.random_range(0..=per_frame) {
            let bbox = BBox::new(
                rng.random_range(0.0..500.0),
                rng.random_range(0.0..300.0),
                rng.random_range(10.0..60.0),
                rng.random_range(20.0..120.0),
            );
            let appearance = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            out.push(Detection::new(frame, bbox, appearance).expect("valid detection"));
        }
    }
    out
}

/// Number of degree violations plus missed acceptances: an edge above the
/// threshold that was rejected although both of its endpoints were free.
pub fn rounding_violations(
    graph: &TrackGraph,
    probs: &[f64],
    threshold: f64,
    accepted: &[usize],
) -> usize {
    let n = graph.nodes().len();
    let mut succ = vec![0usize; n];
    let mut pred = vec![0usize; n];
    let mut bad = 0;
    for &i in accepted {
        let e = &graph.edges()[i];
        succ[e.u] += 1;
        pred[e.v] += 1;
        if probs[i] <= threshold {
            bad += 1;
        }
    }
    bad += succ.iter().chain(&pred).filter(|&&d| d > 1).count();
    for (i, e) in graph.edges().iter().enumerate() {
        if probs[i] > threshold && !accepted.contains(&i) && succ[e.u] == 0 && pred[e.v] == 0 {
            bad += 1;
        }
    }
    bad
}
