use langtrack::model::{
    classify_edges, encode_batch, message_pass, project_edges_for_spg, project_nodes_for_isg,
    GraphBatch, IsgSource, ModelConfig, ModelParams,
};
use langtrack::numeric::{Tape, Tensor2D};
use langtrack::trainer::{clip_loss, TrainConfig};
use langtrack_oracles::forward::forward;
use langtrack_oracles::gradcheck::relative_error;
use langtrack_oracles::graphs::{random_clip, random_graph, uniform, RawEdge};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn config(m: usize) -> ModelConfig {
    ModelConfig {
        appearance_dim: 3,
        node_dim: m,
        edge_dim: 4,
        text_dim: 5,
        mp_steps: 2,
        isg_source: IsgSource::PreMessagePassing,
    }
}

fn rows(t: &Tensor2D) -> Vec<Vec<f64>> {
    (0..t.rows()).map(|r| t.row(r).to_vec()).collect()
}

fn assert_close(a: &[f64], b: &[f64], tol: f64) {
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(b) {
        assert!((x - y).abs() <= tol * (1.0 + y.abs()), "{x} vs {y}");
    }
}

struct Run {
    nodes: Tensor2D,
    edges: Tensor2D,
    probs: Vec<f64>,
}

fn run(params: &ModelParams, features: &Tensor2D, edges: &[RawEdge], steps: usize) -> Run {
    let mut g = encode_batch(
        GraphBatch::from_parts(features.clone(), edges).unwrap(),
        params,
    )
    .unwrap();
    message_pass(&mut g, params, steps).unwrap();
    let probs = classify_edges(&g, params).unwrap();
    Run {
        nodes: g.nodes,
        edges: g.edges,
        probs,
    }
}

#[test]
fn path_graph_matches_loop_forward() {
    let params = ModelParams::init(config(8), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let features = Tensor2D::from_rows(&[
        vec![0.5, -0.2, 0.1],
        vec![0.4, -0.1, 0.3],
        vec![-0.6, 0.9, 0.0],
    ])
    .unwrap();
    let edges = vec![
        (0, 1, [0.1, 0.0, 0.05, -0.02, 0.2, 0.1]),
        (1, 2, [0.8, -0.4, 0.3, 0.1, 0.2, 0.9]),
    ];
    let got = run(&params, &features, &edges, 2);
    let want = forward(&params, &rows(&features), &edges, 2);
    for (r, w) in want.nodes.iter().enumerate() {
        assert_close(got.nodes.row(r), w, 1e-12);
    }
    for (r, w) in want.edges.iter().enumerate() {
        assert_close(got.edges.row(r), w, 1e-12);
    }
    assert_close(&got.probs, &want.probs, 1e-12);
}

#[test]
fn random_graphs_match_loop_forward() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for trial in 0..30 {
        let params = ModelParams::init(config(8), &mut rng).unwrap();
        let (features, edges) = random_graph(&mut rng, 2 + trial % 9, 3);
        let got = run(&params, &features, &edges, 3);
        let want = forward(&params, &rows(&features), &edges, 3);
        assert_close(got.nodes.as_slice(), &want.nodes.concat(), 1e-12);
        assert_close(&got.probs, &want.probs, 1e-12);
    }
}

#[test]
fn forward_is_bit_reproducible() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (features, edges) = random_graph(&mut rng, 12, 3);
    let a = ModelParams::init(config(16), &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
    let b = ModelParams::init(config(16), &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
    let (x, y) = (run(&a, &features, &edges, 4), run(&b, &features, &edges, 4));
    assert_eq!(x.nodes, y.nodes);
    assert_eq!(x.probs, y.probs);
}

#[test]
fn symmetric_nodes_stay_identical() {
    // Two identical frame-1 nodes feeding the same frame-2 node through
    // identical edges can never be told apart.
    let params = ModelParams::init(config(8), &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    let features = Tensor2D::from_rows(&[
        vec![0.3, 0.1, -0.4],
        vec![0.3, 0.1, -0.4],
        vec![0.0, 0.5, 0.2],
    ])
    .unwrap();
    let f = [0.2, -0.1, 0.0, 0.1, 0.2, 0.3];
    let edges = vec![(0, 2, f), (1, 2, f)];
    for steps in 1..6 {
        let out = run(&params, &features, &edges, steps);
        assert_eq!(out.nodes.row(0), out.nodes.row(1));
        assert_eq!(out.probs[0], out.probs[1]);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn relabelling_nodes_permutes_outputs(seed in any::<u64>(), n in 1usize..=20, steps in 1usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let params = ModelParams::init(config(8), &mut rng).unwrap();
        let (features, edges) = random_graph(&mut rng, n, 3);
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(&mut rng);
        let mut order: Vec<usize> = (0..edges.len()).collect();
        order.shuffle(&mut rng);
        let mut moved = Tensor2D::zeros(n, 3);
        for i in 0..n {
            moved.row_mut(perm[i]).copy_from_slice(features.row(i));
        }
        let moved_edges: Vec<RawEdge> = order.iter().map(|&k| (perm[edges[k].0], perm[edges[k].1], edges[k].2)).collect();
        let a = run(&params, &features, &edges, steps);
        let b = run(&params, &moved, &moved_edges, steps);
        for i in 0..n {
            for (x, y) in a.nodes.row(i).iter().zip(b.nodes.row(perm[i])) {
                prop_assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));
            }
        }
        for (pos, &k) in order.iter().enumerate() {
            prop_assert!((a.probs[k] - b.probs[pos]).abs() <= 1e-12);
            for (x, y) in a.edges.row(k).iter().zip(b.edges.row(pos)) {
                prop_assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));
            }
        }
    }
}

#[test]
fn full_loss_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let cfg = TrainConfig::default();
    for source in [IsgSource::PreMessagePassing, IsgSource::PostMessagePassing] {
        for _ in 0..5 {
            let params = ModelParams::init(
                ModelConfig {
                    isg_source: source,
                    ..config(8)
                },
                &mut rng,
            )
            .unwrap();
            let clip = random_clip(&mut rng, 2, 10, 3, 5);
            let (_, grads) = clip_loss(&params, &clip, &cfg, 1.0).unwrap();
            let analytic = grads.dense(&params.shapes());
            let loss = |p: &ModelParams| clip_loss(p, &clip, &cfg, 1.0).unwrap().0.total;
            let err = relative_error(&params, &analytic, 1e-6, &|_| true, &loss);
            assert!(err < 1e-3, "relative error {err}");
        }
    }
}

fn component_indices(params: &ModelParams, prefix: &str) -> Vec<usize> {
    params
        .named_tensors()
        .iter()
        .enumerate()
        .filter(|(_, (n, _))| n.starts_with(prefix))
        .map(|(i, _)| i)
        .collect()
}

#[test]
fn projection_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let params = ModelParams::init(config(8), &mut rng).unwrap();
    let (features, edges) = random_graph(&mut rng, 7, 3);
    let batch = GraphBatch::from_parts(features, &edges).unwrap();
    let node_targets = uniform(&mut rng, 7, 5);
    let scene = uniform(&mut rng, 1, 5);

    for nodes_side in [true, false] {
        let loss_on_tape = |p: &ModelParams| {
            let mut tape = Tape::new();
            let model = p.bind(&mut tape);
            let vars = model.forward(&mut tape, &batch, 2).unwrap();
            let loss = if nodes_side {
                let proj = model.project_nodes(&mut tape, &vars).unwrap();
                tape.kl_rows_mean(proj, &node_targets).unwrap()
            } else {
                let proj = model.project_edges(&mut tape, vars.edges.unwrap()).unwrap();
                tape.kl_rows_mean(proj, &scene).unwrap()
            };
            (tape, loss)
        };
        let (tape, loss) = loss_on_tape(&params);
        let analytic = tape.backward(loss).unwrap().dense(&params.shapes());
        let wanted = component_indices(
            &params,
            if nodes_side {
                "isg_projection"
            } else {
                "spg_projection"
            },
        );
        let value = |p: &ModelParams| {
            let (t, l) = loss_on_tape(p);
            t.scalar(l).unwrap()
        };
        let err = relative_error(&params, &analytic, 1e-6, &|i| wanted.contains(&i), &value);
        assert!(err < 1e-6, "relative error {err}");
    }

    // The tape and the standalone projections agree.
    let mut g = encode_batch(batch.clone(), &params).unwrap();
    message_pass(&mut g, &params, 2).unwrap();
    let mut tape = Tape::new();
    let model = params.bind(&mut tape);
    let vars = model.forward(&mut tape, &batch, 2).unwrap();
    let pn = model.project_nodes(&mut tape, &vars).unwrap();
    let pe = model.project_edges(&mut tape, vars.edges.unwrap()).unwrap();
    assert_eq!(tape.value(pn), &project_nodes_for_isg(&g, &params).unwrap());
    assert_close(
        tape.value(pe).as_slice(),
        project_edges_for_spg(&g, &params).unwrap().as_slice(),
        1e-15,
    );
}
