//! Loop-based forward pass of the tracking network, without the tape.

use langtrack::model::ModelParams;
use langtrack::numeric::{Activation, Mlp};

pub type Vector = Vec<f64>;

pub fn mlp(net: &Mlp, x: &[f64]) -> Vector {
    let mut cur = x.to_vec();
    for layer in net.layers() {
        let (rows, cols) = layer.weight.shape();
        assert_eq!(rows, cur.len(), "layer input width");
        let mut out = Vec::with_capacity(cols);
        for j in 0..cols {
            let mut acc = layer.bias.get(0, j);
            for (i, xi) in cur.iter().enumerate() {
                acc += xi * layer.weight.get(i, j);
            }
            out.push(match layer.activation {
                Activation::Relu => acc.max(0.0),
                Activation::Identity => acc,
                Activation::Sigmoid => 1.0 / (1.0 + (-acc).exp()),
            });
        }
        cur = out;
    }
    cur
}

fn cat(parts: &[&[f64]]) -> Vector {
    parts.iter().flat_map(|p| p.iter().copied()).collect()
}

#[derive(Clone, Debug)]
pub struct Forward {
    pub initial_nodes: Vec<Vector>,
    pub nodes: Vec<Vector>,
    pub edges: Vec<Vector>,
    pub probs: Vec<f64>,
}

/// Encodes, runs `steps` rounds and classifies. Per round every edge is
/// rebuilt from `[h_src, h_dst, e]`; every node becomes the mean of its
/// incoming messages plus the mean of its outgoing messages, or keeps its
/// value when it has no edges.
pub fn forward(
    params: &ModelParams,
    features: &[Vector],
    edges: &[(usize, usize, [f64; 6])],
    steps: usize,
) -> Forward {
    let initial: Vec<Vector> = features
        .iter()
        .map(|x| mlp(&params.node_encoder, x))
        .collect();
    let mut h = initial.clone();
    let mut e: Vec<Vector> = edges
        .iter()
        .map(|(_, _, f)| mlp(&params.edge_encoder, f))
        .collect();
    for _ in 0..steps {
        let new_e: Vec<Vector> = edges
            .iter()
            .zip(&e)
            .map(|(&(u, v, _), ek)| mlp(&params.edge_update, &cat(&[&h[u], &h[v], ek])))
            .collect();
        let mut new_h = Vec::with_capacity(h.len());
        for node in 0..h.len() {
            let mut total = vec![0.0; h[node].len()];
            let mut touched = false;
            for (net, past) in [
                (&params.node_update_past, true),
                (&params.node_update_future, false),
            ] {
                let mut sum = vec![0.0; h[node].len()];
                let mut count = 0usize;
                for (k, &(u, v, _)) in edges.iter().enumerate() {
                    let this = if past { v } else { u };
                    if this != node {
                        continue;
                    }
                    let msg = mlp(net, &cat(&[&h[node], &new_e[k]]));
                    for (s, m) in sum.iter_mut().zip(&msg) {
                        *s += m;
                    }
                    count += 1;
                }
                if count > 0 {
                    touched = true;
                    for (t, s) in total.iter_mut().zip(&sum) {
                        *t += s / count as f64;
                    }
                }
            }
            new_h.push(if touched { total } else { h[node].clone() });
        }
        h = new_h;
        e = new_e;
    }
    let probs = e
        .iter()
        .map(|ek| mlp(&params.edge_classifier, ek)[0])
        .collect();
    Forward {
        initial_nodes: initial,
        nodes: h,
        edges: e,
        probs,
    }
}
