#![allow(dead_code)]

pub mod stats;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sgnn_core::graph::{Graph, GraphInput, Splits};
use sgnn_core::Matrix;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Erdős–Rényi graph with random features, labels and splits.
pub fn random_graph(
    n: usize,
    edge_prob: f64,
    feature_dim: usize,
    num_classes: usize,
    rng: &mut ChaCha8Rng,
) -> Graph {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random::<f64>() < edge_prob {
                edges.push((u, v));
            }
        }
    }
    let features = Matrix::from_vec(
        n,
        feature_dim,
        (0..n * feature_dim)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect(),
    )
    .unwrap();
    let labels = (0..n).map(|_| rng.random_range(0..num_classes)).collect();
    let mut splits = Splits::empty(n);
    for v in 0..n {
        match rng.random_range(0..3) {
            0 => splits.train.set(v, true),
            1 => splits.val.set(v, true),
            _ => splits.test.set(v, true),
        }
    }
    if splits.train.count() == 0 {
        splits.val.set(0, false);
        splits.test.set(0, false);
        splits.train.set(0, true);
    }
    Graph::build(GraphInput {
        num_nodes: n,
        num_classes,
        edges,
        features,
        labels,
        splits,
    })
    .unwrap()
    .0
}
