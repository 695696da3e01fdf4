//! Input generators shared by the benchmarks.

use hdgcn::graph::SparseAdjacency;
use hdgcn::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random graph with about `degree` neighbours per node, already normalised.
pub fn random_normalized_graph(n: usize, degree: usize, seed: u64) -> SparseAdjacency {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::with_capacity(n * degree / 2);
    for i in 0..n {
        for _ in 0..degree / 2 {
            let j = rng.random_range(0..n);
            if i != j {
                edges.push((i.min(j), i.max(j), 1.0));
            }
        }
    }
    SparseAdjacency::from_edges(n, &edges)
        .and_then(|a| a.normalize())
        .expect("generated graph is valid")
}

pub fn random_features(n: usize, d: usize, seed: u64) -> Tensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::from_fn(n, d, |_, _| rng.random_range(-1.0..1.0))
}
