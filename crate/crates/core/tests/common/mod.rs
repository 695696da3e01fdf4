#![allow(dead_code)]

use hdgcn::graph::SparseAdjacency;
use hdgcn::Tensor;
use nalgebra::DMatrix;
use rand::Rng;

/// Random connected graph: a random spanning tree plus `extra` random edges.
pub fn connected_graph<R: Rng>(rng: &mut R, n: usize, extra: usize) -> SparseAdjacency {
    let mut edges = Vec::new();
    for i in 1..n {
        edges.push((rng.random_range(0..i), i, rng.random_range(0.5..2.0)));
    }
    for _ in 0..extra {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a != b {
            edges.push((a.min(b), a.max(b), rng.random_range(0.5..2.0)));
        }
    }
    SparseAdjacency::from_edges(n, &edges).unwrap()
}

/// Random graph that may be disconnected or contain isolated nodes.
pub fn random_graph<R: Rng>(rng: &mut R, n: usize, p: f64) -> SparseAdjacency {
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < p {
                edges.push((i, j, rng.random_range(0.1..3.0)));
            }
        }
    }
    SparseAdjacency::from_edges(n, &edges).unwrap()
}

pub fn random_tensor<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Tensor {
    Tensor::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

pub fn to_na(t: &Tensor) -> DMatrix<f64> {
    DMatrix::from_fn(t.rows(), t.cols(), |i, j| t[(i, j)])
}

pub fn from_na(m: &DMatrix<f64>) -> Tensor {
    Tensor::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// Dense adjacency assembled entry by entry from the edge weights.
pub fn dense_adjacency(a: &SparseAdjacency) -> DMatrix<f64> {
    let n = a.n();
    DMatrix::from_fn(n, n, |i, j| a.get(i, j).unwrap_or(0.0))
}

/// `(D+I)^-1/2 (A+I) (D+I)^-1/2` built with dense linear algebra.
pub fn dense_normalized(a: &SparseAdjacency) -> DMatrix<f64> {
    let n = a.n();
    let a_hat = dense_adjacency(a) + DMatrix::identity(n, n);
    let d: Vec<f64> = (0..n).map(|i| a_hat.row(i).sum()).collect();
    let inv = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        n,
        d.iter().map(|x| 1.0 / x.sqrt()),
    ));
    &inv * a_hat * &inv
}

pub fn max_abs(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    (a - b).abs().max()
}
