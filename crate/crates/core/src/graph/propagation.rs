//! Feature-alignment analysis between two nodes under repeated propagation.
//!
//! With the probability transition the features follow the row-stochastic
//! random walk `(D+I)^-1 (A+I)`. Without it they diffuse through the
//! symmetric `Ã` and every row is rescaled to unit length after each step,
//! so no probability mass is transferred between nodes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

use super::{Graph, SparseAdjacency};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransitionRegime {
    WithTransition,
    WithoutTransition,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlignmentOutcome {
    Converged(usize),
    NotConverged,
}

impl AlignmentOutcome {
    pub fn steps(self) -> Option<usize> {
        match self {
            AlignmentOutcome::Converged(s) => Some(s),
            AlignmentOutcome::NotConverged => None,
        }
    }
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

fn renormalize_rows(h: &mut Tensor) {
    for i in 0..h.rows() {
        let row = h.row_mut(i);
        let norm = row.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            row.iter_mut().for_each(|x| *x /= norm);
        }
    }
}

/// Number of propagation steps until `cos(H[src], H[dst]) >= threshold`.
pub fn feature_alignment_steps(
    adjacency: &SparseAdjacency,
    features: &Tensor,
    src: usize,
    dst: usize,
    regime: TransitionRegime,
    threshold: f64,
    max_steps: usize,
) -> Result<AlignmentOutcome> {
    let n = adjacency.n();
    if features.rows() != n {
        return Err(Error::dim(
            "feature_alignment_steps",
            (n, n),
            features.shape(),
        ));
    }
    if src >= n || dst >= n {
        return Err(Error::Usage(format!(
            "nodes ({src}, {dst}) out of range for {n} nodes"
        )));
    }
    if src == dst {
        return Err(Error::Usage("source and destination must differ".into()));
    }
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::Usage(format!(
            "threshold must lie in (0, 1), got {threshold}"
        )));
    }
    let operator = match regime {
        TransitionRegime::WithTransition => adjacency.random_walk()?,
        TransitionRegime::WithoutTransition => adjacency.normalize()?,
    };
    let mut h = features.clone();
    for step in 0..=max_steps {
        if cosine(h.row(src), h.row(dst)) >= threshold {
            return Ok(AlignmentOutcome::Converged(step));
        }
        if step == max_steps {
            break;
        }
        h = operator.spmm(&h)?;
        if regime == TransitionRegime::WithoutTransition {
            renormalize_rows(&mut h);
        }
    }
    Ok(AlignmentOutcome::NotConverged)
}

/// Five-node demonstration graph: `n1` (node 0) is a hub tied strongly to
/// `n2`, `n3`, `n5`, and `n4` (node 3) hangs off `n3` by a weak edge. Only
/// `n1` and `n4` carry features; the other nodes are masked to zero.
pub fn figure1_graph() -> Graph {
    let edges = [
        (0, 1, 2.0),
        (0, 2, 2.0),
        (0, 4, 2.0),
        (1, 2, 0.5),
        (2, 3, 0.3),
    ];
    let adjacency = SparseAdjacency::from_edges(5, &edges).expect("valid edges");
    let mut features = Tensor::zeros(5, 2);
    features[(0, 0)] = 1.0;
    features[(3, 1)] = 1.0;
    Graph::new(adjacency, Some(features)).expect("consistent shapes")
}
