//! Graph storage, normalisation and graph-level utilities.

mod format;
mod propagation;
mod sparse;
mod text;

use std::borrow::Cow;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub use format::{parse_graph, read_graph, write_graph, write_graph_string};
pub use propagation::{feature_alignment_steps, figure1_graph, AlignmentOutcome, TransitionRegime};
pub use sparse::{SparseAdjacency, DENSE_GUARD};
pub use text::{build_cooccurrence_graph, TextGraph};

/// Membership of a node in the train/validation/test partition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::Data(format!("unknown split `{other}`"))),
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

/// An undirected attributed graph with optional supervision.
///
/// A node belongs to at most one split, which keeps the masks disjoint.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    pub adjacency: SparseAdjacency,
    /// `None` stands for one-hot identity features.
    pub features: Option<Tensor>,
    pub labels: Vec<Option<usize>>,
    pub splits: Vec<Option<Split>>,
}

impl Graph {
    pub fn new(adjacency: SparseAdjacency, features: Option<Tensor>) -> Result<Self> {
        let n = adjacency.n();
        if let Some(f) = &features {
            if f.rows() != n {
                return Err(Error::dim("graph features", (n, n), f.shape()));
            }
        }
        Ok(Graph {
            adjacency,
            features,
            labels: vec![None; n],
            splits: vec![None; n],
        })
    }

    pub fn n(&self) -> usize {
        self.adjacency.n()
    }

    pub fn feature_width(&self) -> usize {
        self.features.as_ref().map_or(self.n(), Tensor::cols)
    }

    pub fn feature_matrix(&self) -> Cow<'_, Tensor> {
        match &self.features {
            Some(f) => Cow::Borrowed(f),
            None => Cow::Owned(Tensor::identity(self.n())),
        }
    }

    /// Nodes assigned to `split`, ascending.
    pub fn split_nodes(&self, split: Split) -> Vec<usize> {
        (0..self.n())
            .filter(|&i| self.splits[i] == Some(split))
            .collect()
    }

    pub fn num_classes(&self) -> usize {
        self.labels.iter().flatten().max().map_or(0, |m| m + 1)
    }
}

/// Model-ready view of a graph: normalised adjacency plus a dense feature matrix.
#[derive(Debug, Clone)]
pub struct GraphInput {
    pub adjacency: Arc<SparseAdjacency>,
    pub features: Tensor,
}

impl GraphInput {
    pub fn new(normalized: SparseAdjacency, features: Tensor) -> Result<Self> {
        if features.rows() != normalized.n() {
            return Err(Error::dim(
                "graph input",
                (normalized.n(), normalized.n()),
                features.shape(),
            ));
        }
        Ok(GraphInput {
            adjacency: Arc::new(normalized),
            features,
        })
    }

    pub fn from_graph(g: &Graph) -> Result<Self> {
        Self::new(g.adjacency.normalize()?, g.feature_matrix().into_owned())
    }

    pub fn n(&self) -> usize {
        self.adjacency.n()
    }

    /// Applies a node permutation: new node `i` is old node `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        let n = self.n();
        let mut inv = vec![0; n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        let entries = (0..n).flat_map(|i| {
            self.adjacency
                .row(i)
                .map(|(j, w)| (inv[i], inv[j], w))
                .collect::<Vec<_>>()
        });
        let adj = SparseAdjacency::from_entries(n, entries)?;
        Self::new(adj, self.features.select_rows(perm))
    }
}
