use std::collections::{BTreeSet, HashMap};

use crate::error::{Error, Result};

use super::SparseAdjacency;

/// Word co-occurrence graph of a single document.
#[derive(Debug, Clone, PartialEq)]
pub struct TextGraph {
    /// Distinct tokens in first-occurrence order; node `i` is `nodes[i]`.
    pub nodes: Vec<String>,
    pub adjacency: SparseAdjacency,
}

impl TextGraph {
    pub fn edge_set(&self) -> BTreeSet<(String, String)> {
        self.adjacency
            .upper_edges()
            .map(|(i, j, _)| {
                let (a, b) = (&self.nodes[i], &self.nodes[j]);
                if a <= b {
                    (a.clone(), b.clone())
                } else {
                    (b.clone(), a.clone())
                }
            })
            .collect()
    }
}

/// Builds the unweighted co-occurrence graph of `tokens`: one node per distinct
/// token, and an edge between every pair of distinct tokens sharing a
/// length-`window` sliding window. Documents shorter than the window form a
/// single window.
pub fn build_cooccurrence_graph<S: AsRef<str>>(tokens: &[S], window: usize) -> Result<TextGraph> {
    if window < 2 {
        return Err(Error::Config(format!("window must be >= 2, got {window}")));
    }
    if tokens.is_empty() {
        return Err(Error::Data(
            "cannot build a graph from an empty document".into(),
        ));
    }
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut nodes = Vec::new();
    let ids: Vec<usize> = tokens
        .iter()
        .map(|t| {
            let t = t.as_ref();
            *index.entry(t).or_insert_with(|| {
                nodes.push(t.to_string());
                nodes.len() - 1
            })
        })
        .collect();

    let span = window.min(ids.len());
    let mut pairs = BTreeSet::new();
    for win in ids.windows(span) {
        for (a, &i) in win.iter().enumerate() {
            for &j in &win[a + 1..] {
                if i != j {
                    pairs.insert((i.min(j), i.max(j)));
                }
            }
        }
    }
    let edges: Vec<_> = pairs.into_iter().map(|(i, j)| (i, j, 1.0)).collect();
    let adjacency = SparseAdjacency::from_edges(nodes.len(), &edges)?;
    Ok(TextGraph { nodes, adjacency })
}
