use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::{parse_graph, Graph, GraphInput, Split};

/// Node-classification dataset with its normalised adjacency precomputed.
#[derive(Debug, Clone)]
pub struct NodeDataset {
    pub graph: Graph,
    pub input: GraphInput,
    pub num_classes: usize,
}

impl NodeDataset {
    pub fn new(graph: Graph) -> Result<Self> {
        let num_classes = graph.num_classes();
        if num_classes == 0 {
            return Err(Error::Data("dataset has no labelled nodes".into()));
        }
        for (i, split) in graph.splits.iter().enumerate() {
            if split.is_some() && graph.labels[i].is_none() {
                return Err(Error::Data(format!(
                    "node {i} is in a split but has no label"
                )));
            }
        }
        let input = GraphInput::from_graph(&graph)?;
        Ok(NodeDataset {
            graph,
            input,
            num_classes,
        })
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn feature_width(&self) -> usize {
        self.input.features.cols()
    }

    /// Nodes of `split` with their labels.
    pub fn split(&self, split: Split) -> (Vec<usize>, Vec<usize>) {
        let nodes = self.graph.split_nodes(split);
        let labels = nodes
            .iter()
            .map(|&i| self.graph.labels[i].expect("split nodes are labelled"))
            .collect();
        (nodes, labels)
    }
}

pub fn parse_node_dataset(text: &str) -> Result<NodeDataset> {
    NodeDataset::new(parse_graph(text)?)
}

pub fn load_node_dataset(path: impl AsRef<Path>) -> Result<NodeDataset> {
    let text = std::fs::read_to_string(path)?;
    parse_node_dataset(&text)
}
