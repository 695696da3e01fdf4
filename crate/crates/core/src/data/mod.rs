//! Dataset loaders.

mod corpus;
mod node;
mod vectors;

/// Sliding-window width used when building text graphs.
pub const DEFAULT_WINDOW: usize = 3;

pub use corpus::{
    load_text_corpus, parse_text_corpus, FeatureSource, GraphExample, TextCorpus, Vocab,
};
pub use node::{load_node_dataset, parse_node_dataset, NodeDataset};
pub use vectors::{load_word_vectors, parse_word_vectors, WordVectors};
