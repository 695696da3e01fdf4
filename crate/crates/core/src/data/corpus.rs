use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::{build_cooccurrence_graph, GraphInput, TextGraph};
use crate::tensor::Tensor;

use super::WordVectors;

/// Labelled documents with one co-occurrence graph each.
#[derive(Debug, Clone)]
pub struct TextCorpus {
    pub documents: Vec<Vec<String>>,
    pub labels: Vec<usize>,
    pub graphs: Vec<TextGraph>,
}

/// Token index for one-hot node features, in first-occurrence order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Vocab {
    index: HashMap<String, usize>,
}

impl Vocab {
    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    /// Tokens in index order.
    pub fn tokens(&self) -> Vec<String> {
        let mut out = vec![String::new(); self.index.len()];
        for (tok, &i) in &self.index {
            out[i].clone_from(tok);
        }
        out
    }

    /// Rebuilds a vocabulary from [`Vocab::tokens`] output.
    pub fn from_tokens(tokens: &[String]) -> Result<Self> {
        let mut index = HashMap::with_capacity(tokens.len());
        for (i, tok) in tokens.iter().enumerate() {
            if index.insert(tok.clone(), i).is_some() {
                return Err(Error::Data(format!("duplicate vocabulary token `{tok}`")));
            }
        }
        Ok(Vocab { index })
    }
}

/// Where node features come from when a corpus is turned into model inputs.
#[derive(Debug, Clone, Copy)]
pub enum FeatureSource<'a> {
    OneHot(&'a Vocab),
    Embeddings(&'a WordVectors),
}

impl FeatureSource<'_> {
    pub fn dim(&self) -> usize {
        match self {
            FeatureSource::OneHot(v) => v.len(),
            FeatureSource::Embeddings(w) => w.dim(),
        }
    }
}

/// One graph-classification example.
#[derive(Debug, Clone)]
pub struct GraphExample {
    pub input: GraphInput,
    pub label: usize,
}

impl TextCorpus {
    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }

    pub fn vocab(&self) -> Vocab {
        let mut index = HashMap::new();
        for tok in self.documents.iter().flatten() {
            let next = index.len();
            index.entry(tok.clone()).or_insert(next);
        }
        Vocab { index }
    }

    /// Model inputs for every document. Tokens missing from `source` share
    /// an all-zero row; the number of such lookups is returned alongside.
    pub fn examples(&self, source: FeatureSource<'_>) -> Result<(Vec<GraphExample>, usize)> {
        let dim = source.dim();
        let mut oov = 0;
        let mut out = Vec::with_capacity(self.len());
        for (g, &label) in self.graphs.iter().zip(&self.labels) {
            let mut features = Tensor::zeros(g.nodes.len(), dim);
            for (i, tok) in g.nodes.iter().enumerate() {
                match source {
                    FeatureSource::OneHot(v) => match v.get(tok) {
                        Some(c) => features[(i, c)] = 1.0,
                        None => oov += 1,
                    },
                    FeatureSource::Embeddings(w) => match w.get(tok) {
                        Some(row) => features.row_mut(i).copy_from_slice(row),
                        None => oov += 1,
                    },
                }
            }
            out.push(GraphExample {
                input: GraphInput::new(g.adjacency.normalize()?, features)?,
                label,
            });
        }
        if oov > 0 {
            log::warn!("{oov} token lookups fell back to the shared OOV row");
        }
        Ok((out, oov))
    }
}

/// Parses `<class>\t<tokens…>` lines; tokens are whitespace-separated.
pub fn parse_text_corpus(text: &str, window: usize) -> Result<TextCorpus> {
    let mut corpus = TextCorpus {
        documents: Vec::new(),
        labels: Vec::new(),
        graphs: Vec::new(),
    };
    for (no, line) in text.lines().enumerate() {
        let line_no = no + 1;
        if line.trim().is_empty() {
            continue;
        }
        let (class, body) = line.split_once('\t').ok_or_else(|| Error::Parse {
            line: line_no,
            msg: "expected `<class>\\t<tokens>`".into(),
        })?;
        let label: usize = class.trim().parse().map_err(|_| Error::Parse {
            line: line_no,
            msg: format!("bad class `{class}`"),
        })?;
        let tokens: Vec<String> = body.split_whitespace().map(str::to_string).collect();
        if tokens.is_empty() {
            return Err(Error::Data(format!("line {line_no}: empty document")));
        }
        corpus
            .graphs
            .push(build_cooccurrence_graph(&tokens, window)?);
        corpus.documents.push(tokens);
        corpus.labels.push(label);
    }
    Ok(corpus)
}

pub fn load_text_corpus(path: impl AsRef<Path>, window: usize) -> Result<TextCorpus> {
    parse_text_corpus(&std::fs::read_to_string(path)?, window)
}
