use std::collections::HashMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Word embeddings in whitespace-separated text form.
#[derive(Debug, Clone, PartialEq)]
pub struct WordVectors {
    pub index: HashMap<String, usize>,
    pub vectors: Tensor,
    /// Lines skipped because their token had already been seen.
    pub duplicates: usize,
}

impl WordVectors {
    pub fn dim(&self) -> usize {
        self.vectors.cols()
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.index.get(token).map(|&r| self.vectors.row(r))
    }
}

/// Parses `token v_1 … v_dim` lines. Blank lines are skipped; the first
/// occurrence of a repeated token wins.
pub fn parse_word_vectors(text: &str, dim: usize) -> Result<WordVectors> {
    if dim == 0 {
        return Err(Error::Config("embedding dim must be >= 1".into()));
    }
    let mut index = HashMap::new();
    let mut data = Vec::new();
    let mut duplicates = 0;
    for (no, line) in text.lines().enumerate() {
        let line_no = no + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        if fields.len() != dim + 1 {
            return Err(Error::Parse {
                line: line_no,
                msg: format!("expected {} fields, found {}", dim + 1, fields.len()),
            });
        }
        let token = fields[0];
        if index.contains_key(token) {
            log::warn!("line {line_no}: duplicate token `{token}` ignored");
            duplicates += 1;
            continue;
        }
        for f in &fields[1..] {
            let v: f64 = f.parse().map_err(|_| Error::Parse {
                line: line_no,
                msg: format!("bad number `{f}`"),
            })?;
            data.push(v);
        }
        index.insert(token.to_string(), index.len());
    }
    let vectors = Tensor::from_vec(index.len(), dim, data)?;
    Ok(WordVectors {
        index,
        vectors,
        duplicates,
    })
}

pub fn load_word_vectors(path: impl AsRef<Path>, dim: usize) -> Result<WordVectors> {
    parse_word_vectors(&std::fs::read_to_string(path)?, dim)
}
