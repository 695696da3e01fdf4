//! Line-oriented graph files.
//!
//! ```text
//! n <count>
//! d <feature width>              (optional)
//! e <i> <j> <weight>             i < j, 0-based
//! x <node> <col>:<value> ...     sparse feature row, needs `d`
//! y <node> <class>
//! m <node> <train|val|test>
//! ```
//!
//! Blank lines and lines starting with `#` are ignored. Without `d` the
//! graph carries one-hot identity features. Reals are written in Rust's
//! shortest round-trip form, so writing a parsed file reproduces it exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

use super::{Graph, SparseAdjacency, Split};

fn perr(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn num<T: std::str::FromStr>(line: usize, field: &str, what: &str) -> Result<T> {
    field
        .parse()
        .map_err(|_| perr(line, format!("invalid {what} `{field}`")))
}

fn node(line: usize, field: &str, n: usize) -> Result<usize> {
    let v: usize = num(line, field, "node index")?;
    if v >= n {
        return Err(perr(line, format!("node {v} out of range for {n} nodes")));
    }
    Ok(v)
}

pub fn parse_graph(text: &str) -> Result<Graph> {
    let mut n: Option<usize> = None;
    let mut width: Option<usize> = None;
    let mut edges = Vec::new();
    let mut feature_rows: Vec<(usize, Vec<(usize, f64)>)> = Vec::new();
    let mut labels: Vec<Option<usize>> = Vec::new();
    let mut splits: Vec<Option<Split>> = Vec::new();
    let mut seen_x: Vec<bool> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        let tag = fields[0];
        let arity = |k: usize| -> Result<()> {
            if fields.len() != k + 1 {
                return Err(perr(
                    line,
                    format!("`{tag}` takes {k} fields, got {}", fields.len() - 1),
                ));
            }
            Ok(())
        };
        if tag != "n" && n.is_none() {
            return Err(perr(line, "the `n` line must come first"));
        }
        match tag {
            "n" => {
                arity(1)?;
                if n.is_some() {
                    return Err(perr(line, "duplicate `n` line"));
                }
                let count: usize = num(line, fields[1], "node count")?;
                n = Some(count);
                labels = vec![None; count];
                splits = vec![None; count];
                seen_x = vec![false; count];
            }
            "d" => {
                arity(1)?;
                if width.is_some() {
                    return Err(perr(line, "duplicate `d` line"));
                }
                width = Some(num(line, fields[1], "feature width")?);
            }
            "e" => {
                arity(3)?;
                let count = n.unwrap_or(0);
                let i = node(line, fields[1], count)?;
                let j = node(line, fields[2], count)?;
                if i >= j {
                    return Err(perr(line, format!("edge ({i}, {j}) must satisfy i < j")));
                }
                let w: f64 = num(line, fields[3], "weight")?;
                if !w.is_finite() || w < 0.0 {
                    return Err(perr(line, format!("weight {w} must be finite and >= 0")));
                }
                edges.push((i, j, w));
            }
            "x" => {
                if fields.len() < 2 {
                    return Err(perr(line, "`x` needs a node index"));
                }
                let Some(d) = width else {
                    return Err(perr(line, "`x` line before `d`"));
                };
                let v = node(line, fields[1], n.unwrap_or(0))?;
                if std::mem::replace(&mut seen_x[v], true) {
                    return Err(perr(line, format!("duplicate features for node {v}")));
                }
                let mut row = Vec::with_capacity(fields.len() - 2);
                for f in &fields[2..] {
                    let (c, val) = f
                        .split_once(':')
                        .ok_or_else(|| perr(line, format!("expected <col>:<value>, got `{f}`")))?;
                    let c: usize = num(line, c, "feature column")?;
                    if c >= d {
                        return Err(perr(
                            line,
                            format!("feature column {c} out of range for width {d}"),
                        ));
                    }
                    let val: f64 = num(line, val, "feature value")?;
                    if !val.is_finite() {
                        return Err(perr(line, "non-finite feature value"));
                    }
                    row.push((c, val));
                }
                feature_rows.push((v, row));
            }
            "y" => {
                arity(2)?;
                let v = node(line, fields[1], n.unwrap_or(0))?;
                let class: usize = num(line, fields[2], "class")?;
                if labels[v].replace(class).is_some() {
                    return Err(perr(line, format!("duplicate label for node {v}")));
                }
            }
            "m" => {
                arity(2)?;
                let v = node(line, fields[1], n.unwrap_or(0))?;
                let split: Split = fields[2]
                    .parse()
                    .map_err(|_| perr(line, format!("unknown split `{}`", fields[2])))?;
                if let Some(prev) = splits[v].replace(split) {
                    return Err(Error::Data(format!(
                        "line {line}: node {v} assigned to both {prev} and {split}; masks must be disjoint"
                    )));
                }
            }
            other => return Err(perr(line, format!("unknown line tag `{other}`"))),
        }
    }

    let n = n.ok_or_else(|| perr(0, "missing `n` line"))?;
    let adjacency = SparseAdjacency::from_edges(n, &edges)?;
    let features = width.map(|d| {
        let mut t = Tensor::zeros(n, d);
        for (v, row) in &feature_rows {
            for &(c, val) in row {
                t[(*v, c)] = val;
            }
        }
        t
    });
    let mut g = Graph::new(adjacency, features)?;
    g.labels = labels;
    g.splits = splits;
    Ok(g)
}

pub fn read_graph(path: impl AsRef<Path>) -> Result<Graph> {
    parse_graph(&fs::read_to_string(path)?)
}

pub fn write_graph_string(g: &Graph) -> String {
    let mut out = String::new();
    writeln!(out, "n {}", g.n()).unwrap();
    if let Some(f) = &g.features {
        writeln!(out, "d {}", f.cols()).unwrap();
    }
    for (i, j, w) in g.adjacency.upper_edges() {
        writeln!(out, "e {i} {j} {w}").unwrap();
    }
    if let Some(f) = &g.features {
        for v in 0..f.rows() {
            let entries: Vec<String> = f
                .row(v)
                .iter()
                .enumerate()
                .filter(|(_, &x)| x != 0.0)
                .map(|(c, x)| format!("{c}:{x}"))
                .collect();
            if !entries.is_empty() {
                writeln!(out, "x {v} {}", entries.join(" ")).unwrap();
            }
        }
    }
    for (v, y) in g.labels.iter().enumerate() {
        if let Some(y) = y {
            writeln!(out, "y {v} {y}").unwrap();
        }
    }
    for (v, s) in g.splits.iter().enumerate() {
        if let Some(s) = s {
            writeln!(out, "m {v} {s}").unwrap();
        }
    }
    out
}

pub fn write_graph(path: impl AsRef<Path>, g: &Graph) -> Result<()> {
    fs::write(path, write_graph_string(g))?;
    Ok(())
}
