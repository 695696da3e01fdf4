//! Define-by-run reverse-mode differentiation.
//!
//! A [`Tape`] records every operation of one forward pass as a node holding
//! its output value. [`Tape::backward`] walks the nodes once in reverse order
//! and accumulates adjoints; because a node can only reference nodes created
//! before it, insertion order is already a topological order.
//!
//! ```
//! use hdgcn::{ParamSet, Tape, Tensor};
//!
//! let mut params = ParamSet::new();
//! let w = params.add("w", Tensor::from_rows(&[[1.0, 2.0], [3.0, 4.0]])).unwrap();
//! let mut tape = Tape::new();
//! let wv = tape.param(&params, w);
//! let loss = tape.sum(wv);
//! tape.backward_into(loss, &mut params).unwrap();
//! assert_eq!(params.get(w).grad.as_ref().unwrap(), &Tensor::ones(2, 2));
//! ```

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::SparseAdjacency;
use crate::param::{ParamId, ParamSet};
use crate::tensor::{matmul_nt_into, matmul_tn_into, Tensor};

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Elementwise nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
    Tanh,
    Identity,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Sigmoid => sigmoid(x),
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Local derivative expressed through input `x` and output `y`.
    fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "relu" => Ok(Activation::Relu),
            "sigmoid" => Ok(Activation::Sigmoid),
            "tanh" => Ok(Activation::Tanh),
            "identity" | "linear" => Ok(Activation::Identity),
            other => Err(Error::Config(format!("unknown activation `{other}`"))),
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Activation::Relu => "relu",
            Activation::Sigmoid => "sigmoid",
            Activation::Tanh => "tanh",
            Activation::Identity => "identity",
        };
        f.write_str(s)
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

enum Op {
    Leaf,
    Param(ParamId),
    MatMul(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Mul(Var, Var),
    MulConst(Var, Tensor),
    Scale(Var, f64),
    Spmm(Arc<SparseAdjacency>, Var),
    SoftmaxRows(Var, f64),
    LayerNorm {
        x: Var,
        gain: Var,
        bias: Var,
        xhat: Tensor,
        inv_std: Vec<f64>,
    },
    Activation(Var, Activation),
    SumRows(Var),
    MeanRows(Var),
    MaxRows(Var, Vec<usize>),
    VStack(Vec<Var>),
    SelectRows(Var, Vec<usize>),
    CrossEntropy(Var, Vec<usize>, Tensor),
    Sum(Var),
}

struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Operation record for one forward pass.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Adjoints produced by [`Tape::backward`], indexed by node.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    /// Gradient of the loss with respect to `v`; `None` when `v` does not
    /// influence the loss or does not require gradients.
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> (usize, usize) {
        self.nodes[v.0].value.shape()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        debug_assert!(value.is_finite(), "non-finite value produced");
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Records a constant input (no gradient).
    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    /// Records a differentiable free input.
    pub fn variable(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Binds a parameter's current value as a differentiable leaf.
    pub fn param(&mut self, params: &ParamSet, id: ParamId) -> Var {
        self.push(params.value(id).clone(), Op::Param(id), true)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).matmul(self.value(b))?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::MatMul(a, b), rg))
    }

    pub fn transpose(&mut self, a: Var) -> Var {
        let out = self.value(a).transpose();
        let rg = self.rg(a);
        self.push(out, Op::Transpose(a), rg)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let out = self.value(a).add(self.value(b))?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::Add(a, b), rg))
    }

    /// Adds a `1 × c` row to every row of `x`.
    pub fn add_row(&mut self, x: Var, row: Var) -> Result<Var> {
        let (xv, rv) = (self.value(x), self.value(row));
        if rv.rows() != 1 || rv.cols() != xv.cols() {
            return Err(Error::dim("add_row", xv.shape(), rv.shape()));
        }
        let mut out = xv.clone();
        let r = rv.as_slice().to_vec();
        for i in 0..out.rows() {
            for (o, b) in out.row_mut(i).iter_mut().zip(&r) {
                *o += b;
            }
        }
        let rg = self.rg(x) || self.rg(row);
        Ok(self.push(out, Op::AddRow(x, row), rg))
    }

    /// Elementwise (Hadamard) product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        if av.shape() != bv.shape() {
            return Err(Error::dim("mul", av.shape(), bv.shape()));
        }
        let data = av
            .as_slice()
            .iter()
            .zip(bv.as_slice())
            .map(|(x, y)| x * y)
            .collect();
        let out = Tensor::from_vec(av.rows(), av.cols(), data)?;
        let rg = self.rg(a) || self.rg(b);
        Ok(self.push(out, Op::Mul(a, b), rg))
    }

    /// Elementwise product with a constant tensor (dropout masks).
    pub fn mul_const(&mut self, a: Var, mask: Tensor) -> Result<Var> {
        let av = self.value(a);
        if av.shape() != mask.shape() {
            return Err(Error::dim("mul_const", av.shape(), mask.shape()));
        }
        let data = av
            .as_slice()
            .iter()
            .zip(mask.as_slice())
            .map(|(x, y)| x * y)
            .collect();
        let out = Tensor::from_vec(av.rows(), av.cols(), data)?;
        let rg = self.rg(a);
        Ok(self.push(out, Op::MulConst(a, mask), rg))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let out = self.value(a).scale(s);
        let rg = self.rg(a);
        self.push(out, Op::Scale(a, s), rg)
    }

    /// Sparse-dense product `adj · x`; `adj` is treated as a constant.
    pub fn spmm(&mut self, adj: &Arc<SparseAdjacency>, x: Var) -> Result<Var> {
        let out = adj.spmm(self.value(x))?;
        let rg = self.rg(x);
        Ok(self.push(out, Op::Spmm(Arc::clone(adj), x), rg))
    }

    /// Row-wise softmax of `x / scale`, stabilised by per-row max subtraction.
    pub fn softmax_rows(&mut self, x: Var, scale: f64) -> Result<Var> {
        if scale.is_nan() || scale <= 0.0 {
            return Err(Error::Usage(format!(
                "softmax scale must be > 0, got {scale}"
            )));
        }
        let out = softmax_rows(self.value(x), scale);
        let rg = self.rg(x);
        Ok(self.push(out, Op::SoftmaxRows(x, scale), rg))
    }

    /// Per-row standardisation followed by `gain ⊙ x̂ + bias`.
    pub fn layer_norm_rows(&mut self, x: Var, gain: Var, bias: Var, eps: f64) -> Result<Var> {
        let xv = self.value(x);
        let (gv, bv) = (self.value(gain), self.value(bias));
        let c = xv.cols();
        for t in [gv, bv] {
            if t.shape() != (1, c) {
                return Err(Error::dim("layer_norm_rows", xv.shape(), t.shape()));
            }
        }
        if eps.is_nan() || eps <= 0.0 {
            return Err(Error::Usage(format!(
                "layer norm eps must be > 0, got {eps}"
            )));
        }
        let mut xhat = Tensor::zeros(xv.rows(), c);
        let mut out = Tensor::zeros(xv.rows(), c);
        let mut inv_std = Vec::with_capacity(xv.rows());
        for i in 0..xv.rows() {
            let row = xv.row(i);
            let mean = row.iter().sum::<f64>() / c as f64;
            let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / c as f64;
            let is = 1.0 / (var + eps).sqrt();
            inv_std.push(is);
            for j in 0..c {
                let h = (row[j] - mean) * is;
                xhat[(i, j)] = h;
                out[(i, j)] = gv.as_slice()[j] * h + bv.as_slice()[j];
            }
        }
        let rg = self.rg(x) || self.rg(gain) || self.rg(bias);
        Ok(self.push(
            out,
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                inv_std,
            },
            rg,
        ))
    }

    pub fn activation(&mut self, x: Var, kind: Activation) -> Var {
        if kind == Activation::Identity {
            return x;
        }
        let out = self.value(x).map(|v| kind.apply(v));
        let rg = self.rg(x);
        self.push(out, Op::Activation(x, kind), rg)
    }

    /// Column sums: `r × c → 1 × c`.
    pub fn sum_rows(&mut self, x: Var) -> Var {
        let out = column_reduce(self.value(x), |acc, v| acc + v, 0.0);
        let rg = self.rg(x);
        self.push(out, Op::SumRows(x), rg)
    }

    /// Column means: `r × c → 1 × c`.
    pub fn mean_rows(&mut self, x: Var) -> Var {
        let xv = self.value(x);
        let n = xv.rows().max(1) as f64;
        let out = column_reduce(xv, |acc, v| acc + v, 0.0).scale(1.0 / n);
        let rg = self.rg(x);
        self.push(out, Op::MeanRows(x), rg)
    }

    /// Column maxima: `r × c → 1 × c`. Ties route the gradient to the first row.
    pub fn max_rows(&mut self, x: Var) -> Result<Var> {
        let xv = self.value(x);
        if xv.rows() == 0 {
            return Err(Error::Usage("max_rows over zero rows".into()));
        }
        let c = xv.cols();
        let mut arg = vec![0usize; c];
        let mut out = Tensor::from_vec(1, c, xv.row(0).to_vec())?;
        for i in 1..xv.rows() {
            for (j, &v) in xv.row(i).iter().enumerate() {
                if v > out[(0, j)] {
                    out[(0, j)] = v;
                    arg[j] = i;
                }
            }
        }
        let rg = self.rg(x);
        Ok(self.push(out, Op::MaxRows(x, arg), rg))
    }

    /// Stacks tensors of equal width vertically.
    pub fn vstack(&mut self, parts: &[Var]) -> Result<Var> {
        let first = parts
            .first()
            .ok_or_else(|| Error::Usage("vstack of nothing".into()))?;
        let c = self.value(*first).cols();
        let mut data = Vec::new();
        let mut rows = 0;
        for &p in parts {
            let pv = self.value(p);
            if pv.cols() != c {
                return Err(Error::dim("vstack", (rows, c), pv.shape()));
            }
            rows += pv.rows();
            data.extend_from_slice(pv.as_slice());
        }
        let out = Tensor::from_vec(rows, c, data)?;
        let rg = parts.iter().any(|&p| self.rg(p));
        Ok(self.push(out, Op::VStack(parts.to_vec()), rg))
    }

    pub fn select_rows(&mut self, x: Var, idx: &[usize]) -> Result<Var> {
        let xv = self.value(x);
        if let Some(&bad) = idx.iter().find(|&&i| i >= xv.rows()) {
            return Err(Error::Data(format!(
                "row index {bad} out of range for {} rows",
                xv.rows()
            )));
        }
        let out = xv.select_rows(idx);
        let rg = self.rg(x);
        Ok(self.push(out, Op::SelectRows(x, idx.to_vec()), rg))
    }

    /// Mean negative log-likelihood of `labels` under row-wise softmax of `logits`.
    pub fn cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let lv = self.value(logits);
        if labels.len() != lv.rows() {
            return Err(Error::dim("cross_entropy", lv.shape(), (labels.len(), 1)));
        }
        if lv.rows() == 0 {
            return Err(Error::Data("cross entropy over zero rows".into()));
        }
        for (i, &y) in labels.iter().enumerate() {
            if y >= lv.cols() {
                return Err(Error::Data(format!(
                    "label {y} at row {i} out of range for {} classes",
                    lv.cols()
                )));
            }
        }
        let probs = softmax_rows(lv, 1.0);
        let mut loss = 0.0;
        for (i, &y) in labels.iter().enumerate() {
            let row = lv.row(i);
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            loss += lse - row[y];
        }
        loss /= labels.len() as f64;
        let rg = self.rg(logits);
        Ok(self.push(
            Tensor::filled(1, 1, loss.max(0.0)),
            Op::CrossEntropy(logits, labels.to_vec(), probs),
            rg,
        ))
    }

    /// Sum of all entries as a `1 × 1` tensor.
    pub fn sum(&mut self, x: Var) -> Var {
        let out = Tensor::filled(1, 1, self.value(x).sum());
        let rg = self.rg(x);
        self.push(out, Op::Sum(x), rg)
    }

    /// Reverse sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        if self.shape(loss) != (1, 1) {
            return Err(Error::Usage(format!(
                "backward needs a scalar loss, got shape {:?}",
                self.shape(loss)
            )));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[loss.0] = Some(Tensor::ones(1, 1));
        for idx in (0..=loss.0).rev() {
            let Some(g) = grads[idx].take() else {
                continue;
            };
            let node = &self.nodes[idx];
            if node.requires_grad {
                self.propagate(node, &g, &mut grads);
            }
            grads[idx] = Some(g);
        }
        for (g, node) in grads.iter_mut().zip(&self.nodes) {
            if !node.requires_grad {
                *g = None;
            }
        }
        Ok(Gradients { grads })
    }

    /// Runs [`Tape::backward`] and writes parameter gradients into `params`.
    /// Every parameter receives a gradient; unreachable ones get zeros.
    pub fn backward_into(&self, loss: Var, params: &mut ParamSet) -> Result<Gradients> {
        let grads = self.backward(loss)?;
        params.zero_grads();
        for (i, node) in self.nodes.iter().enumerate() {
            if let (Op::Param(id), Some(g)) = (&node.op, &grads.grads[i]) {
                params
                    .get_mut(*id)
                    .grad
                    .as_mut()
                    .expect("zeroed above")
                    .add_assign(g);
            }
        }
        Ok(grads)
    }

    fn propagate(&self, node: &Node, g: &Tensor, grads: &mut [Option<Tensor>]) {
        let val = |v: Var| &self.nodes[v.0].value;
        let wants = |v: Var| self.nodes[v.0].requires_grad;
        match &node.op {
            Op::Leaf | Op::Param(_) => {}
            Op::MatMul(a, b) => {
                if wants(*a) {
                    let (r, c) = val(*a).shape();
                    let mut ga = Tensor::zeros(r, c);
                    matmul_nt_into(g, val(*b), &mut ga);
                    accumulate(grads, *a, ga);
                }
                if wants(*b) {
                    let (r, c) = val(*b).shape();
                    let mut gb = Tensor::zeros(r, c);
                    matmul_tn_into(val(*a), g, &mut gb);
                    accumulate(grads, *b, gb);
                }
            }
            Op::Transpose(a) => accumulate(grads, *a, g.transpose()),
            Op::Add(a, b) => {
                if wants(*a) {
                    accumulate(grads, *a, g.clone());
                }
                if wants(*b) {
                    accumulate(grads, *b, g.clone());
                }
            }
            Op::AddRow(x, row) => {
                if wants(*x) {
                    accumulate(grads, *x, g.clone());
                }
                if wants(*row) {
                    accumulate(grads, *row, column_reduce(g, |a, v| a + v, 0.0));
                }
            }
            Op::Mul(a, b) => {
                if wants(*a) {
                    accumulate(grads, *a, hadamard(g, val(*b)));
                }
                if wants(*b) {
                    accumulate(grads, *b, hadamard(g, val(*a)));
                }
            }
            Op::MulConst(a, mask) => accumulate(grads, *a, hadamard(g, mask)),
            Op::Scale(a, s) => accumulate(grads, *a, g.scale(*s)),
            Op::Spmm(adj, x) => accumulate(grads, *x, adj.spmm_transpose(g)),
            Op::SoftmaxRows(x, scale) => {
                let y = &node.value;
                let mut gx = Tensor::zeros(y.rows(), y.cols());
                for i in 0..y.rows() {
                    let (yr, gr) = (y.row(i), g.row(i));
                    let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                    for (j, o) in gx.row_mut(i).iter_mut().enumerate() {
                        *o = yr[j] * (gr[j] - dot) / scale;
                    }
                }
                accumulate(grads, *x, gx);
            }
            Op::LayerNorm {
                x,
                gain,
                bias,
                xhat,
                inv_std,
            } => {
                let gv = val(*gain);
                let c = xhat.cols();
                if wants(*x) {
                    let mut gx = Tensor::zeros(xhat.rows(), c);
                    for (i, &inv) in inv_std.iter().enumerate() {
                        let gr = g.row(i);
                        let hr = xhat.row(i);
                        let dh: Vec<f64> = (0..c).map(|j| gr[j] * gv.as_slice()[j]).collect();
                        let mean_dh = dh.iter().sum::<f64>() / c as f64;
                        let mean_dh_h =
                            dh.iter().zip(hr).map(|(a, b)| a * b).sum::<f64>() / c as f64;
                        for (j, o) in gx.row_mut(i).iter_mut().enumerate() {
                            *o = inv * (dh[j] - mean_dh - hr[j] * mean_dh_h);
                        }
                    }
                    accumulate(grads, *x, gx);
                }
                if wants(*gain) {
                    accumulate(
                        grads,
                        *gain,
                        column_reduce(&hadamard(g, xhat), |a, v| a + v, 0.0),
                    );
                }
                if wants(*bias) {
                    accumulate(grads, *bias, column_reduce(g, |a, v| a + v, 0.0));
                }
            }
            Op::Activation(x, kind) => {
                let xv = val(*x);
                let data = xv
                    .as_slice()
                    .iter()
                    .zip(node.value.as_slice())
                    .zip(g.as_slice())
                    .map(|((&xi, &yi), &gi)| gi * kind.derivative(xi, yi))
                    .collect();
                let gx = Tensor::from_vec(xv.rows(), xv.cols(), data).expect("same shape");
                accumulate(grads, *x, gx);
            }
            Op::SumRows(x) | Op::MeanRows(x) => {
                let (r, c) = val(*x).shape();
                let s = if matches!(node.op, Op::MeanRows(_)) {
                    1.0 / r.max(1) as f64
                } else {
                    1.0
                };
                let gx = Tensor::from_fn(r, c, |_, j| g[(0, j)] * s);
                accumulate(grads, *x, gx);
            }
            Op::MaxRows(x, arg) => {
                let (r, c) = val(*x).shape();
                let mut gx = Tensor::zeros(r, c);
                for (j, &i) in arg.iter().enumerate() {
                    gx[(i, j)] = g[(0, j)];
                }
                accumulate(grads, *x, gx);
            }
            Op::VStack(parts) => {
                let mut offset = 0;
                for &p in parts {
                    let (r, c) = val(p).shape();
                    if wants(p) {
                        let gp = Tensor::from_fn(r, c, |i, j| g[(offset + i, j)]);
                        accumulate(grads, p, gp);
                    }
                    offset += r;
                }
            }
            Op::SelectRows(x, idx) => {
                let (r, c) = val(*x).shape();
                let mut gx = Tensor::zeros(r, c);
                for (k, &i) in idx.iter().enumerate() {
                    for (o, &v) in gx.row_mut(i).iter_mut().zip(g.row(k)) {
                        *o += v;
                    }
                }
                accumulate(grads, *x, gx);
            }
            Op::CrossEntropy(logits, labels, probs) => {
                let scale = g[(0, 0)] / labels.len() as f64;
                let mut gl = probs.clone();
                for (i, &y) in labels.iter().enumerate() {
                    gl[(i, y)] -= 1.0;
                }
                accumulate(grads, *logits, gl.scale(scale));
            }
            Op::Sum(x) => {
                let (r, c) = val(*x).shape();
                accumulate(grads, *x, Tensor::filled(r, c, g[(0, 0)]));
            }
        }
    }
}

fn accumulate(grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
    match &mut grads[v.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}

fn hadamard(a: &Tensor, b: &Tensor) -> Tensor {
    let data = a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| x * y)
        .collect();
    Tensor::from_vec(a.rows(), a.cols(), data).expect("same shape")
}

fn column_reduce(x: &Tensor, f: impl Fn(f64, f64) -> f64, init: f64) -> Tensor {
    let mut out = vec![init; x.cols()];
    for i in 0..x.rows() {
        for (o, &v) in out.iter_mut().zip(x.row(i)) {
            *o = f(*o, v);
        }
    }
    Tensor::from_vec(1, x.cols(), out).expect("row vector")
}

/// Row-wise softmax of `x / scale` with max subtraction; all-equal rows map
/// to the uniform distribution.
pub fn softmax_rows(x: &Tensor, scale: f64) -> Tensor {
    let mut out = Tensor::zeros(x.rows(), x.cols());
    for i in 0..x.rows() {
        let row = x.row(i);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let orow = out.row_mut(i);
        let mut total = 0.0;
        for (o, &v) in orow.iter_mut().zip(row) {
            *o = ((v - max) / scale).exp();
            total += *o;
        }
        for o in orow.iter_mut() {
            *o /= total;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn rowvec(v: &[f64]) -> Tensor {
        Tensor::from_rows(&[v])
    }

    #[test]
    fn softmax_examples() {
        let s = softmax_rows(&rowvec(&[0.0, 0.0]), 1.0);
        assert_eq!(s.as_slice(), &[0.5, 0.5]);
        let s = softmax_rows(&rowvec(&[3f64.ln(), 0.0]), 1.0);
        assert_abs_diff_eq!(s[(0, 0)], 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(s[(0, 1)], 0.25, epsilon = 1e-15);
        let s = softmax_rows(&rowvec(&[1000.0, 0.0]), 1.0);
        assert_eq!(s[(0, 0)], 1.0);
        // exp(-1000) underflows to 0 in f64; the exact value is ~5e-435.
        assert_eq!(s[(0, 1)], 0.0);
    }

    #[test]
    fn softmax_rejects_bad_scale() {
        let mut t = Tape::new();
        let x = t.constant(Tensor::zeros(1, 2));
        assert!(t.softmax_rows(x, 0.0).is_err());
    }

    #[test]
    fn layer_norm_examples() {
        let mut t = Tape::new();
        let g = t.constant(Tensor::ones(1, 3));
        let b = t.constant(Tensor::zeros(1, 3));
        let x = t.constant(rowvec(&[5.0, 5.0, 5.0]));
        let y = t.layer_norm_rows(x, g, b, 1e-5).unwrap();
        assert_eq!(t.value(y).as_slice(), &[0.0, 0.0, 0.0]);

        let x = t.constant(rowvec(&[1.0, 2.0, 3.0]));
        let y = t.layer_norm_rows(x, g, b, 1e-5).unwrap();
        // var = 2/3, 1/sqrt(2/3 + 1e-5)
        let s = 1.0 / (2.0f64 / 3.0 + 1e-5).sqrt();
        assert_abs_diff_eq!(t.value(y)[(0, 0)], -s, epsilon = 1e-12);
        assert_abs_diff_eq!(t.value(y)[(0, 0)], -1.2247357, epsilon = 1e-6);
        assert_abs_diff_eq!(t.value(y)[(0, 1)], 0.0, epsilon = 1e-15);

        let g2 = t.constant(Tensor::ones(1, 2));
        let b2 = t.constant(Tensor::zeros(1, 2));
        let x = t.constant(rowvec(&[1.0, -1.0]));
        let y = t.layer_norm_rows(x, g2, b2, 1e-300).unwrap();
        assert_abs_diff_eq!(t.value(y)[(0, 0)], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn constant_row_maps_to_bias() {
        let mut t = Tape::new();
        let g = t.constant(rowvec(&[2.0, 3.0]));
        let b = t.constant(rowvec(&[0.25, -4.0]));
        let x = t.constant(rowvec(&[7.0, 7.0]));
        let y = t.layer_norm_rows(x, g, b, 1e-5).unwrap();
        assert_eq!(t.value(y).as_slice(), &[0.25, -4.0]);
    }

    #[test]
    fn activations() {
        let mut t = Tape::new();
        let x = t.constant(rowvec(&[-1.0, 2.0]));
        let y = t.activation(x, Activation::Relu);
        assert_eq!(t.value(y).as_slice(), &[0.0, 2.0]);
        assert_eq!(Activation::Sigmoid.apply(0.0), 0.5);
        assert!("swish".parse::<Activation>().is_err());
        assert_eq!("ReLU".parse::<Activation>().unwrap(), Activation::Relu);
    }

    #[test]
    fn tanh_gradient_at_zero() {
        let mut t = Tape::new();
        let x = t.variable(Tensor::zeros(1, 1));
        let y = t.activation(x, Activation::Tanh);
        let loss = t.sum(y);
        let g = t.backward(loss).unwrap();
        assert_eq!(g.get(x).unwrap()[(0, 0)], 1.0);
        let h: f64 = 1e-5;
        let fd = (h.tanh() - (-h).tanh()) / (2.0 * h);
        assert_abs_diff_eq!(fd, 1.0, epsilon = 1e-8);
    }

    #[test]
    fn cross_entropy_examples() {
        let mut t = Tape::new();
        let l = t.constant(Tensor::zeros(1, 2));
        for y in 0..2 {
            let loss = t.cross_entropy(l, &[y]).unwrap();
            assert_abs_diff_eq!(t.value(loss)[(0, 0)], 2f64.ln(), epsilon = 1e-15);
        }
        let l = t.constant(rowvec(&[1e6, -1e6]));
        let loss = t.cross_entropy(l, &[0]).unwrap();
        assert_abs_diff_eq!(t.value(loss)[(0, 0)], 0.0, epsilon = 1e-12);

        let err = t.cross_entropy(l, &[2]).unwrap_err().to_string();
        assert!(err.contains("row 0"), "{err}");
    }

    #[test]
    fn sum_of_param_has_unit_gradient() {
        let mut ps = ParamSet::new();
        let w = ps
            .add("w", Tensor::from_rows(&[[1.0, -2.0], [0.5, 9.0]]))
            .unwrap();
        let p = ps.add("p", Tensor::ones(2, 2)).unwrap();
        let mut t = Tape::new();
        let wv = t.param(&ps, w);
        let _pv = t.param(&ps, p);
        let loss = t.sum(wv);
        t.backward_into(loss, &mut ps).unwrap();
        assert_eq!(ps.get(w).grad.as_ref().unwrap(), &Tensor::ones(2, 2));
        assert_eq!(ps.get(p).grad.as_ref().unwrap(), &Tensor::zeros(2, 2));
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let mut t = Tape::new();
        let x = t.variable(Tensor::zeros(2, 1));
        assert!(matches!(t.backward(x), Err(Error::Usage(_))));
    }

    #[test]
    fn max_rows_routes_to_argmax() {
        let mut t = Tape::new();
        let x = t.variable(Tensor::from_rows(&[[1.0, 5.0], [3.0, 2.0]]));
        let m = t.max_rows(x).unwrap();
        assert_eq!(t.value(m).as_slice(), &[3.0, 5.0]);
        let loss = t.sum(m);
        let g = t.backward(loss).unwrap();
        assert_eq!(g.get(x).unwrap().as_slice(), &[0.0, 1.0, 1.0, 0.0]);
    }
}
