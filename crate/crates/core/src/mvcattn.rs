//! Multi-vote cross-attention.
//!
//! Nodes are first pooled into `M` supernodes (one projected vote per
//! supernode), the supernodes attend over all nodes (forward phase), and
//! each node then attends over the supernodes (backward phase). Both
//! attention maps are `n × M` or `M × n`, so the cost is `O(n·M·d)` and no
//! `n × n` buffer exists anywhere on the forward path. The implied dynamic
//! adjacency `a_b · a_f` can be formed explicitly for small graphs with
//! [`effective_dynamic_adjacency`].

use std::fmt::Write as _;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::DENSE_GUARD;
use crate::param::{glorot_uniform, ParamId, ParamSet};
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Parameter handles of one MVCAttn block.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MvcAttnWeights {
    /// One `d_k × d_k` projection per supernode.
    pub votes: Vec<ParamId>,
    pub fk: ParamId,
    pub fq: ParamId,
    pub fv: ParamId,
    pub bq: ParamId,
    pub bk: ParamId,
    pub bv: ParamId,
    pub norm_gain: ParamId,
    pub norm_bias: ParamId,
}

/// Widths of an MVCAttn block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MvcAttnDims {
    pub hidden: usize,
    pub forward_key: usize,
    pub backward_key: usize,
    pub supernodes: usize,
}

impl MvcAttnWeights {
    /// Registers Glorot-initialised weights under `prefix`.
    pub fn init<R: Rng + ?Sized>(
        params: &mut ParamSet,
        prefix: &str,
        dims: MvcAttnDims,
        rng: &mut R,
    ) -> Result<Self> {
        if dims.supernodes == 0 {
            return Err(Error::Config("supernode count must be >= 1".into()));
        }
        let MvcAttnDims {
            hidden: d,
            forward_key: dc,
            backward_key: da,
            supernodes: m,
        } = dims;
        let mut votes = Vec::with_capacity(m);
        for i in 0..m {
            votes.push(params.add(format!("{prefix}.vote{i}"), glorot_uniform(d, d, rng))?);
        }
        Ok(MvcAttnWeights {
            votes,
            fk: params.add(format!("{prefix}.fk"), glorot_uniform(d, dc, rng))?,
            fq: params.add(format!("{prefix}.fq"), glorot_uniform(dc, d, rng))?,
            fv: params.add(format!("{prefix}.fv"), glorot_uniform(d, d, rng))?,
            bq: params.add(format!("{prefix}.bq"), glorot_uniform(d, da, rng))?,
            bk: params.add(format!("{prefix}.bk"), glorot_uniform(da, d, rng))?,
            bv: params.add(format!("{prefix}.bv"), glorot_uniform(d, d, rng))?,
            norm_gain: params.add(format!("{prefix}.norm.gain"), Tensor::ones(1, d))?,
            norm_bias: params.add(format!("{prefix}.norm.bias"), Tensor::zeros(1, d))?,
        })
    }

    pub fn supernodes(&self) -> usize {
        self.votes.len()
    }

    pub fn ids(&self) -> Vec<ParamId> {
        let mut ids = self.votes.clone();
        ids.extend([
            self.fk,
            self.fq,
            self.fv,
            self.bq,
            self.bk,
            self.bv,
            self.norm_gain,
            self.norm_bias,
        ]);
        ids
    }

    pub fn bind(&self, tape: &mut Tape, params: &ParamSet) -> MvcAttnVars {
        MvcAttnVars {
            votes: self
                .votes
                .iter()
                .map(|&id| tape.param(params, id))
                .collect(),
            fk: tape.param(params, self.fk),
            fq: tape.param(params, self.fq),
            fv: tape.param(params, self.fv),
            bq: tape.param(params, self.bq),
            bk: tape.param(params, self.bk),
            bv: tape.param(params, self.bv),
            norm_gain: tape.param(params, self.norm_gain),
            norm_bias: tape.param(params, self.norm_bias),
        }
    }
}

/// MVCAttn weights bound to a tape.
#[derive(Debug, Clone)]
pub struct MvcAttnVars {
    pub votes: Vec<Var>,
    pub fk: Var,
    pub fq: Var,
    pub fv: Var,
    pub bq: Var,
    pub bk: Var,
    pub bv: Var,
    pub norm_gain: Var,
    pub norm_bias: Var,
}

/// Forward (`M × n`) and backward (`n × M`) attention maps of one order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionTrace {
    pub order: usize,
    #[serde(with = "rows")]
    pub a_f: Tensor,
    #[serde(with = "rows")]
    pub a_b: Tensor,
}

mod rows {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    use crate::tensor::Tensor;

    pub fn serialize<S: Serializer>(t: &Tensor, s: S) -> Result<S::Ok, S::Error> {
        t.to_rows().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Tensor, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        if rows.iter().any(|r| r.len() != rows[0].len()) {
            return Err(serde::de::Error::custom("ragged matrix"));
        }
        Ok(Tensor::from_rows(&rows))
    }
}

impl AttentionTrace {
    pub fn nodes(&self) -> usize {
        self.a_b.rows()
    }

    /// Largest deviation of any row sum of `a_f` or `a_b` from one.
    pub fn max_row_sum_error(&self) -> f64 {
        self.a_f
            .row_sums()
            .into_iter()
            .chain(self.a_b.row_sums())
            .map(|s| (s - 1.0).abs())
            .fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("finite values serialise")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Corrupt(format!("attention trace: {e}")))
    }
}

/// One matrix as CSV, one row per line, shortest round-trip reals.
pub fn matrix_to_csv(t: &Tensor) -> String {
    let mut out = String::new();
    for i in 0..t.rows() {
        let line: Vec<String> = t.row(i).iter().map(|v| v.to_string()).collect();
        writeln!(out, "{}", line.join(",")).unwrap();
    }
    out
}

/// Pools node embeddings into `M` supernodes: `s_m = norm(Σ_v z_v W_m)`.
pub fn mv_proj(tape: &mut Tape, z: Var, w: &MvcAttnVars) -> Result<Var> {
    let (_, d) = tape.shape(z);
    let (vr, _) = tape.shape(w.votes[0]);
    if vr != d {
        return Err(Error::dim("mv_proj", tape.shape(z), tape.shape(w.votes[0])));
    }
    let pooled = tape.sum_rows(z);
    let mut rows = Vec::with_capacity(w.votes.len());
    for &vote in &w.votes {
        rows.push(tape.matmul(pooled, vote)?);
    }
    let stacked = tape.vstack(&rows)?;
    tape.layer_norm_rows(stacked, w.norm_gain, w.norm_bias, LAYER_NORM_EPS)
}

/// Supernodes attend over nodes. Returns `(Ŝ, a_f)` with `a_f` of shape
/// `M × n`, softmax over the node axis.
pub fn forward_cross_attention(
    tape: &mut Tape,
    z: Var,
    s: Var,
    w: &MvcAttnVars,
) -> Result<(Var, Var)> {
    let d = tape.shape(z).1;
    let zk = tape.matmul(z, w.fk)?;
    let keys = tape.matmul(zk, w.fq)?;
    let st = tape.transpose(s);
    let scores_nm = tape.matmul(keys, st)?;
    let scores = tape.transpose(scores_nm);
    let a_f = tape.softmax_rows(scores, (d as f64).sqrt())?;
    let values = tape.matmul(z, w.fv)?;
    let s_hat = tape.matmul(a_f, values)?;
    Ok((s_hat, a_f))
}

/// Nodes attend over supernodes. Returns `(Z', a_b)` with `a_b` of shape
/// `n × M`, softmax over the supernode axis.
pub fn backward_cross_attention(
    tape: &mut Tape,
    s_hat: Var,
    z: Var,
    w: &MvcAttnVars,
) -> Result<(Var, Var)> {
    let d = tape.shape(z).1;
    let sq = tape.matmul(s_hat, w.bq)?;
    let queries = tape.matmul(sq, w.bk)?;
    let qt = tape.transpose(queries);
    let scores = tape.matmul(z, qt)?;
    let a_b = tape.softmax_rows(scores, (d as f64).sqrt())?;
    let values = tape.matmul(s_hat, w.bv)?;
    let out = tape.matmul(a_b, values)?;
    Ok((out, a_b))
}

/// Tape handles of one MVCAttn pass.
#[derive(Debug, Clone, Copy)]
pub struct MvcAttnOutput {
    pub output: Var,
    pub supernodes: Var,
    pub s_hat: Var,
    pub a_f: Var,
    pub a_b: Var,
}

impl MvcAttnOutput {
    pub fn trace(&self, tape: &Tape, order: usize) -> AttentionTrace {
        AttentionTrace {
            order,
            a_f: tape.value(self.a_f).clone(),
            a_b: tape.value(self.a_b).clone(),
        }
    }
}

/// `mv_proj → forward_cross_attention → backward_cross_attention`.
pub fn mvc_attention(tape: &mut Tape, z: Var, w: &MvcAttnVars) -> Result<MvcAttnOutput> {
    if tape.shape(z).0 == 0 {
        return Err(Error::Usage("mvc_attention needs at least one node".into()));
    }
    let supernodes = mv_proj(tape, z, w)?;
    let (s_hat, a_f) = forward_cross_attention(tape, z, supernodes, w)?;
    let (output, a_b) = backward_cross_attention(tape, s_hat, z, w)?;
    Ok(MvcAttnOutput {
        output,
        supernodes,
        s_hat,
        a_f,
        a_b,
    })
}

/// Dense `a_b · a_f`; diagnostic only.
pub fn effective_dynamic_adjacency(trace: &AttentionTrace) -> Result<Tensor> {
    let n = trace.nodes();
    if n > DENSE_GUARD {
        return Err(Error::Capability(format!(
            "dense dynamic adjacency for {n} nodes exceeds the {DENSE_GUARD}-node guard"
        )));
    }
    trace.a_b.matmul(&trace.a_f)
}

/// Row `node` of `a_b · a_f` in `O(n·M)`.
pub fn dynamic_adjacency_row(trace: &AttentionTrace, node: usize) -> Result<Tensor> {
    if node >= trace.nodes() {
        return Err(Error::Usage(format!("node {node} out of range")));
    }
    trace.a_b.select_rows(&[node]).matmul(&trace.a_f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup(d: usize, m: usize, seed: u64) -> (ParamSet, MvcAttnWeights) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut ps = ParamSet::new();
        let dims = MvcAttnDims {
            hidden: d,
            forward_key: d,
            backward_key: d,
            supernodes: m,
        };
        let w = MvcAttnWeights::init(&mut ps, "mvc", dims, &mut rng).unwrap();
        (ps, w)
    }

    #[test]
    fn zero_input_projects_to_bias() {
        let (mut ps, w) = setup(3, 2, 1);
        ps.get_mut(w.norm_bias).value = Tensor::from_rows(&[[0.1, -0.2, 0.3]]);
        let mut tape = Tape::new();
        let vars = w.bind(&mut tape, &ps);
        let z = tape.constant(Tensor::zeros(4, 3));
        let s = mv_proj(&mut tape, z, &vars).unwrap();
        for i in 0..2 {
            assert_eq!(tape.value(s).row(i), &[0.1, -0.2, 0.3]);
        }
    }

    #[test]
    fn single_supernode_broadcasts() {
        let (ps, w) = setup(3, 1, 2);
        let mut tape = Tape::new();
        let vars = w.bind(&mut tape, &ps);
        let z = tape.constant(Tensor::from_fn(5, 3, |i, j| (i as f64 - j as f64) * 0.4));
        let out = mvc_attention(&mut tape, z, &vars).unwrap();
        let a_b = tape.value(out.a_b);
        assert!(a_b.as_slice().iter().all(|&v| v == 1.0));
        let o = tape.value(out.output);
        for i in 1..5 {
            assert_eq!(o.row(i), o.row(0));
        }
    }

    #[test]
    fn single_node_attention_is_trivial() {
        let (ps, w) = setup(4, 3, 3);
        let mut tape = Tape::new();
        let vars = w.bind(&mut tape, &ps);
        let z = tape.constant(Tensor::from_rows(&[[0.5, -1.0, 2.0, 0.0]]));
        let out = mvc_attention(&mut tape, z, &vars).unwrap();
        assert_eq!(tape.shape(out.output), (1, 4));
        assert!(tape.value(out.a_f).as_slice().iter().all(|&v| v == 1.0));
        let expected = tape.value(z).matmul(ps.value(w.fv)).unwrap();
        for m in 0..3 {
            assert_eq!(tape.value(out.s_hat).row(m), expected.row(0));
        }
    }

    #[test]
    fn uniform_trace_gives_uniform_adjacency() {
        let trace = AttentionTrace {
            order: 1,
            a_f: Tensor::filled(2, 4, 0.25),
            a_b: Tensor::filled(4, 2, 0.5),
        };
        let ad = effective_dynamic_adjacency(&trace).unwrap();
        assert!(ad.as_slice().iter().all(|&v| (v - 0.25).abs() < 1e-15));
        let row = dynamic_adjacency_row(&trace, 2).unwrap();
        assert_eq!(row.row(0), ad.row(2));
    }

    #[test]
    fn trace_json_round_trip() {
        let trace = AttentionTrace {
            order: 2,
            a_f: Tensor::from_rows(&[[0.1, 0.9]]),
            a_b: Tensor::from_rows(&[[1.0], [1.0]]),
        };
        let json = trace.to_json();
        assert!(json.starts_with("{\"order\":2,\"a_f\":[[0.1,0.9]]"));
        assert_eq!(AttentionTrace::from_json(&json).unwrap(), trace);
        assert!(AttentionTrace::from_json("{").is_err());
        assert_eq!(matrix_to_csv(&trace.a_f), "0.1,0.9\n");
    }

    #[test]
    fn rejects_zero_supernodes() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut ps = ParamSet::new();
        let dims = MvcAttnDims {
            hidden: 2,
            forward_key: 2,
            backward_key: 2,
            supernodes: 0,
        };
        assert!(MvcAttnWeights::init(&mut ps, "x", dims, &mut rng).is_err());
    }
}
