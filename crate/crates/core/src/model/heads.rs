//! Classifier heads.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::param::{glorot_uniform, ParamId, ParamSet};
use crate::tape::{Activation, Tape, Var};
use crate::tensor::Tensor;

/// Affine map `x W + b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Affine {
    pub weight: ParamId,
    pub bias: ParamId,
}

impl Affine {
    pub fn init<R: Rng + ?Sized>(
        params: &mut ParamSet,
        prefix: &str,
        input: usize,
        output: usize,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(Affine {
            weight: params.add(
                format!("{prefix}.weight"),
                glorot_uniform(input, output, rng),
            )?,
            bias: params.add(format!("{prefix}.bias"), Tensor::zeros(1, output))?,
        })
    }

    pub fn bind(&self, tape: &mut Tape, params: &ParamSet) -> AffineVars {
        AffineVars {
            weight: tape.param(params, self.weight),
            bias: tape.param(params, self.bias),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AffineVars {
    pub weight: Var,
    pub bias: Var,
}

impl AffineVars {
    pub fn apply(&self, tape: &mut Tape, x: Var) -> Result<Var> {
        let xw = tape.matmul(x, self.weight)?;
        tape.add_row(xw, self.bias)
    }
}

/// Per-node logits from a one-hidden-layer MLP (`d_k → d_k → classes`).
pub fn node_classify(
    tape: &mut Tape,
    h: Var,
    hidden: &AffineVars,
    output: &AffineVars,
    activation: Activation,
) -> Result<Var> {
    let z = hidden.apply(tape, h)?;
    let z = tape.activation(z, activation);
    output.apply(tape, z)
}

/// Gated readout: `g_v = sigmoid(f1(h_v)) ⊙ tanh(f2(h_v))`, graph vector
/// `mean_v g_v + max_v g_v`.
pub fn graph_readout(tape: &mut Tape, h: Var, f1: &AffineVars, f2: &AffineVars) -> Result<Var> {
    let gate = f1.apply(tape, h)?;
    let gate = tape.activation(gate, Activation::Sigmoid);
    let content = f2.apply(tape, h)?;
    let content = tape.activation(content, Activation::Tanh);
    let gated = tape.mul(gate, content)?;
    let mean = tape.mean_rows(gated);
    let max = tape.max_rows(gated)?;
    tape.add(mean, max)
}

/// Graph logits, `h_g W + b`.
pub fn graph_classify(tape: &mut Tape, hg: Var, output: &AffineVars) -> Result<Var> {
    output.apply(tape, hg)
}
