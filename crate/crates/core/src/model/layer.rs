//! Prime and high-order Chebyshev units and their fusion into one layer.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::SparseAdjacency;
use crate::mvcattn::{
    mvc_attention, MvcAttnDims, MvcAttnOutput, MvcAttnVars, MvcAttnWeights, LAYER_NORM_EPS,
};
use crate::param::{glorot_uniform, ParamId, ParamSet};
use crate::tape::{Activation, Tape, Var};
use crate::tensor::Tensor;

use super::config::{HdgcnConfig, TransitionMode};

/// Weights of one high-order unit. `mvc` is absent in static mode.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderWeights {
    pub mvc: Option<MvcAttnWeights>,
    pub filter: ParamId,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerWeights {
    pub w0: ParamId,
    pub orders: Vec<OrderWeights>,
    pub fusion_gain: ParamId,
    pub fusion_bias: ParamId,
}

impl LayerWeights {
    pub fn init<R: Rng + ?Sized>(
        params: &mut ParamSet,
        prefix: &str,
        cfg: &HdgcnConfig,
        input_dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let d = cfg.hidden;
        let w0 = params.add(format!("{prefix}.w0"), glorot_uniform(input_dim, d, rng))?;
        let mut orders = Vec::with_capacity(cfg.units());
        for k in 1..=cfg.units() {
            let mvc = match cfg.mode {
                TransitionMode::Dynamic => Some(MvcAttnWeights::init(
                    params,
                    &format!("{prefix}.order{k}.mvc"),
                    MvcAttnDims {
                        hidden: d,
                        forward_key: cfg.forward_key_dim,
                        backward_key: cfg.backward_key_dim,
                        supernodes: cfg.supernodes,
                    },
                    rng,
                )?),
                TransitionMode::Static => None,
            };
            let filter = params.add(format!("{prefix}.order{k}.w"), glorot_uniform(d, d, rng))?;
            orders.push(OrderWeights { mvc, filter });
        }
        Ok(LayerWeights {
            w0,
            orders,
            fusion_gain: params.add(format!("{prefix}.fusion.gain"), Tensor::ones(1, d))?,
            fusion_bias: params.add(format!("{prefix}.fusion.bias"), Tensor::zeros(1, d))?,
        })
    }

    pub fn bind(&self, tape: &mut Tape, params: &ParamSet) -> LayerVars {
        LayerVars {
            w0: tape.param(params, self.w0),
            orders: self
                .orders
                .iter()
                .map(|o| OrderVars {
                    mvc: o.mvc.as_ref().map(|m| m.bind(tape, params)),
                    filter: tape.param(params, o.filter),
                })
                .collect(),
            fusion_gain: tape.param(params, self.fusion_gain),
            fusion_bias: tape.param(params, self.fusion_bias),
        }
    }
}

#[derive(Debug, Clone)]
pub struct OrderVars {
    pub mvc: Option<MvcAttnVars>,
    pub filter: Var,
}

#[derive(Debug, Clone)]
pub struct LayerVars {
    pub w0: Var,
    pub orders: Vec<OrderVars>,
    pub fusion_gain: Var,
    pub fusion_bias: Var,
}

/// `σ(Ã X W⁰)`, the first-order graph convolution.
pub fn prime_cheb_forward(
    tape: &mut Tape,
    adj: &Arc<SparseAdjacency>,
    x: Var,
    w0: Var,
    activation: Activation,
) -> Result<Var> {
    let xw = tape.matmul(x, w0)?;
    let propagated = tape.spmm(adj, xw)?;
    Ok(tape.activation(propagated, activation))
}

/// One high-order dynamic unit: `Z = MVCAttn(z_prev)`, then `σ(Ã Z W)`.
pub fn hd_cheb_unit_forward(
    tape: &mut Tape,
    adj: &Arc<SparseAdjacency>,
    z_prev: Var,
    mvc: &MvcAttnVars,
    filter: Var,
    activation: Activation,
) -> Result<(Var, MvcAttnOutput)> {
    let attn = mvc_attention(tape, z_prev, mvc)?;
    let zw = tape.matmul(attn.output, filter)?;
    let propagated = tape.spmm(adj, zw)?;
    Ok((tape.activation(propagated, activation), attn))
}

/// Static ablation unit: `σ(Ã² z_prev W)`.
pub fn static_cheb_forward(
    tape: &mut Tape,
    adj: &Arc<SparseAdjacency>,
    z_prev: Var,
    filter: Var,
    activation: Activation,
) -> Result<Var> {
    let zw = tape.matmul(z_prev, filter)?;
    let once = tape.spmm(adj, zw)?;
    let twice = tape.spmm(adj, once)?;
    Ok(tape.activation(twice, activation))
}

/// Result of one layer on the tape.
#[derive(Debug, Clone)]
pub struct LayerForward {
    pub h: Var,
    pub prime: Var,
    pub units: Vec<Var>,
    pub attention: Vec<MvcAttnOutput>,
}

/// `H = norm(Z⁰ + Σ_k Ẑ^(k))`, each unit consuming the previous unit's output.
pub fn hdgcn_layer_forward(
    tape: &mut Tape,
    adj: &Arc<SparseAdjacency>,
    x: Var,
    w: &LayerVars,
    cfg: &HdgcnConfig,
) -> Result<LayerForward> {
    if !cfg.order.is_multiple_of(2) {
        return Err(Error::Config(format!(
            "order K must be even, got {}",
            cfg.order
        )));
    }
    if w.orders.len() != cfg.units() {
        return Err(Error::Config(format!(
            "layer has {} order blocks but K/2 = {}",
            w.orders.len(),
            cfg.units()
        )));
    }
    let prime = prime_cheb_forward(tape, adj, x, w.w0, cfg.activation)?;
    let mut total = prime;
    let mut prev = prime;
    let mut units = Vec::with_capacity(w.orders.len());
    let mut attention = Vec::new();
    for order in &w.orders {
        let out = match (&order.mvc, cfg.mode) {
            (Some(mvc), TransitionMode::Dynamic) => {
                let (out, attn) =
                    hd_cheb_unit_forward(tape, adj, prev, mvc, order.filter, cfg.activation)?;
                attention.push(attn);
                out
            }
            (None, TransitionMode::Static) => {
                static_cheb_forward(tape, adj, prev, order.filter, cfg.activation)?
            }
            _ => {
                return Err(Error::Config(
                    "layer weights do not match the transition mode".into(),
                ))
            }
        };
        units.push(out);
        total = tape.add(total, out)?;
        prev = out;
    }
    let h = tape.layer_norm_rows(total, w.fusion_gain, w.fusion_bias, LAYER_NORM_EPS)?;
    Ok(LayerForward {
        h,
        prime,
        units,
        attention,
    })
}
