//! The HDGCN network: stacked layers of a prime unit plus `K/2` chained
//! high-order units, followed by a node or graph classification head.

mod chebyshev;
mod checkpoint;
mod config;
mod heads;
mod layer;
mod smoothing;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::GraphInput;
use crate::mvcattn::{AttentionTrace, MvcAttnOutput};
use crate::param::ParamSet;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

pub use chebyshev::{
    chebyshev_basis, chebyshev_truncation_reference, tied_thetas, tied_two_term_form,
    CHEBYSHEV_GUARD,
};
pub use checkpoint::{Checkpoint, CHECKPOINT_FORMAT};
pub use config::{HdgcnConfig, Task, TransitionMode};
pub use heads::{graph_classify, graph_readout, node_classify, Affine, AffineVars};
pub use layer::{
    hd_cheb_unit_forward, hdgcn_layer_forward, prime_cheb_forward, static_cheb_forward,
    LayerForward, LayerVars, LayerWeights, OrderVars, OrderWeights,
};
pub use smoothing::row_variance;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeadWeights {
    Node {
        hidden: Affine,
        output: Affine,
    },
    Graph {
        f1: Affine,
        f2: Affine,
        output: Affine,
    },
}

/// Parameter layout of a model; values live in a separate [`ParamSet`].
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub config: HdgcnConfig,
    pub layers: Vec<LayerWeights>,
    pub head: HeadWeights,
}

/// Tape handles produced by [`Network::forward`].
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub h: Var,
    pub logits: Var,
    /// `(layer, order, handles)` for every dynamic unit.
    pub attention: Vec<(usize, usize, MvcAttnOutput)>,
}

impl ForwardPass {
    pub fn traces(&self, tape: &Tape) -> Vec<AttentionTrace> {
        self.attention
            .iter()
            .map(|(_, k, a)| a.trace(tape, *k))
            .collect()
    }
}

/// Values of one evaluation.
#[derive(Debug, Clone)]
pub struct ModelOutput {
    pub node_embeddings: Tensor,
    pub logits: Tensor,
    pub traces: Vec<AttentionTrace>,
}

fn dropout_mask(rows: usize, cols: usize, rate: f64, rng: &mut dyn RngCore) -> Tensor {
    let keep = 1.0 / (1.0 - rate);
    Tensor::from_fn(rows, cols, |_, _| {
        if rng.random::<f64>() < rate {
            0.0
        } else {
            keep
        }
    })
}

impl Network {
    pub fn init<R: Rng + ?Sized>(
        config: HdgcnConfig,
        params: &mut ParamSet,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        let mut layers = Vec::with_capacity(config.layers);
        for l in 0..config.layers {
            let input = if l == 0 {
                config.input_dim
            } else {
                config.hidden
            };
            layers.push(LayerWeights::init(
                params,
                &format!("layer{l}"),
                &config,
                input,
                rng,
            )?);
        }
        let d = config.hidden;
        let c = config.num_classes;
        let head = match config.task {
            Task::Node => HeadWeights::Node {
                hidden: Affine::init(params, "head.hidden", d, d, rng)?,
                output: Affine::init(params, "head.output", d, c, rng)?,
            },
            Task::Graph => HeadWeights::Graph {
                f1: Affine::init(params, "readout.f1", d, d, rng)?,
                f2: Affine::init(params, "readout.f2", d, d, rng)?,
                output: Affine::init(params, "head.output", d, c, rng)?,
            },
        };
        Ok(Network {
            config,
            layers,
            head,
        })
    }

    /// Records a full forward pass. With `dropout` set and a positive
    /// dropout rate, inputs to every layer and to the head are masked.
    pub fn forward(
        &self,
        tape: &mut Tape,
        params: &ParamSet,
        input: &GraphInput,
        mut dropout: Option<&mut dyn RngCore>,
    ) -> Result<ForwardPass> {
        let cfg = &self.config;
        if input.features.cols() != cfg.input_dim {
            return Err(Error::dim(
                "model input",
                input.features.shape(),
                (input.n(), cfg.input_dim),
            ));
        }
        let mut x = tape.constant(input.features.clone());
        let mut attention = Vec::new();
        for (l, weights) in self.layers.iter().enumerate() {
            if let (Some(rng), true) = (dropout.as_deref_mut(), cfg.dropout > 0.0) {
                let (r, c) = tape.shape(x);
                x = tape.mul_const(x, dropout_mask(r, c, cfg.dropout, rng))?;
            }
            let vars = weights.bind(tape, params);
            let out = hdgcn_layer_forward(tape, &input.adjacency, x, &vars, cfg)?;
            attention.extend(
                out.attention
                    .into_iter()
                    .enumerate()
                    .map(|(k, a)| (l, k + 1, a)),
            );
            x = out.h;
        }
        let h = x;
        let mut head_in = h;
        if let (Some(rng), true) = (dropout, cfg.dropout > 0.0) {
            let (r, c) = tape.shape(h);
            head_in = tape.mul_const(h, dropout_mask(r, c, cfg.dropout, rng))?;
        }
        let logits = match &self.head {
            HeadWeights::Node { hidden, output } => {
                let hv = hidden.bind(tape, params);
                let ov = output.bind(tape, params);
                node_classify(tape, head_in, &hv, &ov, cfg.activation)?
            }
            HeadWeights::Graph { f1, f2, output } => {
                let f1v = f1.bind(tape, params);
                let f2v = f2.bind(tape, params);
                let ov = output.bind(tape, params);
                let hg = graph_readout(tape, head_in, &f1v, &f2v)?;
                graph_classify(tape, hg, &ov)?
            }
        };
        Ok(ForwardPass {
            h,
            logits,
            attention,
        })
    }
}

/// A network together with its parameter values.
#[derive(Debug, Clone)]
pub struct HdgcnModel {
    pub network: Network,
    pub params: ParamSet,
}

impl HdgcnModel {
    /// Glorot-initialised model; identical seeds give identical weights.
    pub fn new(config: HdgcnConfig, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        let network = Network::init(config, &mut params, &mut rng)?;
        Ok(HdgcnModel { network, params })
    }

    pub fn config(&self) -> &HdgcnConfig {
        &self.network.config
    }

    /// Inference pass without dropout.
    pub fn predict(&self, input: &GraphInput) -> Result<ModelOutput> {
        let mut tape = Tape::new();
        let pass = self.network.forward(&mut tape, &self.params, input, None)?;
        Ok(ModelOutput {
            node_embeddings: tape.value(pass.h).clone(),
            logits: tape.value(pass.logits).clone(),
            traces: pass.traces(&tape),
        })
    }
}
