use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tape::Activation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransitionMode {
    /// Attention-learned transition in every high-order unit.
    Dynamic,
    /// Ablation: high-order units use the fixed `Ã²` transition.
    Static,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Node,
    Graph,
}

/// Architecture hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HdgcnConfig {
    /// Chebyshev order `K`; even, giving `K/2` high-order units per layer.
    pub order: usize,
    pub layers: usize,
    pub input_dim: usize,
    /// `d_k`.
    pub hidden: usize,
    /// `d_c`, inner width of the forward attention scores.
    pub forward_key_dim: usize,
    /// `d_a`, inner width of the backward attention scores.
    pub backward_key_dim: usize,
    /// `M`.
    pub supernodes: usize,
    pub activation: Activation,
    pub mode: TransitionMode,
    pub num_classes: usize,
    pub task: Task,
    /// Dropout rate on layer inputs and on `H` during training.
    pub dropout: f64,
}

impl Default for HdgcnConfig {
    fn default() -> Self {
        HdgcnConfig {
            order: 6,
            layers: 1,
            input_dim: 300,
            hidden: 64,
            forward_key_dim: 64,
            backward_key_dim: 64,
            supernodes: 10,
            activation: Activation::Relu,
            mode: TransitionMode::Dynamic,
            num_classes: 2,
            task: Task::Node,
            dropout: 0.0,
        }
    }
}

impl HdgcnConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !self.order.is_multiple_of(2) {
            return bad(format!("order K must be even, got {}", self.order));
        }
        if self.layers == 0 {
            return bad("layer count must be >= 1".into());
        }
        if self.supernodes == 0 {
            return bad("supernode count must be >= 1".into());
        }
        for (name, v) in [
            ("input_dim", self.input_dim),
            ("hidden", self.hidden),
            ("forward_key_dim", self.forward_key_dim),
            ("backward_key_dim", self.backward_key_dim),
            ("num_classes", self.num_classes),
        ] {
            if v == 0 {
                return bad(format!("{name} must be >= 1"));
            }
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout must lie in [0, 1), got {}", self.dropout));
        }
        Ok(())
    }

    /// Number of high-order units per layer.
    pub fn units(&self) -> usize {
        self.order / 2
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn odd_order_rejected() {
        let cfg = HdgcnConfig {
            order: 5,
            ..Default::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn defaults_validate() {
        let cfg = HdgcnConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.units(), 3);
    }
}
