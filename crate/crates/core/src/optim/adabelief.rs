use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::param::ParamSet;
use crate::tensor::Tensor;

/// Optimiser hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdaBeliefConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdaBeliefConfig {
    fn default() -> Self {
        AdaBeliefConfig {
            lr: 1e-5,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl AdaBeliefConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.lr
            )));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::Config(format!("{name} must lie in [0, 1), got {b}")));
            }
        }
        if self.eps.is_nan() || self.eps <= 0.0 {
            return Err(Error::Config(format!(
                "eps must be positive, got {}",
                self.eps
            )));
        }
        Ok(())
    }
}

/// AdaBelief moments: `m` tracks the gradient, `s` its deviation from `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaBeliefState {
    pub config: AdaBeliefConfig,
    pub m: Vec<Tensor>,
    pub s: Vec<Tensor>,
    pub t: u64,
}

impl AdaBeliefState {
    pub fn new(params: &ParamSet, config: AdaBeliefConfig) -> Self {
        let zeros = || {
            params
                .iter()
                .map(|p| Tensor::zeros(p.value.rows(), p.value.cols()))
                .collect()
        };
        AdaBeliefState {
            config,
            m: zeros(),
            s: zeros(),
            t: 0,
        }
    }

    /// One update of every parameter from its stored gradient.
    pub fn step(&mut self, params: &mut ParamSet) -> Result<()> {
        if params.len() != self.m.len() {
            return Err(Error::Usage(format!(
                "optimiser tracks {} parameters, set has {}",
                self.m.len(),
                params.len()
            )));
        }
        if let Some(p) = params.iter().find(|p| p.grad.is_none()) {
            return Err(Error::Usage(format!(
                "parameter `{}` has no gradient",
                p.name
            )));
        }
        let AdaBeliefConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        self.t += 1;
        let t = i32::try_from(self.t).unwrap_or(i32::MAX);
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for (idx, p) in params.iter_mut().enumerate() {
            let grad = p.grad.as_ref().expect("checked above");
            if grad.shape() != p.value.shape() {
                return Err(Error::dim("adabelief", p.value.shape(), grad.shape()));
            }
            let m = self.m[idx].as_mut_slice();
            let s = self.s[idx].as_mut_slice();
            for (((theta, &g), m), s) in p
                .value
                .as_mut_slice()
                .iter_mut()
                .zip(grad.as_slice())
                .zip(m.iter_mut())
                .zip(s.iter_mut())
            {
                *m = beta1 * *m + (1.0 - beta1) * g;
                let dev = g - *m;
                *s = beta2 * *s + (1.0 - beta2) * dev * dev + eps;
                let m_hat = *m / c1;
                let s_hat = *s / c2;
                *theta -= lr * m_hat / (s_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
