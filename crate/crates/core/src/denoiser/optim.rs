use serde::{Deserialize, Serialize};

use super::params::{Grads, ParamSet};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamWConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Linear warm-up length in steps; 0 disables warm-up.
    pub warmup: usize,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            weight_decay: 1e-2,
            beta1: 0.95,
            beta2: 0.999,
            eps: 1e-8,
            warmup: 1000,
        }
    }
}

/// AdamW with decoupled weight decay and linear warm-up.
#[derive(Clone, Debug)]
pub struct AdamW {
    config: AdamWConfig,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamW {
    pub fn new(config: AdamWConfig, params: &ParamSet) -> Self {
        let zeros = params.zeros_like().0;
        Self {
            config,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn config(&self) -> &AdamWConfig {
        &self.config
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// Learning rate applied at 1-based step `step`.
    pub fn lr_at(&self, step: u64) -> f64 {
        let c = &self.config;
        if c.warmup == 0 {
            c.lr
        } else {
            c.lr * (step as f64 / c.warmup as f64).min(1.0)
        }
    }

    /// Applies one update; returns the learning rate used.
    pub fn step(&mut self, params: &mut ParamSet, grads: &Grads) -> Result<f64> {
        if grads.0.len() != params.len() || grads.0.len() != self.m.len() {
            return Err(Error::invalid("gradient layout does not match parameters"));
        }
        for (i, g) in grads.0.iter().enumerate() {
            if g.len() != params.tensor(i).len() {
                return Err(Error::ShapeMismatch {
                    left: params.shape(i).to_vec(),
                    right: vec![g.len()],
                });
            }
        }
        self.step += 1;
        let c = self.config;
        let lr = self.lr_at(self.step);
        let bc1 = 1.0 - c.beta1.powf(self.step as f64);
        let bc2 = 1.0 - c.beta2.powf(self.step as f64);
        let decay = 1.0 - lr * c.weight_decay;
        for (i, g) in grads.0.iter().enumerate() {
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            let p = params.tensor_mut(i);
            for j in 0..g.len() {
                m[j] = c.beta1 * m[j] + (1.0 - c.beta1) * g[j];
                v[j] = c.beta2 * v[j] + (1.0 - c.beta2) * g[j] * g[j];
                let mh = m[j] / bc1;
                let vh = v[j] / bc2;
                p[j] = p[j] * decay - lr * mh / (vh.sqrt() + c.eps);
            }
        }
        Ok(lr)
    }
}
