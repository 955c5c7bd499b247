//! The simplified ε-matching loss and its exact gradient.
//!
//! The random part of the loss, the timesteps and noises, is drawn once into
//! [`Draws`] so loss and gradient can be evaluated at the same sample.

use super::condition::ConditionId;
use super::model::DenoiserModel;
use super::params::Grads;
use crate::error::{Error, Result};
use crate::numerics::RngState;
use crate::schedule::Schedule;

#[derive(Clone, Debug, PartialEq)]
pub struct Draws {
    pub ts: Vec<usize>,
    /// `[batch, d]` standard normal noise.
    pub eps: Vec<f64>,
}

impl Draws {
    /// `t` uniform in `1..=steps`, fresh Gaussian `ε` per sample.
    pub fn sample(rng: &mut RngState, batch: usize, d: usize, steps: usize) -> Self {
        let mut ts = Vec::with_capacity(batch);
        let mut eps = Vec::with_capacity(batch * d);
        for _ in 0..batch {
            ts.push(rng.range_inclusive(1, steps));
            eps.extend((0..d).map(|_| rng.normal()));
        }
        Self { ts, eps }
    }

    pub fn batch(&self) -> usize {
        self.ts.len()
    }
}

/// `x_t = √ᾱ_t·x0 + √(1 − ᾱ_t)·ε` for every sample of the batch.
pub fn noised_batch(schedule: &Schedule, x0: &[f64], draws: &Draws) -> Vec<f64> {
    let d = x0.len() / draws.batch();
    let mut out = Vec::with_capacity(x0.len());
    for (s, &t) in draws.ts.iter().enumerate() {
        let ab = schedule.alpha_bar(t);
        let (a, b) = (ab.sqrt(), (1.0 - ab).sqrt());
        for i in s * d..(s + 1) * d {
            out.push(a * x0[i] + b * draws.eps[i]);
        }
    }
    out
}

fn check_batch(x0: &[f64], draws: &Draws) -> Result<()> {
    if draws.batch() == 0 || x0.is_empty() {
        return Err(Error::invalid("empty batch"));
    }
    if x0.len() != draws.eps.len() {
        return Err(Error::ShapeMismatch {
            left: vec![x0.len()],
            right: vec![draws.eps.len()],
        });
    }
    Ok(())
}

/// Batch mean of `‖ε̂ − ε‖²` for predictions `eps_hat: [batch, d]`.
pub fn eps_loss(eps_hat: &[f64], draws: &Draws) -> f64 {
    let sq: f64 = eps_hat.iter().zip(&draws.eps).map(|(a, b)| (a - b) * (a - b)).sum();
    sq / draws.batch() as f64
}

/// Loss of an arbitrary predictor `(x_t, ts) ↦ ε̂`.
pub fn loss_with<F>(schedule: &Schedule, x0: &[f64], draws: &Draws, predict: F) -> Result<f64>
where
    F: FnOnce(&[f64], &[usize]) -> Vec<f64>,
{
    check_batch(x0, draws)?;
    let xt = noised_batch(schedule, x0, draws);
    Ok(eps_loss(&predict(&xt, &draws.ts), draws))
}

pub fn loss(model: &DenoiserModel, x0: &[f64], conds: &[ConditionId], draws: &Draws) -> Result<f64> {
    check_batch(x0, draws)?;
    let xt = noised_batch(model.schedule(), x0, draws);
    let eps_hat = model.predict_eps_batch(&xt, &draws.ts, conds)?;
    Ok(eps_loss(&eps_hat, draws))
}

/// Loss and its exact parameter gradient at fixed draws.
pub fn loss_and_grad(model: &DenoiserModel, x0: &[f64], conds: &[ConditionId], draws: &Draws) -> Result<(f64, Grads)> {
    check_batch(x0, draws)?;
    let xt = noised_batch(model.schedule(), x0, draws);
    let (eps_hat, cache) = model.forward(&xt, &draws.ts, conds)?;
    let scale = 2.0 / draws.batch() as f64;
    let deps: Vec<f64> = eps_hat.iter().zip(&draws.eps).map(|(a, b)| scale * (a - b)).collect();
    let grads = model.backward(&cache, &deps);
    Ok((eps_loss(&eps_hat, draws), grads))
}
