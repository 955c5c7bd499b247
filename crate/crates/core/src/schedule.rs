//! Noise schedule and the closed-form diffusion transitions.
//!
//! `alpha_bar(t)` is the cumulative product `Π_{s≤t} (1 − β_s)` with
//! `alpha_bar(0) = 1`. Every transition below is expressed in that
//! convention:
//!
//! * forward marginal `q(x_t | x_0) = N(√ᾱ_t x_0, (1 − ᾱ_t) I)`
//! * posterior `q(x_{t−1} | x_t, x_0)` with variance
//!   `β̃_t = β_t (1 − ᾱ_{t−1}) / (1 − ᾱ_t)`
//! * the generalized reverse step
//!   `x_{t−1} = √ᾱ_{t−1} x̂_0 + √(1 − ᾱ_{t−1} − σ_t²) ε̂ + σ_t ε`
//!   whose deterministic part is exposed as [`Schedule::mu`].

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{sample_gaussian, RngState, Tensor};

/// Parameters from which a [`Schedule`] is rebuilt; stored in model files.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleParams {
    pub steps: usize,
    pub beta_start: f64,
    pub beta_end: f64,
}

impl Default for ScheduleParams {
    fn default() -> Self {
        Self {
            steps: 1000,
            beta_start: 1e-4,
            beta_end: 0.02,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Schedule {
    params: ScheduleParams,
    betas: Vec<f64>,
    alpha_bar: Vec<f64>,
}

impl Schedule {
    /// Linear β schedule over `steps` steps.
    pub fn new(steps: usize, beta_start: f64, beta_end: f64) -> Result<Self> {
        if steps == 0 {
            return Err(Error::invalid("schedule needs at least one step"));
        }
        if !(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0) {
            return Err(Error::invalid(format!(
                "need 0 < beta_start ≤ beta_end < 1, got {beta_start}, {beta_end}"
            )));
        }
        let betas: Vec<f64> = if steps == 1 {
            vec![beta_start]
        } else {
            (0..steps)
                .map(|i| beta_start + (beta_end - beta_start) * i as f64 / (steps - 1) as f64)
                .collect()
        };
        let mut alpha_bar = Vec::with_capacity(steps + 1);
        alpha_bar.push(1.0);
        let mut acc = 1.0;
        for b in &betas {
            acc *= 1.0 - b;
            alpha_bar.push(acc);
        }
        Ok(Self {
            params: ScheduleParams {
                steps,
                beta_start,
                beta_end,
            },
            betas,
            alpha_bar,
        })
    }

    pub fn from_params(p: &ScheduleParams) -> Result<Self> {
        Self::new(p.steps, p.beta_start, p.beta_end)
    }

    pub fn params(&self) -> ScheduleParams {
        self.params
    }

    /// Number of diffusion steps `T`.
    pub fn steps(&self) -> usize {
        self.betas.len()
    }

    fn check_t(&self, t: usize, min: usize) -> Result<()> {
        if t < min || t > self.steps() {
            return Err(Error::TimestepOutOfRange {
                t,
                min,
                max: self.steps(),
            });
        }
        Ok(())
    }

    /// `β_t` for `1 ≤ t ≤ T`.
    pub fn beta(&self, t: usize) -> f64 {
        self.betas[t - 1]
    }

    /// `ᾱ_t` for `0 ≤ t ≤ T`.
    pub fn alpha_bar(&self, t: usize) -> f64 {
        self.alpha_bar[t]
    }

    /// Posterior variance `β̃_t`.
    pub fn posterior_variance(&self, t: usize) -> f64 {
        self.beta(t) * (1.0 - self.alpha_bar(t - 1)) / (1.0 - self.alpha_bar(t))
    }

    /// `√ᾱ_t·x0 + √(1−ᾱ_t)·eps`.
    pub fn forward_sample(&self, x0: &Tensor, t: usize, eps: &Tensor) -> Result<Tensor> {
        self.check_t(t, 0)?;
        if t == 0 {
            x0.same_shape(eps)?;
            return Ok(x0.clone());
        }
        let ab = self.alpha_bar(t);
        Tensor::axpby(ab.sqrt(), x0, (1.0 - ab).sqrt(), eps)
    }

    /// Coefficients `(c_x0, c_xt)` of the posterior mean.
    pub fn posterior_mean_coefficients(&self, t: usize) -> (f64, f64) {
        let ab = self.alpha_bar(t);
        let ab_prev = self.alpha_bar(t - 1);
        let beta = self.beta(t);
        let c0 = ab_prev.sqrt() * beta / (1.0 - ab);
        let ct = (1.0 - beta).sqrt() * (1.0 - ab_prev) / (1.0 - ab);
        (c0, ct)
    }

    /// Posterior draw with caller-supplied standard normal `noise`.
    ///
    /// At `t = 1` the posterior is a point mass on `x0`, returned bit-exactly.
    pub fn posterior_sample_with_noise(
        &self,
        x0: &Tensor,
        x_t: &Tensor,
        t: usize,
        noise: &Tensor,
    ) -> Result<Tensor> {
        self.check_t(t, 1)?;
        x0.same_shape(x_t)?;
        x0.same_shape(noise)?;
        if t == 1 {
            return Ok(x0.clone());
        }
        let (c0, ct) = self.posterior_mean_coefficients(t);
        let sd = self.posterior_variance(t).sqrt();
        let mut out = Tensor::axpby(c0, x0, ct, x_t)?;
        for (o, n) in out.data_mut().iter_mut().zip(noise.data()) {
            *o += sd * n;
        }
        Ok(out)
    }

    pub fn posterior_sample(
        &self,
        x0: &Tensor,
        x_t: &Tensor,
        t: usize,
        rng: &mut RngState,
    ) -> Result<Tensor> {
        self.check_t(t, 1)?;
        let noise = sample_gaussian(rng, x0.shape())?;
        self.posterior_sample_with_noise(x0, x_t, t, &noise)
    }

    /// `σ_t = γ·√((1−ᾱ_{t−1})/(1−ᾱ_t))·√(1−ᾱ_t/ᾱ_{t−1})`.
    pub fn sigma(&self, t: usize, gamma: f64) -> Result<f64> {
        self.check_t(t, 1)?;
        let ab = self.alpha_bar(t);
        let ab_prev = self.alpha_bar(t - 1);
        let s = gamma * ((1.0 - ab_prev) / (1.0 - ab)).sqrt() * (1.0 - ab / ab_prev).max(0.0).sqrt();
        Ok(s)
    }

    /// Coefficient of ε̂ in the deterministic part of the reverse step.
    fn direction_coefficient(&self, t: usize, sigma: f64) -> Result<f64> {
        let rem = 1.0 - self.alpha_bar(t - 1) - sigma * sigma;
        if rem < -1e-12 {
            return Err(Error::invalid(format!(
                "1 − ᾱ_{{t−1}} − σ_t² = {rem} < 0 at t={t}"
            )));
        }
        Ok(rem.max(0.0).sqrt())
    }

    /// `μ_f`: the first two terms of the reverse step.
    pub fn mu(&self, x_t: &Tensor, eps_hat: &Tensor, t: usize, gamma: f64) -> Result<Tensor> {
        self.check_t(t, 1)?;
        let sigma = self.sigma(t, gamma)?;
        let ab = self.alpha_bar(t);
        let ab_prev = self.alpha_bar(t - 1);
        let dir = self.direction_coefficient(t, sigma)?;
        // √ᾱ_{t−1}(x_t − √(1−ᾱ_t) ε̂)/√ᾱ_t + dir·ε̂
        let scale = (ab_prev / ab).sqrt();
        let eps_coef = dir - scale * (1.0 - ab).sqrt();
        Tensor::axpby(scale, x_t, eps_coef, eps_hat)
    }

    pub fn predict_x0(&self, x_t: &Tensor, eps_hat: &Tensor, t: usize) -> Result<Tensor> {
        self.check_t(t, 1)?;
        let ab = self.alpha_bar(t);
        Tensor::axpby(1.0 / ab.sqrt(), x_t, -(1.0 - ab).sqrt() / ab.sqrt(), eps_hat)
    }

    /// One generalized reverse step: `μ_f + σ_t·noise`.
    pub fn reverse_step(
        &self,
        x_t: &Tensor,
        eps_hat: &Tensor,
        t: usize,
        gamma: f64,
        noise: &Tensor,
    ) -> Result<Tensor> {
        x_t.same_shape(noise)?;
        let sigma = self.sigma(t, gamma)?;
        let mut out = self.mu(x_t, eps_hat, t, gamma)?;
        if sigma > 0.0 {
            for (o, n) in out.data_mut().iter_mut().zip(noise.data()) {
                *o += sigma * n;
            }
        }
        Ok(out)
    }

    /// Deterministic skip from `t` to `t_prev < t` (η = 0 DDIM).
    pub fn ddim_step(
        &self,
        x_t: &Tensor,
        eps_hat: &Tensor,
        t: usize,
        t_prev: usize,
    ) -> Result<Tensor> {
        self.check_t(t, 1)?;
        if t_prev >= t {
            return Err(Error::invalid(format!("ddim target {t_prev} must precede {t}")));
        }
        let x0 = self.predict_x0(x_t, eps_hat, t)?;
        let ab_prev = self.alpha_bar(t_prev);
        Tensor::axpby(ab_prev.sqrt(), &x0, (1.0 - ab_prev).sqrt(), eps_hat)
    }

    /// `count` evenly spaced timesteps from `start` down to 1, descending.
    pub fn skip_timesteps(start: usize, count: usize) -> Vec<usize> {
        let count = count.clamp(1, start.max(1));
        let mut ts: Vec<usize> = (0..count)
            .map(|i| start - (i * start) / count)
            .collect();
        ts.dedup();
        ts
    }
}
