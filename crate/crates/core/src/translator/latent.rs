use serde::{Deserialize, Serialize};

use super::eps::EpsModel;
use crate::denoiser::ConditionId;
use crate::error::{Error, Result};
use crate::geometry::{check_components, mask::check_binary, ComponentSpec};
use crate::numerics::{sample_gaussian, RngState, Tensor};

/// How the encoder draws the source chain `x_{t−1}`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EncodeChain {
    /// `q(x_{t−1} | x_t, x0)`.
    #[default]
    Posterior,
    /// `q(x_{t−1} | x0)`, independent of `x_t`.
    Marginal,
}

/// What generation adds at steps with `σ_t = 0`, where no code exists.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZeroSigma {
    /// The encoder's residual `x_{t−1} − μ_f(x_t, l_so)`, the `σ → 0` limit of `σ_t·z_t`.
    #[default]
    Residual,
    /// Nothing: the deterministic mean alone.
    Mean,
}

/// Which chain a released-late component is pinned to before its step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CamMode {
    /// The blended target's chain, sharing the source chain's noise.
    #[default]
    Default,
    /// Components are never pinned; only the background is.
    Off,
    /// The source chain.
    Literal,
}

/// A recorded source trajectory from step `k` down to 0.
#[derive(Clone, Debug)]
pub struct LatentTrajectory {
    pub k: usize,
    pub gamma: f64,
    pub x0: Tensor,
    /// Noise that produced `x_k` from `x0`.
    pub eps_k: Tensor,
    /// `states[t] = x_t` for `0 ≤ t ≤ k`.
    pub states: Vec<Tensor>,
    /// `codes[t] = z_t` for steps with `σ_t > 0`.
    pub codes: Vec<Option<Tensor>>,
    /// `residuals[t]` for steps with `σ_t = 0`.
    pub residuals: Vec<Option<Tensor>>,
}

impl LatentTrajectory {
    pub fn code(&self, t: usize) -> Option<&Tensor> {
        self.codes.get(t).and_then(Option::as_ref)
    }

    pub fn num_codes(&self) -> usize {
        self.codes.iter().flatten().count()
    }

    pub fn state(&self, t: usize) -> &Tensor {
        &self.states[t]
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::invalid(format!("gamma {gamma} outside [0, 1]")));
    }
    Ok(())
}

/// Records the codes of `x0`'s trajectory under `l_so` from step `k`.
pub fn encode<M: EpsModel + ?Sized>(
    model: &M,
    x0: &Tensor,
    l_so: ConditionId,
    k: usize,
    gamma: f64,
    chain: EncodeChain,
    rng: &mut RngState,
) -> Result<LatentTrajectory> {
    let sched = model.schedule();
    if k > sched.steps() {
        return Err(Error::TimestepOutOfRange {
            t: k,
            min: 0,
            max: sched.steps(),
        });
    }
    check_gamma(gamma)?;
    let eps_k = sample_gaussian(rng, x0.shape())?;
    let mut states = vec![Tensor::zeros(x0.shape()); k + 1];
    let mut codes = vec![None; k + 1];
    let mut residuals = vec![None; k + 1];
    states[k] = sched.forward_sample(x0, k, &eps_k)?;
    for t in (1..=k).rev() {
        let noise = sample_gaussian(rng, x0.shape())?;
        let prev = match chain {
            EncodeChain::Posterior => sched.posterior_sample_with_noise(x0, &states[t], t, &noise)?,
            EncodeChain::Marginal => sched.forward_sample(x0, t - 1, &noise)?,
        };
        let eps_hat = model.predict_eps(&states[t], t, l_so)?;
        let mu = sched.mu(&states[t], &eps_hat, t, gamma)?;
        let sigma = sched.sigma(t, gamma)?;
        let diff = prev.sub(&mu)?;
        if sigma > 0.0 {
            codes[t] = Some(diff.scale(1.0 / sigma));
        } else {
            residuals[t] = Some(diff);
        }
        states[t - 1] = prev;
    }
    Ok(LatentTrajectory {
        k,
        gamma,
        x0: x0.clone(),
        eps_k,
        states,
        codes,
        residuals,
    })
}

/// Where generation starts at step `k`.
#[derive(Clone, Copy, Debug)]
pub enum Init<'a> {
    /// The trajectory's own `x_k`.
    Shared,
    /// `q(x_k | image)` with the trajectory's noise `eps_k`.
    Image(&'a Tensor),
    /// An explicit state.
    Noise(&'a Tensor),
}

/// Regions pinned to reference chains during generation.
#[derive(Clone, Debug)]
pub struct Preservation {
    /// Binary `[h, w]`, pinned to the source chain at every step.
    pub background: Tensor,
    /// Pinned while `t > t_c`, per [`CamMode`].
    pub components: Vec<ComponentSpec>,
    pub cam: CamMode,
    /// Blended target `x'_0` whose chain components follow under [`CamMode::Default`].
    pub target: Option<Tensor>,
}

impl Preservation {
    pub fn background(mask: Tensor) -> Self {
        Self {
            background: mask,
            components: Vec::new(),
            cam: CamMode::Off,
            target: None,
        }
    }

    fn validate(&self, like: &Tensor) -> Result<()> {
        check_binary(&self.background)?;
        let hw = &like.shape()[..2];
        if self.background.shape() != hw {
            return Err(Error::ShapeMismatch {
                left: self.background.shape().to_vec(),
                right: hw.to_vec(),
            });
        }
        check_components(&self.components)?;
        for c in &self.components {
            if c.mask.shape() != hw {
                return Err(Error::ShapeMismatch {
                    left: c.mask.shape().to_vec(),
                    right: hw.to_vec(),
                });
            }
        }
        if let Some(t) = &self.target {
            like.same_shape(t)?;
        }
        Ok(())
    }
}

/// Pins `x` in place for the step that produced `x_{t−1}`.
fn pin<M: EpsModel + ?Sized>(
    model: &M,
    x: &mut Tensor,
    t: usize,
    traj: &LatentTrajectory,
    p: &Preservation,
    delta: Option<&Tensor>,
) -> Result<()> {
    let c = x.len() / p.background.len();
    let src = traj.state(t - 1);
    let active: Vec<&ComponentSpec> = match p.cam {
        CamMode::Off => Vec::new(),
        _ => p.components.iter().filter(|s| t > s.t_c).collect(),
    };
    let shift = if p.cam == CamMode::Default { delta } else { None };
    let target = p.target.as_ref().filter(|_| shift.is_some());
    let root_ab = model.schedule().alpha_bar(t - 1).sqrt();
    let xd = x.data_mut();
    for (i, &bg) in p.background.data().iter().enumerate() {
        let range = i * c..(i + 1) * c;
        if bg == 1.0 {
            xd[range.clone()].copy_from_slice(&src.data()[range]);
        } else if active.iter().any(|s| s.mask.data()[i] == 1.0) {
            for j in range {
                xd[j] = match (shift, target) {
                    (Some(_), Some(tg)) if t == 1 => tg.data()[j],
                    (Some(d), _) => src.data()[j] + root_ab * d.data()[j],
                    _ => src.data()[j],
                };
            }
        }
    }
    Ok(())
}

/// Replays `traj` under `l_ta` from `init`, pinning regions per `preserve`.
pub fn generate<M: EpsModel + ?Sized>(
    model: &M,
    init: Init<'_>,
    l_ta: ConditionId,
    traj: &LatentTrajectory,
    preserve: Option<&Preservation>,
    zero_sigma: ZeroSigma,
) -> Result<Tensor> {
    let sched = model.schedule();
    let k = traj.k;
    let mut x = match init {
        Init::Shared => traj.state(k).clone(),
        Init::Image(img) => sched.forward_sample(img, k, &traj.eps_k)?,
        Init::Noise(n) => n.clone(),
    };
    traj.x0.same_shape(&x)?;
    let delta = match preserve {
        Some(p) => {
            p.validate(&traj.x0)?;
            p.target.as_ref().map(|tg| tg.sub(&traj.x0)).transpose()?
        }
        None => None,
    };
    for t in (1..=k).rev() {
        let eps_hat = model.predict_eps(&x, t, l_ta)?;
        let mut next = sched.mu(&x, &eps_hat, t, traj.gamma)?;
        let sigma = sched.sigma(t, traj.gamma)?;
        if sigma > 0.0 {
            let z = traj.code(t).ok_or(Error::MissingCode(t))?;
            for (o, zv) in next.data_mut().iter_mut().zip(z.data()) {
                *o += sigma * zv;
            }
        } else if zero_sigma == ZeroSigma::Residual {
            if let Some(r) = traj.residuals.get(t).and_then(Option::as_ref) {
                for (o, rv) in next.data_mut().iter_mut().zip(r.data()) {
                    *o += rv;
                }
            }
        }
        if let Some(p) = preserve {
            pin(model, &mut next, t, traj, p, delta.as_ref())?;
        }
        x = next;
    }
    Ok(x)
}
