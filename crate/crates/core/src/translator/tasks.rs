use serde::{Deserialize, Serialize};

use super::eps::EpsModel;
use super::latent::{encode, generate, CamMode, EncodeChain, Init, LatentTrajectory, Preservation, ZeroSigma};
use crate::denoiser::ConditionId;
use crate::error::{Error, Result};
use crate::geometry::{blend, multi_blend, warp, BlendReference, ComponentSpec, ConstraintScope, Point, WarpMap};
use crate::numerics::{sample_gaussian, RngState, Tensor};
use crate::schedule::Schedule;

const STREAM_ENCODE: u64 = 0x656e_636f;
const STREAM_DDIM: u64 = 0x6464_696d;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TranslateOptions {
    /// Number of denoising steps from the noised input.
    pub k: usize,
    pub gamma: f64,
    pub seed: u64,
    pub chain: EncodeChain,
    pub zero_sigma: ZeroSigma,
}

impl Default for TranslateOptions {
    fn default() -> Self {
        Self {
            k: 180,
            gamma: 1.0,
            seed: 0,
            chain: EncodeChain::Posterior,
            zero_sigma: ZeroSigma::Residual,
        }
    }
}

impl TranslateOptions {
    fn encode<M: EpsModel + ?Sized>(&self, model: &M, x0: &Tensor, l_so: ConditionId) -> Result<LatentTrajectory> {
        let mut rng = RngState::new(self.seed, STREAM_ENCODE);
        encode(model, x0, l_so, self.k, self.gamma, self.chain, &mut rng)
    }
}

/// Encodes under `l_so` and regenerates under `l_ta` from `q(x_K | x0)`;
/// pixels where `mask` is 1 keep the source.
pub fn translate<M: EpsModel + ?Sized>(
    model: &M,
    x0: &Tensor,
    l_so: ConditionId,
    l_ta: ConditionId,
    opts: &TranslateOptions,
    mask: Option<&Tensor>,
) -> Result<Tensor> {
    model.vocabulary().validate(l_so)?;
    model.vocabulary().validate(l_ta)?;
    let traj = opts.encode(model, x0, l_so)?;
    let keep = mask.map(|m| Preservation::background(m.clone()));
    generate(model, Init::Image(x0), l_ta, &traj, keep.as_ref(), opts.zero_sigma)
}

pub fn beauty_filter<M: EpsModel + ?Sized>(
    model: &M,
    x: &Tensor,
    opts: &TranslateOptions,
    mask: Option<&Tensor>,
) -> Result<Tensor> {
    translate(model, x, ConditionId::NonMakeup, ConditionId::Makeup, opts, mask)
}

pub fn makeup_removal<M: EpsModel + ?Sized>(
    model: &M,
    x: &Tensor,
    opts: &TranslateOptions,
    mask: Option<&Tensor>,
) -> Result<Tensor> {
    translate(model, x, ConditionId::Makeup, ConditionId::NonMakeup, opts, mask)
}

/// Translation between two tags (or the reserved domain descriptors).
pub fn text_modify<M: EpsModel + ?Sized>(
    model: &M,
    x0: &Tensor,
    from_tag: &str,
    to_tag: &str,
    opts: &TranslateOptions,
    mask: Option<&Tensor>,
) -> Result<Tensor> {
    let vocab = model.vocabulary();
    let (l_so, l_ta) = (vocab.resolve(from_tag)?, vocab.resolve(to_tag)?);
    translate(model, x0, l_so, l_ta, opts, mask)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransferOptions {
    pub translate: TranslateOptions,
    pub from: ConditionId,
    pub to: ConditionId,
    pub cam: CamMode,
    pub scope: ConstraintScope,
}

impl Default for TransferOptions {
    fn default() -> Self {
        Self {
            translate: TranslateOptions::default(),
            from: ConditionId::NonMakeup,
            to: ConditionId::Makeup,
            cam: CamMode::Default,
            scope: ConstraintScope::Union,
        }
    }
}

/// The face being made up: image, landmarks, component masks with their
/// weights and release steps, and the region kept from the source.
#[derive(Clone, Debug)]
pub struct TransferSource {
    pub image: Tensor,
    pub landmarks: Vec<Point>,
    pub components: Vec<ComponentSpec>,
    pub background: Tensor,
}

impl TransferSource {
    /// Background defaults to everything outside the landmark hull.
    pub fn new(image: Tensor, landmarks: Vec<Point>, components: Vec<ComponentSpec>) -> Result<Self> {
        let s = image.shape();
        if s.len() != 3 {
            return Err(Error::InvalidShape(s.to_vec()));
        }
        let background = WarpMap::new(&landmarks, &landmarks, s[0], s[1])?.validity().complement();
        Ok(Self {
            image,
            landmarks,
            components,
            background,
        })
    }

    /// `Σ_c α_c·M^c`.
    pub fn alpha_map(&self) -> Result<Tensor> {
        let s = self.image.shape();
        let mut a = Tensor::zeros(&s[..2]);
        for c in &self.components {
            a = a.zip_with(&c.mask, |v, m| v + c.alpha * m)?;
        }
        Ok(a)
    }
}

/// `x'_0` for a single reference: the source blended with the warped
/// reference under the component weights, restricted to the warp's hull.
pub fn blended_target(source: &TransferSource, reference: &Tensor, ref_lm: &[Point]) -> Result<Tensor> {
    if ref_lm.len() != source.landmarks.len() {
        return Err(Error::invalid(format!(
            "landmark counts differ: source {} vs reference {}",
            source.landmarks.len(),
            ref_lm.len()
        )));
    }
    let (warped, valid) = warp(reference, &source.landmarks, ref_lm)?;
    let alpha = source.alpha_map()?.hadamard(&valid)?;
    blend(&source.image, &warped, &alpha)
}

fn transfer_to_target<M: EpsModel + ?Sized>(
    model: &M,
    source: &TransferSource,
    target: Tensor,
    opts: &TransferOptions,
) -> Result<Tensor> {
    model.vocabulary().validate(opts.from)?;
    model.vocabulary().validate(opts.to)?;
    let traj = opts.translate.encode(model, &source.image, opts.from)?;
    if traj.k == 0 {
        return Ok(target);
    }
    let keep = Preservation {
        background: source.background.clone(),
        components: source.components.clone(),
        cam: opts.cam,
        target: Some(target.clone()),
    };
    generate(model, Init::Image(&target), opts.to, &traj, Some(&keep), opts.translate.zero_sigma)
}

/// Single-reference makeup transfer.
pub fn makeup_transfer<M: EpsModel + ?Sized>(
    model: &M,
    source: &TransferSource,
    reference: &Tensor,
    ref_lm: &[Point],
    opts: &TransferOptions,
) -> Result<Tensor> {
    let target = blended_target(source, reference, ref_lm)?;
    transfer_to_target(model, source, target, opts)
}

/// Transfer from several references, each contributing under its own mask.
pub fn multi_makeup_transfer<M: EpsModel + ?Sized>(
    model: &M,
    source: &TransferSource,
    refs: &[BlendReference],
    opts: &TransferOptions,
) -> Result<Tensor> {
    let target = multi_blend(&source.image, &source.landmarks, refs, opts.scope)?;
    transfer_to_target(model, source, target, opts)
}

/// Strided deterministic sampling from `q(x_T | x'_0)` in `steps` jumps,
/// with the background pinned to the source's forward marginals.
pub fn ddim_transfer<M: EpsModel + ?Sized>(
    model: &M,
    source: &TransferSource,
    target: &Tensor,
    steps: usize,
    opts: &TransferOptions,
) -> Result<Tensor> {
    model.vocabulary().validate(opts.to)?;
    source.image.same_shape(target)?;
    let sched = model.schedule();
    let big_t = sched.steps();
    let mut rng = RngState::new(opts.translate.seed, STREAM_DDIM);
    let eps = sample_gaussian(&mut rng, target.shape())?;
    let mut x = sched.forward_sample(target, big_t, &eps)?;
    let ts = Schedule::skip_timesteps(big_t, steps);
    let c = x.len() / source.background.len();
    for (i, &t) in ts.iter().enumerate() {
        let t_prev = ts.get(i + 1).copied().unwrap_or(0);
        let eps_hat = model.predict_eps(&x, t, opts.to)?;
        x = sched.ddim_step(&x, &eps_hat, t, t_prev)?;
        let keep = sched.forward_sample(&source.image, t_prev, &eps)?;
        let xd = x.data_mut();
        for (p, &bg) in source.background.data().iter().enumerate() {
            if bg == 1.0 {
                xd[p * c..(p + 1) * c].copy_from_slice(&keep.data()[p * c..(p + 1) * c]);
            }
        }
    }
    Ok(x)
}
