//! Scoring protocols shared by the command line and the test suites:
//! transfer quality, removal after transfer, and the K sweep.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dataset::{mean_color, rgb_to_model, LoadedRecord, Sprite, LIP_PALETTE};
use crate::error::{Error, Result};
use crate::geometry::{component_specs, ComponentAlphas, ComponentSchedule, Point, WarpMap};
use crate::metrics::{psnr, ssim, ssim_masked, style_shift_kid, ColorHistogram, MetricReport};
use crate::numerics::Tensor;
use crate::translator::{
    blended_target, ddim_transfer, makeup_removal, makeup_transfer, text_modify, EpsModel, TransferOptions,
    TransferSource, TranslateOptions,
};

/// A face image with landmarks and named component masks.
#[derive(Clone, Debug)]
pub struct Face {
    pub image: Tensor,
    pub landmarks: Vec<Point>,
    pub masks: BTreeMap<String, Tensor>,
}

impl From<&Sprite> for Face {
    fn from(s: &Sprite) -> Self {
        Self {
            image: s.image.clone(),
            landmarks: s.landmarks.points.clone(),
            masks: s.masks.clone(),
        }
    }
}

impl From<&LoadedRecord> for Face {
    fn from(r: &LoadedRecord) -> Self {
        Self {
            image: r.image.clone(),
            landmarks: r.landmarks.points.clone(),
            masks: r.masks.clone(),
        }
    }
}

impl Face {
    pub fn mask(&self, name: &str) -> Result<&Tensor> {
        self.masks
            .get(name)
            .ok_or_else(|| Error::invalid(format!("face has no {name} mask")))
    }

    /// Everything outside the landmark hull.
    pub fn background(&self) -> Result<Tensor> {
        let s = self.image.shape();
        Ok(WarpMap::new(&self.landmarks, &self.landmarks, s[0], s[1])?.validity().complement())
    }

    pub fn mean_color(&self, name: &str) -> Result<[f64; 3]> {
        Ok(mean_color(&self.image, self.mask(name)?))
    }

    pub fn transfer_source(&self, alphas: &ComponentAlphas, schedule: &ComponentSchedule) -> Result<TransferSource> {
        let comps = component_specs(&self.masks, alphas, schedule)?;
        TransferSource::new(self.image.clone(), self.landmarks.clone(), comps)
    }
}

pub fn color_distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

/// Fraction of the initial distance to `goal` removed: `1 − d(after)/d(before)`.
pub fn gap_reduction(before: [f64; 3], after: [f64; 3], goal: [f64; 3]) -> f64 {
    let d0 = color_distance(before, goal);
    if d0 == 0.0 {
        return 1.0;
    }
    1.0 - color_distance(after, goal) / d0
}

/// Settings shared by the transfer protocols.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolConfig {
    pub transfer: TransferOptions,
    pub alphas: ComponentAlphas,
    pub release: ComponentSchedule,
    /// Options for removal passes; the seed is offset per item.
    pub removal: TranslateOptions,
    pub ddim_steps: usize,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            transfer: TransferOptions::default(),
            alphas: ComponentAlphas::default(),
            release: ComponentSchedule::default(),
            removal: TranslateOptions::default(),
            ddim_steps: 20,
        }
    }
}

impl ProtocolConfig {
    fn transfer_opts(&self, i: usize) -> TransferOptions {
        let mut o = self.transfer.clone();
        o.translate.seed = o.translate.seed.wrapping_add(i as u64);
        o
    }

    fn removal_opts(&self, i: usize) -> TranslateOptions {
        let mut o = self.removal.clone();
        o.seed = o.seed.wrapping_add(i as u64);
        o
    }
}

/// One transfer with everything the protocols score.
#[derive(Clone, Debug)]
pub struct TransferOutcome {
    pub output: Tensor,
    pub lip_gap_reduction: f64,
    pub face_ssim: f64,
    pub identity_ssim: f64,
}

pub fn run_transfer<M: EpsModel + ?Sized>(
    model: &M,
    source: &Face,
    reference: &Face,
    cfg: &ProtocolConfig,
    index: usize,
) -> Result<TransferOutcome> {
    let src = source.transfer_source(&cfg.alphas, &cfg.release)?;
    let output = makeup_transfer(model, &src, &reference.image, &reference.landmarks, &cfg.transfer_opts(index))?;
    score_transfer(source, reference, output)
}

fn score_transfer(source: &Face, reference: &Face, output: Tensor) -> Result<TransferOutcome> {
    let lips = source.mask("lips")?;
    Ok(TransferOutcome {
        lip_gap_reduction: gap_reduction(
            source.mean_color("lips")?,
            mean_color(&output, lips),
            reference.mean_color("lips")?,
        ),
        face_ssim: ssim_masked(&source.image, &output, source.mask("face")?)?,
        identity_ssim: ssim(&source.image, &output)?,
        output,
    })
}

/// The strided-sampling counterpart of [`run_transfer`].
pub fn run_ddim_transfer<M: EpsModel + ?Sized>(
    model: &M,
    source: &Face,
    reference: &Face,
    cfg: &ProtocolConfig,
    index: usize,
) -> Result<TransferOutcome> {
    let src = source.transfer_source(&cfg.alphas, &cfg.release)?;
    let target = blended_target(&src, &reference.image, &reference.landmarks)?;
    let output = ddim_transfer(model, &src, &target, cfg.ddim_steps, &cfg.transfer_opts(index))?;
    score_transfer(source, reference, output)
}

/// Removal of each reference's makeup, seeded per item.
pub fn remove_all<M: EpsModel + ?Sized>(model: &M, refs: &[&Face], cfg: &ProtocolConfig) -> Result<Vec<Tensor>> {
    refs.iter()
        .enumerate()
        .map(|(i, r)| makeup_removal(model, &r.image, &cfg.removal_opts(i), Some(&r.background()?)))
        .collect()
}

/// Style-shift KID of `outputs` against the references.
pub fn shift_kid(sources: &[&Face], outputs: &[Tensor], refs: &[&Face], removed: &[Tensor]) -> Result<f64> {
    let s: Vec<Tensor> = sources.iter().map(|f| f.image.clone()).collect();
    let r: Vec<Tensor> = refs.iter().map(|f| f.image.clone()).collect();
    style_shift_kid(&ColorHistogram::default(), &s, outputs, &r, removed)
}

fn unzip(pairs: &[(Face, Face)]) -> (Vec<&Face>, Vec<&Face>) {
    pairs.iter().map(|(s, r)| (s, r)).unzip()
}

/// Transfers every pair and reports lip gap reduction, face and whole-image
/// SSIM, and the style-shift KID of the transfer and of copying the source.
pub fn eval_transfer<M: EpsModel + ?Sized>(model: &M, pairs: &[(Face, Face)], cfg: &ProtocolConfig) -> Result<MetricReport> {
    let (sources, refs) = unzip(pairs);
    let outcomes = pairs
        .iter()
        .enumerate()
        .map(|(i, (s, r))| run_transfer(model, s, r, cfg, i))
        .collect::<Result<Vec<_>>>()?;
    let removed = remove_all(model, &refs, cfg)?;
    let outputs: Vec<Tensor> = outcomes.iter().map(|o| o.output.clone()).collect();
    let copies: Vec<Tensor> = sources.iter().map(|f| f.image.clone()).collect();
    let mut report = MetricReport::new(serde_json::json!({ "task": "transfer", "pairs": pairs.len(), "config": cfg }));
    report.insert("lip_gap_reduction", outcomes.iter().map(|o| o.lip_gap_reduction).collect());
    report.insert("face_ssim", outcomes.iter().map(|o| o.face_ssim).collect());
    report.insert("ssim", outcomes.iter().map(|o| o.identity_ssim).collect());
    report.insert(
        "psnr",
        outcomes
            .iter()
            .zip(&sources)
            .map(|(o, s)| psnr(&s.image, &o.output))
            .collect::<Result<_>>()?,
    );
    report.insert("style_shift_kid", vec![shift_kid(&sources, &outputs, &refs, &removed)?]);
    report.insert("copy_style_shift_kid", vec![shift_kid(&sources, &copies, &refs, &removed)?]);
    Ok(report)
}

/// Removal applied to transfer outputs, scored against the original sources.
pub fn eval_removal<M: EpsModel + ?Sized>(model: &M, pairs: &[(Face, Face)], cfg: &ProtocolConfig) -> Result<MetricReport> {
    let mut ssims = Vec::with_capacity(pairs.len());
    let mut psnrs = Vec::with_capacity(pairs.len());
    for (i, (s, r)) in pairs.iter().enumerate() {
        let out = run_transfer(model, s, r, cfg, i)?.output;
        let back = makeup_removal(model, &out, &cfg.removal_opts(i), Some(&s.background()?))?;
        ssims.push(ssim(&s.image, &back)?);
        psnrs.push(psnr(&s.image, &back)?);
    }
    let mut report = MetricReport::new(serde_json::json!({ "task": "removal", "pairs": pairs.len(), "config": cfg }));
    report.insert("ssim", ssims);
    report.insert("psnr", psnrs);
    Ok(report)
}

/// Lip-color gap reduction of a tag edit toward the generator's palette entry.
pub fn text_lip_shift<M: EpsModel + ?Sized>(
    model: &M,
    source: &Face,
    from_tag: &str,
    to_tag: &str,
    opts: &TranslateOptions,
) -> Result<f64> {
    let goal = LIP_PALETTE
        .iter()
        .find(|(name, _)| *name == to_tag)
        .map(|(_, c)| rgb_to_model(*c))
        .ok_or_else(|| Error::invalid(format!("{to_tag} is not a lip tag")))?;
    let out = text_modify(model, &source.image, from_tag, to_tag, opts, Some(&source.background()?))?;
    let lips = source.mask("lips")?;
    Ok(gap_reduction(source.mean_color("lips")?, mean_color(&out, lips), goal))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(rename = "K")]
    pub k: usize,
    pub identity_ssim: f64,
    pub style_shift_kid: f64,
    pub lip_gap_reduction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    pub protocol: serde_json::Value,
}

/// Transfer quality as a function of the number of denoising steps.
pub fn sweep_k<M: EpsModel + ?Sized>(
    model: &M,
    pairs: &[(Face, Face)],
    ks: &[usize],
    cfg: &ProtocolConfig,
) -> Result<SweepReport> {
    if ks.is_empty() {
        return Err(Error::invalid("K list is empty"));
    }
    let (sources, refs) = unzip(pairs);
    let removed = remove_all(model, &refs, cfg)?;
    let mut rows = Vec::with_capacity(ks.len());
    for &k in ks {
        let mut c = cfg.clone();
        c.transfer.translate.k = k;
        let outcomes = pairs
            .iter()
            .enumerate()
            .map(|(i, (s, r))| run_transfer(model, s, r, &c, i))
            .collect::<Result<Vec<_>>>()?;
        let outputs: Vec<Tensor> = outcomes.iter().map(|o| o.output.clone()).collect();
        let n = outcomes.len() as f64;
        rows.push(SweepRow {
            k,
            identity_ssim: outcomes.iter().map(|o| o.identity_ssim).sum::<f64>() / n,
            style_shift_kid: shift_kid(&sources, &outputs, &refs, &removed)?,
            lip_gap_reduction: outcomes.iter().map(|o| o.lip_gap_reduction).sum::<f64>() / n,
        });
    }
    Ok(SweepReport {
        rows,
        protocol: serde_json::json!({ "pairs": pairs.len(), "K": ks, "config": cfg }),
    })
}

/// Pairs the i-th non-makeup face with the i-th makeup face.
pub fn domain_pairs(faces: impl IntoIterator<Item = (bool, Face)>, limit: usize) -> Vec<(Face, Face)> {
    let (mut plain, mut made) = (Vec::new(), Vec::new());
    for (is_makeup, f) in faces {
        if is_makeup {
            made.push(f);
        } else {
            plain.push(f);
        }
    }
    plain.into_iter().zip(made).take(limit).collect()
}
