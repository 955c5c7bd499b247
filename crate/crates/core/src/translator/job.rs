use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::latent::{CamMode, EncodeChain};
use super::tasks::{TransferOptions, TransferSource, TranslateOptions};
use crate::dataset::load_image;
use crate::error::{Error, Result};
use crate::geometry::mask::load_mask;
use crate::geometry::{BlendReference, ComponentSchedule, ComponentSpec, ConstraintScope, LandmarkSet, WarpMap};

/// One reference of a multi-reference job; paths are relative to the job file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JobReference {
    pub image: PathBuf,
    pub landmarks: PathBuf,
    /// Component mask in the reference frame.
    pub mask: PathBuf,
    /// Weight inside this reference's warped mask; zero elsewhere.
    pub alpha: f64,
}

/// `{source, refs: [{image, landmarks, mask, alpha}], K, gamma, seed, cam: {component: t_c}}`
/// plus the source's landmarks and component masks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiTransferJob {
    pub source: PathBuf,
    pub source_landmarks: PathBuf,
    #[serde(default)]
    pub source_masks: BTreeMap<String, PathBuf>,
    pub refs: Vec<JobReference>,
    #[serde(rename = "K", default = "default_k")]
    pub k: usize,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub cam: ComponentSchedule,
    #[serde(default)]
    pub cam_mode: CamMode,
    #[serde(default)]
    pub scope: ConstraintScope,
    #[serde(default)]
    pub chain: EncodeChain,
}

fn default_k() -> usize {
    TranslateOptions::default().k
}

fn default_gamma() -> f64 {
    TranslateOptions::default().gamma
}

/// A job with every file loaded.
#[derive(Clone, Debug)]
pub struct ResolvedJob {
    pub source: TransferSource,
    pub refs: Vec<BlendReference>,
    pub options: TransferOptions,
}

impl MultiTransferJob {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Json {
            path: path.to_path_buf(),
            source: e,
        })
    }

    pub fn options(&self) -> TransferOptions {
        TransferOptions {
            translate: TranslateOptions {
                k: self.k,
                gamma: self.gamma,
                seed: self.seed,
                chain: self.chain,
                ..TranslateOptions::default()
            },
            cam: self.cam_mode,
            scope: self.scope,
            ..TransferOptions::default()
        }
    }

    /// Loads every referenced file, resolving paths against `base`.
    pub fn resolve(&self, base: &Path) -> Result<ResolvedJob> {
        let image = load_image(&base.join(&self.source))?;
        let (h, w) = (image.shape()[0], image.shape()[1]);
        let lm = LandmarkSet::load(&base.join(&self.source_landmarks))?;
        lm.validate(h, w)?;
        let components = self
            .source_masks
            .iter()
            .map(|(name, p)| {
                let t_c = self
                    .cam
                    .get(name)
                    .ok_or_else(|| Error::invalid(format!("unknown component {name}")))?;
                Ok(ComponentSpec {
                    name: name.clone(),
                    mask: load_mask(&base.join(p))?,
                    alpha: 1.0,
                    t_c,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let source = TransferSource::new(image, lm.points, components)?;
        let refs = self
            .refs
            .iter()
            .map(|r| {
                let rlm = LandmarkSet::load(&base.join(&r.landmarks))?;
                let img = load_image(&base.join(&r.image))?;
                rlm.validate(img.shape()[0], img.shape()[1])?;
                rlm.check_correspondence(&LandmarkSet {
                    points: source.landmarks.clone(),
                    components: BTreeMap::new(),
                })?;
                if !(0.0..=1.0).contains(&r.alpha) {
                    return Err(Error::invalid(format!("reference weight {} outside [0, 1]", r.alpha)));
                }
                let mask = load_mask(&base.join(&r.mask))?;
                let own = WarpMap::new(&source.landmarks, &rlm.points, h, w)?.apply_mask(&mask)?;
                Ok(BlendReference {
                    image: img,
                    landmarks: rlm.points,
                    mask,
                    alpha: own.scale(r.alpha),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ResolvedJob {
            source,
            refs,
            options: self.options(),
        })
    }
}
