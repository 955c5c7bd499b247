//! Cross-domain translation by latent-code reuse: encode a source image's
//! stochastic denoising trajectory under one condition, then replay its
//! codes under another, optionally pinning regions to reference chains.

mod eps;
mod job;
mod latent;
mod tasks;

pub use eps::{EpsModel, GaussianOracle};
pub use job::{JobReference, MultiTransferJob, ResolvedJob};
pub use latent::{encode, generate, CamMode, EncodeChain, Init, LatentTrajectory, Preservation, ZeroSigma};
pub use tasks::{
    beauty_filter, blended_target, ddim_transfer, makeup_removal, makeup_transfer, multi_makeup_transfer, text_modify,
    translate, TransferOptions, TransferSource, TranslateOptions,
};
