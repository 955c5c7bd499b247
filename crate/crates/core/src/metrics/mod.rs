//! Image quality metrics, the kernel inception distance and the
//! feature-shift protocol used to score transfers.

mod features;
mod image;
mod kid;
mod report;

pub use features::{color_histogram_features, ColorHistogram, FeatureExtractor};
pub use image::{psnr, ssim, ssim_map, ssim_masked, to_pixel_scale, PSNR_CAP, SSIM_WINDOW};
pub use kid::{kid, polynomial_kernel};
pub use report::{feature_shift_eval, style_shift_kid, MetricReport, MetricSummary};
