use crate::dataset::quantize;
use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Deterministic map from an image to a fixed-length vector.
pub trait FeatureExtractor {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    fn extract(&self, img: &Tensor) -> Result<Vec<f64>>;
}

/// L1-normalized joint RGB histogram with `bins` levels per channel.
#[derive(Clone, Copy, Debug)]
pub struct ColorHistogram {
    pub bins: usize,
}

impl Default for ColorHistogram {
    fn default() -> Self {
        Self { bins: 8 }
    }
}

impl FeatureExtractor for ColorHistogram {
    fn name(&self) -> &str {
        "color_histogram"
    }

    fn dim(&self) -> usize {
        self.bins.pow(3)
    }

    fn extract(&self, img: &Tensor) -> Result<Vec<f64>> {
        color_histogram_features(img, self.bins)
    }
}

pub fn color_histogram_features(img: &Tensor, bins: usize) -> Result<Vec<f64>> {
    if !(1..=256).contains(&bins) {
        return Err(Error::invalid(format!("histogram bins {bins} outside 1..=256")));
    }
    if img.shape().len() != 3 || img.shape()[2] != 3 {
        return Err(Error::InvalidShape(img.shape().to_vec()));
    }
    let mut hist = vec![0.0; bins.pow(3)];
    let bin = |v: f64| quantize(v) as usize * bins / 256;
    for px in img.data().chunks_exact(3) {
        hist[(bin(px[0]) * bins + bin(px[1])) * bins + bin(px[2])] += 1.0;
    }
    let n = (img.len() / 3) as f64;
    hist.iter_mut().for_each(|v| *v /= n);
    Ok(hist)
}
