use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Reported in place of +∞ for identical images.
pub const PSNR_CAP: f64 = 99.0;
/// Side of the Gaussian SSIM window.
pub const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const C1: f64 = (0.01 * 255.0) * (0.01 * 255.0);
const C2: f64 = (0.03 * 255.0) * (0.03 * 255.0);

/// Maps model range `[-1, 1]` onto `[0, 255]` without rounding.
pub fn to_pixel_scale(img: &Tensor) -> Tensor {
    img.map(|v| (v + 1.0) * 127.5)
}

fn hwc(img: &Tensor) -> Result<(usize, usize, usize)> {
    match *img.shape() {
        [h, w] => Ok((h, w, 1)),
        [h, w, c] => Ok((h, w, c)),
        _ => Err(Error::InvalidShape(img.shape().to_vec())),
    }
}

/// Peak signal-to-noise ratio in dB on the 8-bit scale.
pub fn psnr(a: &Tensor, b: &Tensor) -> Result<f64> {
    a.same_shape(b)?;
    hwc(a)?;
    let mse = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| ((x - y) * 127.5).powi(2))
        .sum::<f64>()
        / a.len() as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP);
    }
    Ok((10.0 * (255.0 * 255.0 / mse).log10()).min(PSNR_CAP))
}

fn gaussian_window() -> Vec<f64> {
    let r = (SSIM_WINDOW / 2) as f64;
    let g: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| (-((i as f64 - r).powi(2)) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
        .collect();
    let s: f64 = g.iter().sum();
    g.into_iter().map(|v| v / s).collect()
}

/// Channel-averaged local SSIM over the valid region, shape
/// `[h − 10, w − 10]`; entry `(y, x)` belongs to the window centered at
/// `(y + 5, x + 5)`.
pub fn ssim_map(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    a.same_shape(b)?;
    let (h, w, c) = hwc(a)?;
    if h < SSIM_WINDOW || w < SSIM_WINDOW {
        return Err(Error::invalid(format!(
            "SSIM needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got {h}x{w}"
        )));
    }
    let g = gaussian_window();
    let (oh, ow) = (h - SSIM_WINDOW + 1, w - SSIM_WINDOW + 1);
    let pa = to_pixel_scale(a);
    let pb = to_pixel_scale(b);
    let (pa, pb) = (pa.data(), pb.data());
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            let mut acc = 0.0;
            for ch in 0..c {
                let (mut ma, mut mb, mut aa, mut bb, mut ab) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for (dy, gy) in g.iter().enumerate() {
                    for (dx, gx) in g.iter().enumerate() {
                        let wgt = gy * gx;
                        let i = ((y + dy) * w + x + dx) * c + ch;
                        let (u, v) = (pa[i], pb[i]);
                        ma += wgt * u;
                        mb += wgt * v;
                        aa += wgt * u * u;
                        bb += wgt * v * v;
                        ab += wgt * u * v;
                    }
                }
                let va = aa - ma * ma;
                let vb = bb - mb * mb;
                let cov = ab - ma * mb;
                acc += ((2.0 * ma * mb + C1) * (2.0 * cov + C2)) / ((ma * ma + mb * mb + C1) * (va + vb + C2));
            }
            out[y * ow + x] = acc / c as f64;
        }
    }
    Tensor::new(&[oh, ow], out)
}

/// Mean SSIM with an 11×11 Gaussian window (σ = 1.5).
pub fn ssim(a: &Tensor, b: &Tensor) -> Result<f64> {
    Ok(ssim_map(a, b)?.mean())
}

/// Mean SSIM over windows whose center lies inside the binary `[h, w]` mask.
pub fn ssim_masked(a: &Tensor, b: &Tensor, mask: &Tensor) -> Result<f64> {
    let (h, w, _) = hwc(a)?;
    if mask.shape() != [h, w] {
        return Err(Error::ShapeMismatch {
            left: mask.shape().to_vec(),
            right: vec![h, w],
        });
    }
    let map = ssim_map(a, b)?;
    let (oh, ow) = (map.shape()[0], map.shape()[1]);
    let r = SSIM_WINDOW / 2;
    let (mut sum, mut n) = (0.0, 0usize);
    for y in 0..oh {
        for x in 0..ow {
            if mask.data()[(y + r) * w + x + r] == 1.0 {
                sum += map.data()[y * ow + x];
                n += 1;
            }
        }
    }
    if n == 0 {
        return Err(Error::invalid("mask selects no SSIM window centers"));
    }
    Ok(sum / n as f64)
}
