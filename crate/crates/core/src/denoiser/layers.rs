//! Layer primitives with explicit forward caches and backward passes.
//!
//! Dense activations are `[batch, features]` row-major. Convolutional
//! activations are single-sample `[channels, height, width]`.

use crate::numerics::gemm;

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[inline]
pub fn silu(x: f64) -> f64 {
    x * sigmoid(x)
}

#[inline]
pub fn silu_grad(x: f64) -> f64 {
    let s = sigmoid(x);
    s * (1.0 + x * (1.0 - s))
}

pub fn silu_vec(x: &[f64]) -> Vec<f64> {
    x.iter().map(|&v| silu(v)).collect()
}

/// `dy ⊙ silu'(x)`.
pub fn silu_backward(x: &[f64], dy: &[f64]) -> Vec<f64> {
    x.iter().zip(dy).map(|(&v, &g)| g * silu_grad(v)).collect()
}

/// Sinusoidal embedding of an integer timestep.
pub fn timestep_embedding(t: usize, dim: usize) -> Vec<f64> {
    let half = dim / 2;
    let mut out = vec![0.0; dim];
    for i in 0..half {
        let freq = (-(10_000f64.ln()) * i as f64 / half as f64).exp();
        let arg = t as f64 * freq;
        out[i] = arg.sin();
        out[half + i] = arg.cos();
    }
    out
}

/// `y = x·W + b` for `x: [batch, inp]`, `W: [inp, out]`.
pub fn dense_forward(x: &[f64], batch: usize, inp: usize, out: usize, w: &[f64], b: &[f64]) -> Vec<f64> {
    let mut y = Vec::with_capacity(batch * out);
    for _ in 0..batch {
        y.extend_from_slice(b);
    }
    gemm(batch, inp, out, x, false, w, false, &mut y, true);
    y
}

/// Accumulates `dW += xᵀ·dy`, `db += Σ dy` and returns `dx = dy·Wᵀ` when asked.
#[allow(clippy::too_many_arguments)]
pub fn dense_backward(
    x: &[f64],
    dy: &[f64],
    batch: usize,
    inp: usize,
    out: usize,
    w: &[f64],
    dw: &mut [f64],
    db: &mut [f64],
    want_dx: bool,
) -> Option<Vec<f64>> {
    gemm(inp, batch, out, x, true, dy, false, dw, true);
    for row in dy.chunks_exact(out) {
        for (d, g) in db.iter_mut().zip(row) {
            *d += g;
        }
    }
    want_dx.then(|| {
        let mut dx = vec![0.0; batch * inp];
        gemm(batch, out, inp, dy, false, w, true, &mut dx, false);
        dx
    })
}

/// `[c, h, w]` → `[c·9, h·w]` patches for a zero-padded 3×3 convolution.
fn im2col(x: &[f64], c: usize, h: usize, w: usize) -> Vec<f64> {
    let hw = h * w;
    let mut cols = vec![0.0; c * 9 * hw];
    for ci in 0..c {
        let plane = &x[ci * hw..(ci + 1) * hw];
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &mut cols[((ci * 9) + ky * 3 + kx) * hw..((ci * 9) + ky * 3 + kx + 1) * hw];
                for y in 0..h {
                    let sy = y as isize + ky as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    for x_ in 0..w {
                        let sx = x_ as isize + kx as isize - 1;
                        if sx < 0 || sx >= w as isize {
                            continue;
                        }
                        row[y * w + x_] = plane[sy as usize * w + sx as usize];
                    }
                }
            }
        }
    }
    cols
}

fn col2im(cols: &[f64], c: usize, h: usize, w: usize) -> Vec<f64> {
    let hw = h * w;
    let mut x = vec![0.0; c * hw];
    for ci in 0..c {
        for ky in 0..3 {
            for kx in 0..3 {
                let row = &cols[((ci * 9) + ky * 3 + kx) * hw..((ci * 9) + ky * 3 + kx + 1) * hw];
                for y in 0..h {
                    let sy = y as isize + ky as isize - 1;
                    if sy < 0 || sy >= h as isize {
                        continue;
                    }
                    for x_ in 0..w {
                        let sx = x_ as isize + kx as isize - 1;
                        if sx < 0 || sx >= w as isize {
                            continue;
                        }
                        x[ci * hw + sy as usize * w + sx as usize] += row[y * w + x_];
                    }
                }
            }
        }
    }
    x
}

#[derive(Clone, Copy, Debug)]
pub struct ConvDims {
    pub cin: usize,
    pub cout: usize,
    pub h: usize,
    pub w: usize,
}

pub struct ConvCache {
    cols: Vec<f64>,
}

/// Same-padded 3×3 convolution; weight `[cout, cin·9]`.
pub fn conv3x3_forward(x: &[f64], d: ConvDims, weight: &[f64], bias: &[f64]) -> (Vec<f64>, ConvCache) {
    let hw = d.h * d.w;
    let cols = im2col(x, d.cin, d.h, d.w);
    let mut y = Vec::with_capacity(d.cout * hw);
    for &b in bias {
        y.extend(std::iter::repeat(b).take(hw));
    }
    gemm(d.cout, d.cin * 9, hw, weight, false, &cols, false, &mut y, true);
    (y, ConvCache { cols })
}

pub fn conv3x3_backward(
    cache: &ConvCache,
    dy: &[f64],
    d: ConvDims,
    weight: &[f64],
    dweight: &mut [f64],
    dbias: &mut [f64],
) -> Vec<f64> {
    let hw = d.h * d.w;
    gemm(d.cout, hw, d.cin * 9, dy, false, &cache.cols, true, dweight, true);
    for (co, db) in dbias.iter_mut().enumerate() {
        *db += dy[co * hw..(co + 1) * hw].iter().sum::<f64>();
    }
    let mut dcols = vec![0.0; d.cin * 9 * hw];
    gemm(d.cin * 9, d.cout, hw, weight, true, dy, false, &mut dcols, false);
    col2im(&dcols, d.cin, d.h, d.w)
}

pub struct NormCache {
    xhat: Vec<f64>,
    inv_std: Vec<f64>,
}

pub const NORM_EPS: f64 = 1e-5;

/// Group normalization over `[c, hw]` with per-channel affine.
pub fn group_norm_forward(
    x: &[f64],
    c: usize,
    hw: usize,
    groups: usize,
    gain: &[f64],
    bias: &[f64],
) -> (Vec<f64>, NormCache) {
    let per = c / groups;
    let n = (per * hw) as f64;
    let mut xhat = vec![0.0; x.len()];
    let mut inv_std = Vec::with_capacity(groups);
    for g in 0..groups {
        let span = &x[g * per * hw..(g + 1) * per * hw];
        let mean = span.iter().sum::<f64>() / n;
        let var = span.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let is = 1.0 / (var + NORM_EPS).sqrt();
        inv_std.push(is);
        for (o, v) in xhat[g * per * hw..(g + 1) * per * hw].iter_mut().zip(span) {
            *o = (v - mean) * is;
        }
    }
    let mut y = xhat.clone();
    for ch in 0..c {
        for v in &mut y[ch * hw..(ch + 1) * hw] {
            *v = *v * gain[ch] + bias[ch];
        }
    }
    (y, NormCache { xhat, inv_std })
}

#[allow(clippy::too_many_arguments)]
pub fn group_norm_backward(
    cache: &NormCache,
    dy: &[f64],
    c: usize,
    hw: usize,
    groups: usize,
    gain: &[f64],
    dgain: &mut [f64],
    dbias: &mut [f64],
) -> Vec<f64> {
    let per = c / groups;
    let n = (per * hw) as f64;
    let mut dxhat = vec![0.0; dy.len()];
    for ch in 0..c {
        let r = ch * hw..(ch + 1) * hw;
        for i in r.clone() {
            dgain[ch] += dy[i] * cache.xhat[i];
            dbias[ch] += dy[i];
            dxhat[i] = dy[i] * gain[ch];
        }
    }
    let mut dx = vec![0.0; dy.len()];
    for g in 0..groups {
        let r = g * per * hw..(g + 1) * per * hw;
        let sum_d: f64 = dxhat[r.clone()].iter().sum();
        let sum_dx: f64 = dxhat[r.clone()]
            .iter()
            .zip(&cache.xhat[r.clone()])
            .map(|(a, b)| a * b)
            .sum();
        let is = cache.inv_std[g];
        for i in r {
            dx[i] = is / n * (n * dxhat[i] - sum_d - cache.xhat[i] * sum_dx);
        }
    }
    dx
}

/// 2×2 average pooling of `[c, h, w]`.
pub fn avg_pool2(x: &[f64], c: usize, h: usize, w: usize) -> Vec<f64> {
    let (ho, wo) = (h / 2, w / 2);
    let mut y = vec![0.0; c * ho * wo];
    for ch in 0..c {
        for yy in 0..ho {
            for xx in 0..wo {
                let base = ch * h * w;
                let s = x[base + 2 * yy * w + 2 * xx]
                    + x[base + 2 * yy * w + 2 * xx + 1]
                    + x[base + (2 * yy + 1) * w + 2 * xx]
                    + x[base + (2 * yy + 1) * w + 2 * xx + 1];
                y[ch * ho * wo + yy * wo + xx] = 0.25 * s;
            }
        }
    }
    y
}

pub fn avg_pool2_backward(dy: &[f64], c: usize, h: usize, w: usize) -> Vec<f64> {
    let (ho, wo) = (h / 2, w / 2);
    let mut dx = vec![0.0; c * h * w];
    for ch in 0..c {
        for y in 0..h {
            for x in 0..w {
                dx[ch * h * w + y * w + x] = 0.25 * dy[ch * ho * wo + (y / 2) * wo + x / 2];
            }
        }
    }
    dx
}

/// Nearest-neighbour 2× upsampling of `[c, h, w]`.
pub fn upsample2(x: &[f64], c: usize, h: usize, w: usize) -> Vec<f64> {
    let (ho, wo) = (2 * h, 2 * w);
    let mut y = vec![0.0; c * ho * wo];
    for ch in 0..c {
        for yy in 0..ho {
            for xx in 0..wo {
                y[ch * ho * wo + yy * wo + xx] = x[ch * h * w + (yy / 2) * w + xx / 2];
            }
        }
    }
    y
}

pub fn upsample2_backward(dy: &[f64], c: usize, h: usize, w: usize) -> Vec<f64> {
    let (ho, wo) = (2 * h, 2 * w);
    let mut dx = vec![0.0; c * h * w];
    for ch in 0..c {
        for yy in 0..ho {
            for xx in 0..wo {
                dx[ch * h * w + (yy / 2) * w + xx / 2] += dy[ch * ho * wo + yy * wo + xx];
            }
        }
    }
    dx
}

/// `[h, w, c]` → `[c, h, w]`.
pub fn hwc_to_chw(x: &[f64], h: usize, w: usize, c: usize) -> Vec<f64> {
    let mut y = vec![0.0; x.len()];
    for p in 0..h * w {
        for ch in 0..c {
            y[ch * h * w + p] = x[p * c + ch];
        }
    }
    y
}

pub fn chw_to_hwc(x: &[f64], h: usize, w: usize, c: usize) -> Vec<f64> {
    let mut y = vec![0.0; x.len()];
    for p in 0..h * w {
        for ch in 0..c {
            y[p * c + ch] = x[ch * h * w + p];
        }
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;

    fn numeric_grad(f: impl Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
        let h = 1e-6;
        (0..x.len())
            .map(|i| {
                let mut p = x.to_vec();
                let mut m = x.to_vec();
                p[i] += h;
                m[i] -= h;
                (f(&p) - f(&m)) / (2.0 * h)
            })
            .collect()
    }

    fn probe(n: usize, seed: f64) -> Vec<f64> {
        (0..n).map(|i| ((i as f64 + 1.0) * seed).sin()).collect()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) {
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol * (1.0 + y.abs()), "{x} vs {y}");
        }
    }

    #[test]
    fn silu_derivative() {
        for x in [-3.0, -0.5, 0.0, 0.7, 4.0] {
            let h = 1e-6;
            let fd = (silu(x + h) - silu(x - h)) / (2.0 * h);
            assert!((fd - silu_grad(x)).abs() < 1e-8);
        }
    }

    #[test]
    fn conv_gradients() {
        let d = ConvDims { cin: 2, cout: 3, h: 4, w: 5 };
        let x = probe(d.cin * 20, 0.37);
        let w = probe(d.cout * d.cin * 9, 0.91);
        let b = probe(d.cout, 1.3);
        let r = probe(d.cout * 20, 0.17);
        let loss = |x: &[f64], w: &[f64]| {
            let (y, _) = conv3x3_forward(x, d, w, &b);
            y.iter().zip(&r).map(|(a, b)| a * b).sum::<f64>()
        };
        let (_, cache) = conv3x3_forward(&x, d, &w, &b);
        let mut dw = vec![0.0; w.len()];
        let mut db = vec![0.0; b.len()];
        let dx = conv3x3_backward(&cache, &r, d, &w, &mut dw, &mut db);
        close(&dx, &numeric_grad(|x| loss(x, &w), &x), 1e-6);
        close(&dw, &numeric_grad(|w| loss(&x, w), &w), 1e-6);
    }

    #[test]
    fn group_norm_gradients() {
        let (c, hw, groups) = (4, 6, 2);
        let x = probe(c * hw, 0.53);
        let gain = probe(c, 0.7);
        let bias = probe(c, 0.2);
        let r = probe(c * hw, 1.9);
        let loss = |x: &[f64], g: &[f64]| {
            let (y, _) = group_norm_forward(x, c, hw, groups, g, &bias);
            y.iter().zip(&r).map(|(a, b)| a * b).sum::<f64>()
        };
        let (_, cache) = group_norm_forward(&x, c, hw, groups, &gain, &bias);
        let mut dg = vec![0.0; c];
        let mut db = vec![0.0; c];
        let dx = group_norm_backward(&cache, &r, c, hw, groups, &gain, &mut dg, &mut db);
        close(&dx, &numeric_grad(|x| loss(x, &gain), &x), 1e-5);
        close(&dg, &numeric_grad(|g| loss(&x, g), &gain), 1e-6);
    }

    #[test]
    fn resampling_adjoints() {
        let (c, h, w) = (2, 4, 6);
        let x = probe(c * h * w, 0.3);
        let r_small = probe(c * h * w / 4, 0.8);
        // <pool(x), r> == <x, pool^T(r)>
        let lhs: f64 = avg_pool2(&x, c, h, w).iter().zip(&r_small).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.iter().zip(avg_pool2_backward(&r_small, c, h, w)).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
        let up = upsample2(&r_small, c, h / 2, w / 2);
        let lhs: f64 = up.iter().zip(&x).map(|(a, b)| a * b).sum();
        let rhs: f64 = r_small
            .iter()
            .zip(upsample2_backward(&x, c, h / 2, w / 2))
            .map(|(a, b)| a * b)
            .sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn layout_round_trip() {
        let x = probe(2 * 3 * 4, 0.4);
        assert_eq!(chw_to_hwc(&hwc_to_chw(&x, 2, 3, 4), 2, 3, 4), x);
    }
}
