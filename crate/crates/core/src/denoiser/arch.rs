//! The fixed network graphs behind the ε-predictor.
//!
//! Every network maps a preconditioned input batch `u: [batch, d]` and a
//! per-sample conditioning vector `c: [batch, cond_hidden]` to a raw output
//! `F: [batch, d]`. Conditioning enters through feature-wise affine
//! modulation `h ← h ⊙ (1 + γ(c)) + β(c)`.

use serde::{Deserialize, Serialize};

use super::layers::*;
use super::params::{Grads, Init, ParamId, ParamSet};
use crate::error::{Error, Result};
use crate::numerics::RngState;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Architecture {
    /// Residual MLP over the flattened image.
    Mlp { hidden: usize, blocks: usize },
    /// Full-resolution stack of residual conv blocks.
    ConvNet { width: usize, blocks: usize, groups: usize },
    /// U-shaped conv net; one downsampling per entry after the first width.
    UNet { widths: Vec<usize>, groups: usize },
}

impl Architecture {
    pub fn name(&self) -> &'static str {
        match self {
            Architecture::Mlp { .. } => "mlp",
            Architecture::ConvNet { .. } => "conv_net",
            Architecture::UNet { .. } => "unet",
        }
    }
}

pub(crate) enum Net {
    Mlp(MlpNet),
    Conv(ConvUNet),
}

pub(crate) enum NetCache {
    Mlp(MlpCache),
    Conv(Vec<ConvSampleCache>, Vec<Vec<f64>>),
}

impl Net {
    pub fn build(
        arch: &Architecture,
        image_shape: [usize; 3],
        cond_hidden: usize,
        ps: &mut ParamSet,
        rng: &mut RngState,
    ) -> Result<Net> {
        match arch {
            Architecture::Mlp { hidden, blocks } => {
                if *hidden == 0 {
                    return Err(Error::invalid("mlp hidden width must be positive"));
                }
                let d = image_shape.iter().product();
                Ok(Net::Mlp(MlpNet::build(d, *hidden, *blocks, cond_hidden, ps, rng)))
            }
            Architecture::ConvNet { width, blocks, groups } => Ok(Net::Conv(ConvUNet::build(
                image_shape,
                &[*width],
                (*blocks).max(1),
                *groups,
                cond_hidden,
                ps,
                rng,
            )?)),
            Architecture::UNet { widths, groups } => {
                if widths.is_empty() {
                    return Err(Error::invalid("unet needs at least one width"));
                }
                let levels = widths.len() - 1;
                let div = 1usize << levels;
                if image_shape[0] % div != 0 || image_shape[1] % div != 0 {
                    return Err(Error::invalid(format!(
                        "image {}x{} not divisible by 2^{levels}",
                        image_shape[0], image_shape[1]
                    )));
                }
                Ok(Net::Conv(ConvUNet::build(image_shape, widths, 1, *groups, cond_hidden, ps, rng)?))
            }
        }
    }

    pub fn forward(&self, ps: &ParamSet, u: &[f64], batch: usize, cvec: &[f64]) -> (Vec<f64>, NetCache) {
        match self {
            Net::Mlp(n) => {
                let (y, c) = n.forward(ps, u, batch, cvec);
                (y, NetCache::Mlp(c))
            }
            Net::Conv(n) => n.forward(ps, u, batch, cvec),
        }
    }

    /// Accumulates parameter gradients and returns `∂L/∂c`.
    pub fn backward(&self, ps: &ParamSet, cache: &NetCache, dy: &[f64], batch: usize, cvec: &[f64], grads: &mut Grads) -> Vec<f64> {
        match (self, cache) {
            (Net::Mlp(n), NetCache::Mlp(c)) => n.backward(ps, c, dy, batch, cvec, grads),
            (Net::Conv(n), NetCache::Conv(c, gb)) => n.backward(ps, c, gb, dy, batch, cvec, grads),
            _ => unreachable!("cache from a different network"),
        }
    }
}

struct Dense {
    w: ParamId,
    b: ParamId,
    inp: usize,
    out: usize,
}

impl Dense {
    fn new(name: &str, inp: usize, out: usize, gain: f64, ps: &mut ParamSet, rng: &mut RngState) -> Self {
        let w = ps.register(format!("{name}.weight"), &[inp, out], Init::Normal(gain / (inp as f64).sqrt()), rng);
        let b = ps.register(format!("{name}.bias"), &[out], Init::Zeros, rng);
        Self { w, b, inp, out }
    }

    fn forward(&self, ps: &ParamSet, x: &[f64], batch: usize) -> Vec<f64> {
        dense_forward(x, batch, self.inp, self.out, ps.get(self.w), ps.get(self.b))
    }

    fn backward(&self, ps: &ParamSet, x: &[f64], dy: &[f64], batch: usize, grads: &mut Grads, want_dx: bool) -> Option<Vec<f64>> {
        let (dw, db) = grads.pair_mut(self.w, self.b);
        dense_backward(x, dy, batch, self.inp, self.out, ps.get(self.w), dw, db, want_dx)
    }
}

/// FiLM head: produces `[γ | β]` of width `2·features` per sample.
fn film(name: &str, cond_hidden: usize, features: usize, ps: &mut ParamSet, rng: &mut RngState) -> Dense {
    Dense::new(name, cond_hidden, 2 * features, 0.1, ps, rng)
}

// ---------------------------------------------------------------- MLP

struct MlpBlock {
    fc1: Dense,
    fc2: Dense,
    film: Dense,
}

pub(crate) struct MlpNet {
    d: usize,
    hidden: usize,
    input: Dense,
    blocks: Vec<MlpBlock>,
    output: Dense,
}

pub(crate) struct MlpCache {
    u: Vec<f64>,
    /// Residual stream entering each block, plus the final stream.
    hs: Vec<Vec<f64>>,
    blocks: Vec<MlpBlockCache>,
    a_out: Vec<f64>,
}

struct MlpBlockCache {
    a: Vec<f64>,
    p: Vec<f64>,
    gb: Vec<f64>,
    q: Vec<f64>,
    r: Vec<f64>,
}

impl MlpNet {
    fn build(d: usize, hidden: usize, blocks: usize, cond_hidden: usize, ps: &mut ParamSet, rng: &mut RngState) -> Self {
        let input = Dense::new("mlp.input", d, hidden, 1.0, ps, rng);
        let blocks = (0..blocks)
            .map(|i| MlpBlock {
                fc1: Dense::new(&format!("mlp.block{i}.fc1"), hidden, hidden, 1.0, ps, rng),
                film: film(&format!("mlp.block{i}.film"), cond_hidden, hidden, ps, rng),
                fc2: Dense::new(&format!("mlp.block{i}.fc2"), hidden, hidden, 0.5, ps, rng),
            })
            .collect();
        let output = Dense::new("mlp.output", hidden, d, 1.0, ps, rng);
        Self {
            d,
            hidden,
            input,
            blocks,
            output,
        }
    }

    fn forward(&self, ps: &ParamSet, u: &[f64], batch: usize, cvec: &[f64]) -> (Vec<f64>, MlpCache) {
        let hdim = self.hidden;
        let mut h = self.input.forward(ps, u, batch);
        let mut hs = Vec::with_capacity(self.blocks.len() + 1);
        let mut caches = Vec::with_capacity(self.blocks.len());
        for blk in &self.blocks {
            let a = silu_vec(&h);
            let p = blk.fc1.forward(ps, &a, batch);
            let gb = blk.film.forward(ps, cvec, batch);
            let mut q = p.clone();
            for b in 0..batch {
                let (g, be) = gb[b * 2 * hdim..(b + 1) * 2 * hdim].split_at(hdim);
                for j in 0..hdim {
                    q[b * hdim + j] = p[b * hdim + j] * (1.0 + g[j]) + be[j];
                }
            }
            let r = silu_vec(&q);
            let s = blk.fc2.forward(ps, &r, batch);
            let next: Vec<f64> = h.iter().zip(&s).map(|(x, y)| x + y).collect();
            hs.push(std::mem::replace(&mut h, next));
            caches.push(MlpBlockCache { a, p, gb, q, r });
        }
        let a_out = silu_vec(&h);
        hs.push(h);
        let y = self.output.forward(ps, &a_out, batch);
        (
            y,
            MlpCache {
                u: u.to_vec(),
                hs,
                blocks: caches,
                a_out,
            },
        )
    }

    fn backward(&self, ps: &ParamSet, c: &MlpCache, dy: &[f64], batch: usize, cvec: &[f64], grads: &mut Grads) -> Vec<f64> {
        let hdim = self.hidden;
        let da_out = self.output.backward(ps, &c.a_out, dy, batch, grads, true).unwrap();
        let mut dh = silu_backward(c.hs.last().unwrap(), &da_out);
        let mut dcvec = vec![0.0; cvec.len()];
        for (i, blk) in self.blocks.iter().enumerate().rev() {
            let bc = &c.blocks[i];
            let dr = blk.fc2.backward(ps, &bc.r, &dh, batch, grads, true).unwrap();
            let dq = silu_backward(&bc.q, &dr);
            let mut dp = vec![0.0; dq.len()];
            let mut dgb = vec![0.0; batch * 2 * hdim];
            for b in 0..batch {
                for j in 0..hdim {
                    let k = b * hdim + j;
                    let g = bc.gb[b * 2 * hdim + j];
                    dp[k] = dq[k] * (1.0 + g);
                    dgb[b * 2 * hdim + j] = dq[k] * bc.p[k];
                    dgb[b * 2 * hdim + hdim + j] = dq[k];
                }
            }
            let dc = blk.film.backward(ps, cvec, &dgb, batch, grads, true).unwrap();
            for (a, b) in dcvec.iter_mut().zip(&dc) {
                *a += b;
            }
            let da = blk.fc1.backward(ps, &bc.a, &dp, batch, grads, true).unwrap();
            let through = silu_backward(&c.hs[i], &da);
            for (a, b) in dh.iter_mut().zip(&through) {
                *a += b;
            }
        }
        self.input.backward(ps, &c.u, &dh, batch, grads, false);
        debug_assert_eq!(dy.len(), batch * self.d);
        dcvec
    }
}

// ---------------------------------------------------------- conv nets

struct Conv {
    w: ParamId,
    b: ParamId,
    cin: usize,
    cout: usize,
}

impl Conv {
    fn new(name: &str, cin: usize, cout: usize, gain: f64, ps: &mut ParamSet, rng: &mut RngState) -> Self {
        let sd = gain / ((cin * 9) as f64).sqrt();
        let w = ps.register(format!("{name}.weight"), &[cout, cin * 9], Init::Normal(sd), rng);
        let b = ps.register(format!("{name}.bias"), &[cout], Init::Zeros, rng);
        Self { w, b, cin, cout }
    }

    fn dims(&self, h: usize, w: usize) -> ConvDims {
        ConvDims {
            cin: self.cin,
            cout: self.cout,
            h,
            w,
        }
    }

    fn forward(&self, ps: &ParamSet, x: &[f64], h: usize, w: usize) -> (Vec<f64>, ConvCache) {
        conv3x3_forward(x, self.dims(h, w), ps.get(self.w), ps.get(self.b))
    }

    fn backward(&self, ps: &ParamSet, cache: &ConvCache, dy: &[f64], h: usize, w: usize, grads: &mut Grads) -> Vec<f64> {
        let (dw, db) = grads.pair_mut(self.w, self.b);
        conv3x3_backward(cache, dy, self.dims(h, w), ps.get(self.w), dw, db)
    }
}

struct Norm {
    gain: ParamId,
    bias: ParamId,
    c: usize,
    groups: usize,
}

impl Norm {
    fn new(name: &str, c: usize, groups: usize, ps: &mut ParamSet, rng: &mut RngState) -> Self {
        let gain = ps.register(format!("{name}.gain"), &[c], Init::Ones, rng);
        let bias = ps.register(format!("{name}.bias"), &[c], Init::Zeros, rng);
        Self { gain, bias, c, groups }
    }

    fn forward(&self, ps: &ParamSet, x: &[f64], hw: usize) -> (Vec<f64>, NormCache) {
        group_norm_forward(x, self.c, hw, self.groups, ps.get(self.gain), ps.get(self.bias))
    }

    fn backward(&self, ps: &ParamSet, cache: &NormCache, dy: &[f64], hw: usize, grads: &mut Grads) -> Vec<f64> {
        let (dg, db) = grads.pair_mut(self.gain, self.bias);
        group_norm_backward(cache, dy, self.c, hw, self.groups, ps.get(self.gain), dg, db)
    }
}

struct ResBlock {
    c: usize,
    norm1: Norm,
    conv1: Conv,
    film: Dense,
    norm2: Norm,
    conv2: Conv,
}

struct ResCache {
    n1: NormCache,
    a1: Vec<f64>,
    c1: ConvCache,
    p: Vec<f64>,
    n2: NormCache,
    a2: Vec<f64>,
    c2: ConvCache,
}

impl ResBlock {
    fn new(name: &str, c: usize, groups: usize, cond_hidden: usize, ps: &mut ParamSet, rng: &mut RngState) -> Self {
        Self {
            c,
            norm1: Norm::new(&format!("{name}.norm1"), c, groups, ps, rng),
            conv1: Conv::new(&format!("{name}.conv1"), c, c, 1.0, ps, rng),
            film: film(&format!("{name}.film"), cond_hidden, c, ps, rng),
            norm2: Norm::new(&format!("{name}.norm2"), c, groups, ps, rng),
            conv2: Conv::new(&format!("{name}.conv2"), c, c, 0.5, ps, rng),
        }
    }

    /// `gb` is this sample's `[γ | β]` slice.
    fn forward(&self, ps: &ParamSet, x: &[f64], gb: &[f64], h: usize, w: usize) -> (Vec<f64>, ResCache) {
        let hw = h * w;
        let (y1, n1) = self.norm1.forward(ps, x, hw);
        let s1 = silu_vec(&y1);
        let (p, c1) = self.conv1.forward(ps, &s1, h, w);
        let (g, b) = gb.split_at(self.c);
        let mut q = p.clone();
        for ch in 0..self.c {
            for v in &mut q[ch * hw..(ch + 1) * hw] {
                *v = *v * (1.0 + g[ch]) + b[ch];
            }
        }
        let (y2, n2) = self.norm2.forward(ps, &q, hw);
        let s2 = silu_vec(&y2);
        let (o, c2) = self.conv2.forward(ps, &s2, h, w);
        let out = x.iter().zip(&o).map(|(a, b)| a + b).collect();
        (
            out,
            ResCache {
                n1,
                a1: y1,
                c1,
                p,
                n2,
                a2: y2,
                c2,
            },
        )
    }

    /// Returns `dx`; writes this sample's `[dγ | dβ]` into `dgb`.
    #[allow(clippy::too_many_arguments)]
    fn backward(&self, ps: &ParamSet, rc: &ResCache, gb: &[f64], dy: &[f64], h: usize, w: usize, dgb: &mut [f64], grads: &mut Grads) -> Vec<f64> {
        let hw = h * w;
        let ds2 = self.conv2.backward(ps, &rc.c2, dy, h, w, grads);
        let dy2 = silu_backward(&rc.a2, &ds2);
        let dq = self.norm2.backward(ps, &rc.n2, &dy2, hw, grads);
        let mut dp = dq.clone();
        for ch in 0..self.c {
            let mut dg = 0.0;
            let mut db = 0.0;
            for i in ch * hw..(ch + 1) * hw {
                dg += dq[i] * rc.p[i];
                db += dq[i];
                dp[i] = dq[i] * (1.0 + gb[ch]);
            }
            dgb[ch] += dg;
            dgb[self.c + ch] += db;
        }
        let ds1 = self.conv1.backward(ps, &rc.c1, &dp, h, w, grads);
        let dy1 = silu_backward(&rc.a1, &ds1);
        let dx1 = self.norm1.backward(ps, &rc.n1, &dy1, hw, grads);
        dy.iter().zip(&dx1).map(|(a, b)| a + b).collect()
    }
}

/// Shared implementation of the conv stack (`widths.len() == 1`) and the
/// U-shaped network.
pub(crate) struct ConvUNet {
    h: usize,
    w: usize,
    c: usize,
    widths: Vec<usize>,
    stem: Conv,
    down_blocks: Vec<ResBlock>,
    down_convs: Vec<Conv>,
    mid: Vec<ResBlock>,
    up_convs: Vec<Conv>,
    up_blocks: Vec<ResBlock>,
    out_norm: Norm,
    out_conv: Conv,
}

pub(crate) struct ConvSampleCache {
    stem: ConvCache,
    down: Vec<ResCache>,
    pooled: Vec<ConvCache>,
    mid: Vec<ResCache>,
    up_conv: Vec<ConvCache>,
    up: Vec<ResCache>,
    out_norm: NormCache,
    out_pre: Vec<f64>,
    out_conv: ConvCache,
}

fn check_groups(width: usize, groups: usize) -> Result<()> {
    if groups == 0 || width % groups != 0 {
        return Err(Error::invalid(format!("group count {groups} must divide width {width}")));
    }
    Ok(())
}

impl ConvUNet {
    fn build(
        shape: [usize; 3],
        widths: &[usize],
        mid_blocks: usize,
        groups: usize,
        cond_hidden: usize,
        ps: &mut ParamSet,
        rng: &mut RngState,
    ) -> Result<Self> {
        for &w in widths {
            check_groups(w, groups)?;
        }
        let [h, w, c] = shape;
        let levels = widths.len() - 1;
        let stem = Conv::new("stem", c, widths[0], 1.0, ps, rng);
        let mut down_blocks = Vec::new();
        let mut down_convs = Vec::new();
        for i in 0..levels {
            down_blocks.push(ResBlock::new(&format!("down{i}"), widths[i], groups, cond_hidden, ps, rng));
            down_convs.push(Conv::new(&format!("down{i}.proj"), widths[i], widths[i + 1], 1.0, ps, rng));
        }
        let mid = (0..mid_blocks)
            .map(|i| ResBlock::new(&format!("mid{i}"), widths[levels], groups, cond_hidden, ps, rng))
            .collect();
        let mut up_convs = Vec::new();
        let mut up_blocks = Vec::new();
        for i in (0..levels).rev() {
            up_convs.push(Conv::new(&format!("up{i}.proj"), widths[i + 1], widths[i], 1.0, ps, rng));
            up_blocks.push(ResBlock::new(&format!("up{i}"), widths[i], groups, cond_hidden, ps, rng));
        }
        let out_norm = Norm::new("out.norm", widths[0], groups, ps, rng);
        let out_conv = Conv::new("out.conv", widths[0], c, 1.0, ps, rng);
        Ok(Self {
            h,
            w,
            c,
            widths: widths.to_vec(),
            stem,
            down_blocks,
            down_convs,
            mid,
            up_convs,
            up_blocks,
            out_norm,
            out_conv,
        })
    }

    fn levels(&self) -> usize {
        self.widths.len() - 1
    }

    fn res_blocks(&self) -> impl Iterator<Item = &ResBlock> {
        self.down_blocks.iter().chain(&self.mid).chain(&self.up_blocks)
    }

    fn film_offsets(&self) -> (Vec<usize>, usize) {
        let mut offs = Vec::new();
        let mut acc = 0;
        for b in self.res_blocks() {
            offs.push(acc);
            acc += 2 * b.c;
        }
        (offs, acc)
    }

    fn forward(&self, ps: &ParamSet, u: &[f64], batch: usize, cvec: &[f64]) -> (Vec<f64>, NetCache) {
        let d = self.h * self.w * self.c;
        let (offs, total) = self.film_offsets();
        // [batch, total] modulation for every block, computed batched.
        let mut gb_all = vec![0.0; batch * total];
        for (bi, blk) in self.res_blocks().enumerate() {
            let gb = blk.film.forward(ps, cvec, batch);
            for s in 0..batch {
                gb_all[s * total + offs[bi]..s * total + offs[bi] + 2 * blk.c]
                    .copy_from_slice(&gb[s * 2 * blk.c..(s + 1) * 2 * blk.c]);
            }
        }
        let mut out = Vec::with_capacity(batch * d);
        let mut caches = Vec::with_capacity(batch);
        let levels = self.levels();
        let nd = self.down_blocks.len();
        let nm = self.mid.len();
        for s in 0..batch {
            let gbs = &gb_all[s * total..(s + 1) * total];
            let x = hwc_to_chw(&u[s * d..(s + 1) * d], self.h, self.w, self.c);
            let (mut hcur, stem) = self.stem.forward(ps, &x, self.h, self.w);
            let (mut hh, mut ww) = (self.h, self.w);
            let mut skips = Vec::with_capacity(levels);
            let mut down = Vec::with_capacity(levels);
            let mut pooled = Vec::with_capacity(levels);
            for i in 0..levels {
                let blk = &self.down_blocks[i];
                let (y, rc) = blk.forward(ps, &hcur, &gbs[offs[i]..offs[i] + 2 * blk.c], hh, ww);
                down.push(rc);
                let p = avg_pool2(&y, blk.c, hh, ww);
                skips.push(y);
                hh /= 2;
                ww /= 2;
                let (y2, cc) = self.down_convs[i].forward(ps, &p, hh, ww);
                pooled.push(cc);
                hcur = y2;
            }
            let mut mid = Vec::with_capacity(nm);
            for (j, blk) in self.mid.iter().enumerate() {
                let o = offs[nd + j];
                let (y, rc) = blk.forward(ps, &hcur, &gbs[o..o + 2 * blk.c], hh, ww);
                mid.push(rc);
                hcur = y;
            }
            let mut up_conv = Vec::with_capacity(levels);
            let mut up = Vec::with_capacity(levels);
            for k in 0..levels {
                let i = levels - 1 - k;
                let upx = upsample2(&hcur, self.widths[i + 1], hh, ww);
                hh *= 2;
                ww *= 2;
                let (mut y, cc) = self.up_convs[k].forward(ps, &upx, hh, ww);
                up_conv.push(cc);
                for (a, b) in y.iter_mut().zip(&skips[i]) {
                    *a += b;
                }
                let blk = &self.up_blocks[k];
                let o = offs[nd + nm + k];
                let (y2, rc) = blk.forward(ps, &y, &gbs[o..o + 2 * blk.c], hh, ww);
                up.push(rc);
                hcur = y2;
            }
            let (yn, out_norm) = self.out_norm.forward(ps, &hcur, hh * ww);
            let sn = silu_vec(&yn);
            let (yo, out_conv) = self.out_conv.forward(ps, &sn, hh, ww);
            out.extend(chw_to_hwc(&yo, self.h, self.w, self.c));
            caches.push(ConvSampleCache {
                stem,
                down,
                pooled,
                mid,
                up_conv,
                up,
                out_norm,
                out_pre: yn,
                out_conv,
            });
        }
        (out, NetCache::Conv(caches, vec![gb_all]))
    }

    #[allow(clippy::too_many_arguments)]
    fn backward(
        &self,
        ps: &ParamSet,
        caches: &[ConvSampleCache],
        gb_store: &[Vec<f64>],
        dy: &[f64],
        batch: usize,
        cvec: &[f64],
        grads: &mut Grads,
    ) -> Vec<f64> {
        let d = self.h * self.w * self.c;
        let (offs, total) = self.film_offsets();
        let gb_all = &gb_store[0];
        let mut dgb_all = vec![0.0; batch * total];
        let levels = self.levels();
        let nd = self.down_blocks.len();
        let nm = self.mid.len();
        for s in 0..batch {
            let sc = &caches[s];
            let gbs = &gb_all[s * total..(s + 1) * total];
            let dgbs = &mut dgb_all[s * total..(s + 1) * total];
            let (mut hh, mut ww) = (self.h >> levels, self.w >> levels);
            hh <<= levels;
            ww <<= levels;
            let dyo = hwc_to_chw(&dy[s * d..(s + 1) * d], self.h, self.w, self.c);
            let dsn = self.out_conv.backward(ps, &sc.out_conv, &dyo, hh, ww, grads);
            let dyn_ = silu_backward(&sc.out_pre, &dsn);
            let mut dh = self.out_norm.backward(ps, &sc.out_norm, &dyn_, hh * ww, grads);
            let mut dskips: Vec<Vec<f64>> = vec![Vec::new(); levels];
            for k in (0..levels).rev() {
                let i = levels - 1 - k;
                let blk = &self.up_blocks[k];
                let o = offs[nd + nm + k];
                let dsum = blk.backward(ps, &sc.up[k], &gbs[o..o + 2 * blk.c], &dh, hh, ww, &mut dgbs[o..o + 2 * blk.c], grads);
                dskips[i] = dsum.clone();
                let dupx = self.up_convs[k].backward(ps, &sc.up_conv[k], &dsum, hh, ww, grads);
                hh /= 2;
                ww /= 2;
                dh = upsample2_backward(&dupx, self.widths[i + 1], hh, ww);
            }
            for j in (0..nm).rev() {
                let blk = &self.mid[j];
                let o = offs[nd + j];
                dh = blk.backward(ps, &sc.mid[j], &gbs[o..o + 2 * blk.c], &dh, hh, ww, &mut dgbs[o..o + 2 * blk.c], grads);
            }
            for i in (0..levels).rev() {
                let dp = self.down_convs[i].backward(ps, &sc.pooled[i], &dh, hh, ww, grads);
                hh *= 2;
                ww *= 2;
                let blk = &self.down_blocks[i];
                let mut dy_blk = avg_pool2_backward(&dp, blk.c, hh, ww);
                for (a, b) in dy_blk.iter_mut().zip(&dskips[i]) {
                    *a += b;
                }
                dh = blk.backward(ps, &sc.down[i], &gbs[offs[i]..offs[i] + 2 * blk.c], &dy_blk, hh, ww, &mut dgbs[offs[i]..offs[i] + 2 * blk.c], grads);
            }
            self.stem.backward(ps, &sc.stem, &dh, hh, ww, grads);
        }
        let mut dcvec = vec![0.0; cvec.len()];
        for (bi, blk) in self.res_blocks().enumerate() {
            let mut dgb = vec![0.0; batch * 2 * blk.c];
            for s in 0..batch {
                dgb[s * 2 * blk.c..(s + 1) * 2 * blk.c]
                    .copy_from_slice(&dgb_all[s * total + offs[bi]..s * total + offs[bi] + 2 * blk.c]);
            }
            let dc = blk.film.backward(ps, cvec, &dgb, batch, grads, true).unwrap();
            for (a, b) in dcvec.iter_mut().zip(&dc) {
                *a += b;
            }
        }
        dcvec
    }
}
