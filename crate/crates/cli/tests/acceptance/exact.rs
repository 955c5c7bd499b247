//! Criteria that hold by construction or against closed forms: 1–6 and 10.

use std::time::Instant;

use madiff_core::dataset::{generate_sprites, quantize_image, sprite_vocabulary};
use madiff_core::denoiser::{
    analytic_gaussian_denoiser, loss, loss_and_grad, train_with, AdamWConfig, Architecture, ConditionId,
    DenoiserModel, Draws, ModelSpec, TrainConfig, Vocabulary,
};
use madiff_core::evaluation::Face;
use madiff_core::geometry::{blend, delaunay, multi_blend, warp, BlendReference, ComponentAlphas, ComponentSchedule,
    ConstraintScope, Point};
use madiff_core::metrics::{kid, polynomial_kernel, psnr, ssim, to_pixel_scale};
use madiff_core::numerics::{sample_gaussian, seeded_rng, RngState, Tensor};
use madiff_core::schedule::Schedule;
use madiff_core::translator::{makeup_transfer, translate, TransferOptions, TranslateOptions};

use crate::{check, err, Outcome};

fn random_image(rng: &mut RngState, h: usize, w: usize) -> Tensor {
    Tensor::new(&[h, w, 3], (0..h * w * 3).map(|_| rng.uniform() * 2.0 - 1.0).collect()).unwrap()
}

fn sprite_model(hidden: usize, seed: u64) -> DenoiserModel {
    let spec = ModelSpec::new([32, 32, 3], Architecture::Mlp { hidden, blocks: 2 }, sprite_vocabulary());
    DenoiserModel::new(spec, seed).unwrap()
}

/// Criterion 1. The identity is exact for any weights, so an untrained
/// network stands in for a trained one.
pub fn round_trip() -> Outcome {
    let start = Instant::now();
    let model = sprite_model(64, 3);
    let mut rng = seeded_rng(101, 0);
    let mut worst: f64 = 0.0;
    for i in 0..20 {
        let x0 = random_image(&mut rng, 32, 32);
        let cond = [ConditionId::NonMakeup, ConditionId::Makeup, ConditionId::Tag(1)][i % 3];
        for gamma in [0.0, 1.0] {
            for k in [50, 180] {
                let opts = TranslateOptions { k, gamma, seed: i as u64, ..TranslateOptions::default() };
                let y = translate(&model, &x0, cond, cond, &opts, None).map_err(err)?;
                worst = worst.max(y.max_abs_diff(&x0).unwrap());
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(worst < 1e-4, format!("max reconstruction error {worst:e}"))?;
    check(secs < 60.0, format!("took {secs:.1}s"))?;
    Ok(format!("80 jobs, max-abs error {worst:.2e}, {secs:.1}s"))
}

/// Criterion 2: five masked translations of noise images and five sprite
/// transfers, each with at least 30% of pixels preserved.
pub fn mask_preservation() -> Outcome {
    let model = sprite_model(128, 4);
    let mut rng = seeded_rng(202, 0);
    let mut min_cover: f64 = 1.0;
    let mut jobs = Vec::new();
    for i in 0..5u64 {
        let x0 = quantize_image(&random_image(&mut rng, 32, 32));
        let cover = 0.3 + 0.4 * rng.uniform();
        let mask = Tensor::new(&[32, 32], (0..1024).map(|_| f64::from(u8::from(rng.uniform() < cover))).collect()).unwrap();
        let opts = TranslateOptions { seed: i, ..TranslateOptions::default() };
        let y = translate(&model, &x0, ConditionId::NonMakeup, ConditionId::Makeup, &opts, Some(&mask)).map_err(err)?;
        jobs.push((x0, mask, y));
    }
    let sprites = generate_sprites(10, 303, 32, 0.5).map_err(err)?;
    for (i, pair) in sprites.chunks(2).enumerate() {
        let (s, r) = (Face::from(&pair[0]), Face::from(&pair[1]));
        let src = s.transfer_source(&ComponentAlphas::default(), &ComponentSchedule::default()).map_err(err)?;
        let mut opts = TransferOptions::default();
        opts.translate.seed = i as u64;
        let y = makeup_transfer(&model, &src, &r.image, &r.landmarks, &opts).map_err(err)?;
        jobs.push((s.image.clone(), src.background.clone(), y));
    }
    for (i, (x0, mask, y)) in jobs.iter().enumerate() {
        let area = mask.data().iter().sum::<f64>() / mask.len() as f64;
        min_cover = min_cover.min(area);
        check(area >= 0.3, format!("job {i}: mask covers only {area:.2}"))?;
        let (qx, qy) = (quantize_image(x0), quantize_image(y));
        for (p, &m) in mask.data().iter().enumerate() {
            if m == 1.0 {
                check(qx.data()[3 * p..3 * p + 3] == qy.data()[3 * p..3 * p + 3], format!("job {i}: pixel {p} changed"))?;
            }
        }
    }
    Ok(format!("10 jobs bit-exact under masks covering at least {:.0}%", 100.0 * min_cover))
}

/// Criterion 3.
pub fn scheduler_identities() -> Outcome {
    let s = Schedule::new(1000, 1e-4, 0.02).map_err(err)?;
    let mut worst_rel: f64 = 0.0;
    for t in 1..=s.steps() {
        let (sig2, tilde) = (s.sigma(t, 1.0).map_err(err)?.powi(2), s.posterior_variance(t));
        let rel = if tilde == 0.0 { sig2 } else { (sig2 - tilde).abs() / tilde };
        worst_rel = worst_rel.max(rel);
    }
    check(worst_rel < 1e-10, format!("sigma^2 vs posterior variance rel err {worst_rel:e}"))?;

    let mut rng = seeded_rng(303, 0);
    let x0 = random_image(&mut rng, 8, 8);
    let eps = sample_gaussian(&mut rng, x0.shape()).unwrap();
    let mut x = s.forward_sample(&x0, s.steps(), &eps).map_err(err)?;
    for t in (1..=s.steps()).rev() {
        let ab = s.alpha_bar(t);
        let perfect = x.zip_with(&x0, |xt, x0| (xt - ab.sqrt() * x0) / (1.0 - ab).sqrt()).unwrap();
        let z = sample_gaussian(&mut rng, x0.shape()).unwrap();
        x = s.reverse_step(&x, &perfect, t, 1.0, &z).map_err(err)?;
    }
    let chain_err = x.max_abs_diff(&x0).unwrap();
    check(chain_err < 1e-4, format!("perfect-noise chain error {chain_err:e}"))?;

    let n = 20_000;
    let mut worst_z: f64 = 0.0;
    let point = Tensor::new(&[1], vec![0.7]).unwrap();
    for t in [1, 10, 100, 500, 1000] {
        let ab = s.alpha_bar(t);
        let xs: Vec<f64> = (0..n)
            .map(|_| {
                let e = sample_gaussian(&mut rng, &[1]).unwrap();
                s.forward_sample(&point, t, &e).unwrap().data()[0]
            })
            .collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let (m_true, v_true) = (ab.sqrt() * 0.7, 1.0 - ab);
        let z_mean = (mean - m_true).abs() / (v_true / n as f64).sqrt();
        // Var of the sample variance of a Gaussian is 2σ⁴/(n−1).
        let z_var = (var - v_true).abs() / (2.0 * v_true * v_true / (n - 1) as f64).sqrt();
        worst_z = worst_z.max(z_mean).max(z_var);
    }
    check(worst_z <= 3.0, format!("forward moments off by {worst_z:.2} SE"))?;
    Ok(format!(
        "sigma rel err {worst_rel:.1e}, chain err {chain_err:.1e}, moments within {worst_z:.2} SE"
    ))
}

/// Criterion 4: central differences on 10 coordinates per architecture.
pub fn gradients() -> Outcome {
    let archs = [
        Architecture::Mlp { hidden: 8, blocks: 2 },
        Architecture::ConvNet { width: 4, blocks: 2, groups: 2 },
        Architecture::UNet { widths: vec![4, 8], groups: 2 },
    ];
    let mut worst: f64 = 0.0;
    for (a, arch) in archs.into_iter().enumerate() {
        let mut spec = ModelSpec::new([4, 4, 2], arch, Vocabulary::new(vec!["a".into(), "b".into()]));
        spec.time_dim = 8;
        spec.cond_dim = 6;
        spec.cond_hidden = 10;
        let mut m = DenoiserModel::new(spec, 40 + a as u64).map_err(err)?;
        let mut rng = seeded_rng(404, a as u64);
        let draws = Draws::sample(&mut rng, 3, 32, 1000);
        let x0: Vec<f64> = (0..96).map(|_| rng.uniform() * 2.0 - 1.0).collect();
        let conds = [ConditionId::Makeup, ConditionId::Tag(0), ConditionId::NonMakeup];
        let (_, g) = loss_and_grad(&m, &x0, &conds, &draws).map_err(err)?;
        let h = 1e-3;
        for _ in 0..10 {
            let k = rng.range_inclusive(0, m.params().scalar_count() - 1);
            let (ti, off) = m.params().locate(k);
            let orig = m.params().tensor(ti)[off];
            m.params_mut().tensor_mut(ti)[off] = orig + h;
            let lp = loss(&m, &x0, &conds, &draws).map_err(err)?;
            m.params_mut().tensor_mut(ti)[off] = orig - h;
            let lm = loss(&m, &x0, &conds, &draws).map_err(err)?;
            m.params_mut().tensor_mut(ti)[off] = orig;
            let fd = (lp - lm) / (2.0 * h);
            let an = g.scalar(ti, off);
            let rel = (fd - an).abs() / fd.abs().max(an.abs()).max(1e-8);
            check(rel < 1e-4, format!("{}: fd {fd} vs analytic {an}", m.params().name(ti)))?;
            worst = worst.max(rel);
        }
    }
    Ok(format!("30 coordinates over mlp, conv_net and unet, worst rel err {worst:.1e}"))
}

const ORACLE_MEAN: [f64; 16] = [
    0.3, -0.2, 0.5, 0.1, -0.4, 0.25, 0.0, 0.35, -0.1, 0.2, -0.3, 0.45, 0.15, -0.05, 0.4, -0.25,
];
const ORACLE_SD: f64 = 0.5;

/// Criterion 5.
pub fn gaussian_oracle() -> Outcome {
    let start = Instant::now();
    let spec = ModelSpec::new([4, 4, 1], Architecture::Mlp { hidden: 128, blocks: 2 }, Vocabulary::default());
    let mut model = DenoiserModel::new(spec, 5).map_err(err)?;
    let config = TrainConfig {
        iterations: 2000,
        batch_size: 32,
        optimizer: AdamWConfig::default(),
        flip_prob: 0.0,
        seed: 17,
    };
    train_with(
        &mut model,
        &config,
        |rng, batch| {
            let mut x0 = Vec::with_capacity(batch * 16);
            for _ in 0..batch {
                x0.extend(ORACLE_MEAN.iter().map(|m| m + ORACLE_SD * rng.normal()));
            }
            Ok((x0, vec![ConditionId::NonMakeup; batch]))
        },
        |_| {},
    )
    .map_err(err)?;
    let sched = model.schedule().clone();
    let m = Tensor::new(&[4, 4, 1], ORACLE_MEAN.to_vec()).unwrap();

    let mut rng = seeded_rng(99, 0);
    let (mut mse_model, mut mse_oracle) = (0.0, 0.0);
    for _ in 0..4000 {
        let t = rng.range_inclusive(1, sched.steps());
        let z = sample_gaussian(&mut rng, &[4, 4, 1]).unwrap();
        let x0 = m.add(&z.scale(ORACLE_SD)).unwrap();
        let eps = sample_gaussian(&mut rng, &[4, 4, 1]).unwrap();
        let xt = sched.forward_sample(&x0, t, &eps).unwrap();
        let pm = model.predict_eps(&xt, t, ConditionId::NonMakeup).map_err(err)?;
        let po = analytic_gaussian_denoiser(&m, ORACLE_SD, t, &xt, &sched).map_err(err)?;
        mse_model += pm.sub(&eps).unwrap().data().iter().map(|v| v * v).sum::<f64>();
        mse_oracle += po.sub(&eps).unwrap().data().iter().map(|v| v * v).sum::<f64>();
    }
    let ratio = mse_model / mse_oracle;
    check(ratio <= 1.10, format!("model/oracle mse ratio {ratio:.4}"))?;

    let n = 1000;
    let mut x = sample_gaussian(&mut rng, &[n * 16]).unwrap();
    let conds = vec![ConditionId::NonMakeup; n];
    for t in (1..=sched.steps()).rev() {
        let eps = model.predict_eps_batch(x.data(), &vec![t; n], &conds).map_err(err)?;
        let eps = Tensor::new(&[n * 16], eps).unwrap();
        let z = sample_gaussian(&mut rng, &[n * 16]).unwrap();
        x = sched.reverse_step(&x, &eps, t, 1.0, &z).map_err(err)?;
    }
    // Moments of the samples centered on m, pooled over the 16 coordinates.
    let centered: Vec<f64> = x.data().iter().enumerate().map(|(i, v)| v - ORACLE_MEAN[i % 16]).collect();
    let mean = centered.iter().sum::<f64>() / centered.len() as f64;
    let sd = (centered.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / centered.len() as f64).sqrt();
    check(mean.abs() <= 0.05 * ORACLE_SD, format!("sample mean off by {mean:.4}"))?;
    check((sd - ORACLE_SD).abs() <= 0.05 * ORACLE_SD, format!("sample sd {sd:.4}"))?;
    let secs = start.elapsed().as_secs_f64();
    check(secs < 300.0, format!("took {secs:.0}s"))?;
    Ok(format!(
        "mse ratio {ratio:.3}, mean offset {mean:.4}, sd {sd:.4}, {secs:.1}s"
    ))
}

fn circumcircle(a: Point, b: Point, c: Point) -> (f64, f64, f64) {
    let d = 2.0 * (a[0] * (b[1] - c[1]) + b[0] * (c[1] - a[1]) + c[0] * (a[1] - b[1]));
    let sq = |p: Point| p[0] * p[0] + p[1] * p[1];
    let ux = (sq(a) * (b[1] - c[1]) + sq(b) * (c[1] - a[1]) + sq(c) * (a[1] - b[1])) / d;
    let uy = (sq(a) * (c[0] - b[0]) + sq(b) * (a[0] - c[0]) + sq(c) * (b[0] - a[0])) / d;
    (ux, uy, ((a[0] - ux).powi(2) + (a[1] - uy).powi(2)).sqrt())
}

fn hull_area(points: &[Point]) -> f64 {
    let mut p = points.to_vec();
    p.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let cross = |o: Point, a: Point, b: Point| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let mut hull: Vec<Point> = Vec::new();
    for pass in 0..2 {
        let base = hull.len();
        let iter: Box<dyn Iterator<Item = &Point>> = if pass == 0 { Box::new(p.iter()) } else { Box::new(p.iter().rev()) };
        for &q in iter {
            while hull.len() >= base + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], q) <= 0.0 {
                hull.pop();
            }
            hull.push(q);
        }
        hull.pop();
    }
    let n = hull.len();
    (0..n).map(|i| cross([0.0, 0.0], hull[i], hull[(i + 1) % n])).sum::<f64>() / 2.0
}

/// Criterion 6.
pub fn geometry() -> Outcome {
    let mut rng = seeded_rng(606, 0);
    for set in 0..100 {
        let n = rng.range_inclusive(3, 100);
        let pts: Vec<Point> = (0..n).map(|_| [rng.uniform() * 50.0, rng.uniform() * 50.0]).collect();
        let mesh = delaunay(&pts).map_err(err)?;
        let mut area = 0.0;
        for tri in &mesh.triangles {
            let [a, b, c] = tri.map(|i| pts[i]);
            area += ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])).abs() / 2.0;
            let (ux, uy, r) = circumcircle(a, b, c);
            for (i, p) in pts.iter().enumerate() {
                if tri.contains(&i) {
                    continue;
                }
                let d = ((p[0] - ux).powi(2) + (p[1] - uy).powi(2)).sqrt();
                check(d >= r * (1.0 - 1e-9), format!("set {set}: point {i} inside a circumcircle"))?;
            }
        }
        let hull = hull_area(&pts);
        check((area - hull).abs() <= 1e-6 * hull, format!("set {set}: triangles cover {area} of hull {hull}"))?;
    }

    let sprites = generate_sprites(4, 606, 32, 0.5).map_err(err)?;
    let mut warp_err: f64 = 0.0;
    for s in &sprites {
        let lm = &s.landmarks.points;
        let (w, valid) = warp(&s.image, lm, lm).map_err(err)?;
        for (p, &v) in valid.data().iter().enumerate() {
            if v == 1.0 {
                for k in 0..3 {
                    warp_err = warp_err.max((w.data()[3 * p + k] - s.image.data()[3 * p + k]).abs());
                }
            }
        }
    }
    // The model range spans 2, so one 8-bit level is 2/255 there.
    let warp_err_8bit = warp_err / 2.0;
    check(warp_err_8bit <= 1.0 / 255.0, format!("identity warp error {warp_err_8bit:e}"))?;

    for pair in sprites.chunks(2) {
        let (s, r) = (&pair[0], &pair[1]);
        let (warped, valid) = warp(&r.image, &s.landmarks.points, &r.landmarks.points).map_err(err)?;
        let single = blend(&s.image, &warped, &valid).map_err(err)?;
        let refs = [BlendReference {
            image: r.image.clone(),
            landmarks: r.landmarks.points.clone(),
            mask: Tensor::ones(&[32, 32]),
            alpha: Tensor::ones(&[32, 32]),
        }];
        let multi = multi_blend(&s.image, &s.landmarks.points, &refs, ConstraintScope::Union).map_err(err)?;
        check(multi == single, "multi-reference blend differs from the single blend")?;
    }
    Ok(format!("100 Delaunay sets verified, identity warp error {warp_err_8bit:.1e} of full scale, blend reduction exact"))
}

/// Criterion 10.
pub fn metrics() -> Outcome {
    let mut rng = seeded_rng(1010, 0);
    let a = random_image(&mut rng, 24, 24);
    let self_ssim = ssim(&a, &a).map_err(err)?;
    check(self_ssim == 1.0, format!("SSIM(a, a) = {self_ssim}"))?;

    let level = 2.0 / 255.0;
    let b = a.map(|v| v.clamp(-1.0, 1.0 - level));
    let c = b.map(|v| v + level);
    let p = psnr(&b, &c).map_err(err)?;
    check((p - 48.13).abs() <= 0.01, format!("one-level PSNR {p}"))?;

    let mut worst_kid: f64 = 0.0;
    for n in 2..=50 {
        let d = rng.range_inclusive(1, 8);
        let draw = |rng: &mut RngState, m: usize, shift: f64| -> Vec<Vec<f64>> {
            (0..m).map(|_| (0..d).map(|_| rng.normal() + shift).collect()).collect()
        };
        let x = draw(&mut rng, n, 0.0);
        let m = rng.range_inclusive(2, 50);
        let y = draw(&mut rng, m, 0.5);
        let (mut kxx, mut kyy, mut kxy) = (0.0, 0.0, 0.0);
        for i in 0..x.len() {
            for j in 0..x.len() {
                if i != j {
                    kxx += polynomial_kernel(&x[i], &x[j]);
                }
            }
            for yj in &y {
                kxy += polynomial_kernel(&x[i], yj);
            }
        }
        for i in 0..y.len() {
            for j in 0..y.len() {
                if i != j {
                    kyy += polynomial_kernel(&y[i], &y[j]);
                }
            }
        }
        let (nx, ny) = (x.len() as f64, y.len() as f64);
        let brute = kxx / (nx * (nx - 1.0)) + kyy / (ny * (ny - 1.0)) - 2.0 * kxy / (nx * ny);
        worst_kid = worst_kid.max((kid(&x, &y).map_err(err)? - brute).abs());
    }
    check(worst_kid < 1e-9, format!("KID deviates from brute force by {worst_kid:e}"))?;

    let mut worst_const: f64 = 0.0;
    for _ in 0..20 {
        let (u, v) = (rng.uniform() * 2.0 - 1.0, rng.uniform() * 2.0 - 1.0);
        let (x, y) = (Tensor::full(&[16, 16, 3], u), Tensor::full(&[16, 16, 3], v));
        let (mx, my) = (to_pixel_scale(&x).data()[0], to_pixel_scale(&y).data()[0]);
        let c1 = (0.01f64 * 255.0).powi(2);
        let closed = (2.0 * mx * my + c1) / (mx * mx + my * my + c1);
        worst_const = worst_const.max((ssim(&x, &y).map_err(err)? - closed).abs());
    }
    check(worst_const < 1e-9, format!("constant-image SSIM off by {worst_const:e}"))?;
    Ok(format!(
        "PSNR {p:.4} dB, KID max diff {worst_kid:.1e} over n=2..50, constant SSIM max diff {worst_const:.1e}"
    ))
}
