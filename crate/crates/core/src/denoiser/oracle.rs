//! Closed-form ε-predictor for isotropic Gaussian data.

use crate::error::{Error, Result};
use crate::numerics::Tensor;
use crate::schedule::Schedule;

/// `E[ε | x_t]` when `x0 ~ N(m, s²I)`:
/// `√(1 − ᾱ)·(x_t − √ᾱ·m)/(ᾱ·s² + 1 − ᾱ)`.
pub fn analytic_gaussian_denoiser(m: &Tensor, s: f64, t: usize, x_t: &Tensor, schedule: &Schedule) -> Result<Tensor> {
    if !(s >= 0.0) {
        return Err(Error::invalid("data standard deviation must be non-negative"));
    }
    let ab = schedule.alpha_bar(t);
    let num = (1.0 - ab).sqrt();
    let den = ab * s * s + 1.0 - ab;
    let sa = ab.sqrt();
    x_t.zip_with(m, |x, mu| num * (x - sa * mu) / den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{sample_gaussian, seeded_rng};

    fn sched() -> Schedule {
        Schedule::new(1000, 1e-4, 0.02).unwrap()
    }

    #[test]
    fn point_mass_recovers_exact_noise() {
        let s = sched();
        let m = Tensor::new(&[3], vec![0.2, -0.4, 0.9]).unwrap();
        let eps = Tensor::new(&[3], vec![1.0, -0.5, 0.25]).unwrap();
        for t in [1, 300, 1000] {
            let xt = s.forward_sample(&m, t, &eps).unwrap();
            let got = analytic_gaussian_denoiser(&m, 0.0, t, &xt, &s).unwrap();
            assert!(got.max_abs_diff(&eps).unwrap() < 1e-9);
        }
    }

    #[test]
    fn standard_normal_data_scales_input() {
        let s = sched();
        let x = Tensor::new(&[2], vec![0.5, -1.5]).unwrap();
        let got = analytic_gaussian_denoiser(&Tensor::zeros(&[2]), 1.0, 400, &x, &s).unwrap();
        let k = (1.0 - s.alpha_bar(400)).sqrt();
        assert!(got.max_abs_diff(&x.scale(k)).unwrap() < 1e-12);
    }

    #[test]
    fn matches_monte_carlo_regression() {
        // Per-coordinate least squares of ε on x_t recovers slope and intercept.
        let s = sched();
        let (mu, sd, t) = (0.3, 0.6, 250);
        let ab = s.alpha_bar(t);
        let mut rng = seeded_rng(9, 0);
        let n = 100_000;
        let x0 = sample_gaussian(&mut rng, &[n]).unwrap();
        let eps = sample_gaussian(&mut rng, &[n]).unwrap();
        let xs: Vec<f64> = x0
            .data()
            .iter()
            .zip(eps.data())
            .map(|(z, e)| ab.sqrt() * (mu + sd * z) + (1.0 - ab).sqrt() * e)
            .collect();
        let mx = xs.iter().sum::<f64>() / n as f64;
        let me = eps.mean();
        let cov: f64 = xs.iter().zip(eps.data()).map(|(x, e)| (x - mx) * (e - me)).sum();
        let var: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        let slope = cov / var;
        let m = Tensor::full(&[1], mu);
        let probe = Tensor::full(&[1], 1.0);
        let zero_at = Tensor::full(&[1], 0.0);
        let a1 = analytic_gaussian_denoiser(&m, sd, t, &probe, &s).unwrap().data()[0];
        let a0 = analytic_gaussian_denoiser(&m, sd, t, &zero_at, &s).unwrap().data()[0];
        let slope_true = a1 - a0;
        assert!((slope - slope_true).abs() < 0.02 * slope_true.abs(), "{slope} vs {slope_true}");
        let pred_mean = a0 + slope_true * mx;
        assert!((pred_mean - me).abs() < 0.02, "{pred_mean} vs {me}");
    }

    #[test]
    fn reverse_chain_reproduces_data_moments() {
        let s = sched();
        let (mu, sd) = (0.4, 0.5);
        let m = Tensor::full(&[1000], mu);
        let mut rng = seeded_rng(12, 0);
        let mut x = sample_gaussian(&mut rng, &[1000]).unwrap();
        for t in (1..=1000).rev() {
            let e = analytic_gaussian_denoiser(&m, sd, t, &x, &s).unwrap();
            let z = sample_gaussian(&mut rng, &[1000]).unwrap();
            x = s.reverse_step(&x, &e, t, 1.0, &z).unwrap();
        }
        let mean = x.mean();
        let std = (x.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 1000.0).sqrt();
        assert!((mean - mu).abs() < 0.05 * mu, "mean {mean}");
        assert!((std - sd).abs() < 0.05 * sd, "std {std}");
    }

    #[test]
    fn negative_spread_is_rejected() {
        let s = sched();
        let x = Tensor::zeros(&[1]);
        assert!(analytic_gaussian_denoiser(&x, -1.0, 5, &x, &s).is_err());
    }
}
