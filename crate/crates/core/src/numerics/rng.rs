//! Counter-based random streams.
//!
//! A stream is addressed by `(seed, stream)` and its position by a word
//! counter, so any draw can be replayed by reconstructing the same triple.
//! The generator is ChaCha8, whose output is specified bit-for-bit and is
//! therefore identical across platforms.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::Tensor;
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct RngState {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

/// SplitMix64 finalizer; used only to scatter stream identifiers.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngState {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self {
            seed,
            stream,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Number of 32-bit words consumed so far.
    pub fn counter(&self) -> u128 {
        self.inner.get_word_pos()
    }

    /// Independent child stream `k`; does not depend on (or advance) the
    /// parent's counter.
    pub fn substream(&self, k: u64) -> RngState {
        RngState::new(self.seed, mix64(self.stream ^ mix64(k)))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.inner.gen::<f64>()
    }

    /// Uniform integer in `[lo, hi]`.
    pub fn range_inclusive(&mut self, lo: usize, hi: usize) -> usize {
        self.inner.gen_range(lo..=hi)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    pub fn normal(&mut self) -> f64 {
        self.inner.sample(StandardNormal)
    }
}

pub fn seeded_rng(seed: u64, stream: u64) -> RngState {
    RngState::new(seed, stream)
}

/// I.i.d. standard normal tensor of the given shape.
pub fn sample_gaussian(rng: &mut RngState, shape: &[usize]) -> Result<Tensor> {
    if shape.is_empty() || shape.contains(&0) {
        return Err(Error::InvalidShape(shape.to_vec()));
    }
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.normal()).collect();
    Tensor::new(shape, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_state_same_draws() {
        let mut a = seeded_rng(7, 0);
        let mut b = seeded_rng(7, 0);
        for _ in 0..1000 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn streams_are_separated() {
        let mut a = seeded_rng(7, 0);
        let mut b = seeded_rng(7, 1);
        let differ = (0..1000).filter(|_| a.next_u64() != b.next_u64()).count();
        assert!(differ > 0);
    }

    #[test]
    fn golden_sequence() {
        // Recorded once from this implementation; guards cross-platform drift.
        let mut r = seeded_rng(7, 0);
        let got: Vec<u64> = (0..4).map(|_| r.next_u64()).collect();
        let golden: Vec<u64> = include_str!("../../tests/data/rng_seed7_stream0.txt")
            .lines()
            .take(4)
            .map(|l| l.trim().parse().unwrap())
            .collect();
        assert_eq!(got, golden);
    }

    #[test]
    fn substream_ignores_parent_position() {
        let a = seeded_rng(3, 9);
        let mut b = seeded_rng(3, 9);
        b.next_u64();
        assert_eq!(a.substream(4).next_u64(), b.substream(4).next_u64());
        assert_ne!(a.substream(4).next_u64(), a.substream(5).next_u64());
    }

    #[test]
    fn counter_advances() {
        let mut r = seeded_rng(1, 1);
        assert_eq!(r.counter(), 0);
        r.next_u64();
        assert_eq!(r.counter(), 2);
    }

    #[test]
    fn gaussian_moments() {
        let mut r = seeded_rng(11, 0);
        let t = sample_gaussian(&mut r, &[100_000]).unwrap();
        let mean = t.mean();
        let var = t.data().iter().map(|v| (v - mean).powi(2)).sum::<f64>() / t.len() as f64;
        assert!(mean.abs() < 0.02, "mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "var {var}");
    }

    #[test]
    fn gaussian_is_replayable() {
        let r = seeded_rng(5, 2);
        let a = sample_gaussian(&mut r.clone(), &[4, 4]).unwrap();
        let b = sample_gaussian(&mut r.clone(), &[4, 4]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_extent_gaussian_fails() {
        assert!(sample_gaussian(&mut seeded_rng(0, 0), &[0]).is_err());
    }
}
