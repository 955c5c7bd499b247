//! Inputs shared by the benchmarks.

use madiff_core::dataset::{generate_sprites, sprite_vocabulary, Sprite};
use madiff_core::denoiser::{Architecture, DenoiserModel, ModelSpec};
use madiff_core::geometry::Point;
use madiff_core::numerics::RngState;

/// A sprite pair at the given side length: (non-makeup, makeup).
pub fn sprite_pair(size: usize) -> (Sprite, Sprite) {
    let mut sprites = generate_sprites(2, 11, size, 0.5).expect("valid corpus parameters");
    let b = sprites.pop().unwrap();
    let a = sprites.pop().unwrap();
    if a.domain() == madiff_core::dataset::Domain::Makeup {
        (b, a)
    } else {
        (a, b)
    }
}

/// An untrained model; timing does not depend on the weights.
pub fn model(size: usize, arch: Architecture) -> DenoiserModel {
    DenoiserModel::new(ModelSpec::new([size, size, 3], arch, sprite_vocabulary()), 0).expect("valid spec")
}

pub fn random_points(n: usize, extent: f64, seed: u64) -> Vec<Point> {
    let mut rng = RngState::new(seed, 0);
    (0..n).map(|_| [rng.uniform() * extent, rng.uniform() * extent]).collect()
}

pub fn random_features(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = RngState::new(seed, 1);
    (0..n).map(|_| (0..d).map(|_| rng.normal()).collect()).collect()
}
