//! Tensor algebra, seeded randomness and dense matrix products.

mod gemm;
mod rng;
mod tensor;

pub use gemm::gemm;
pub use rng::{sample_gaussian, seeded_rng, RngState};
pub use tensor::Tensor;
