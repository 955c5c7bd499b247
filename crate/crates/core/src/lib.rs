pub mod dataset;
pub mod denoiser;
pub mod error;
pub mod evaluation;
pub mod geometry;
pub mod metrics;
pub mod numerics;
pub mod schedule;
pub mod translator;

pub use error::{Error, Result};
