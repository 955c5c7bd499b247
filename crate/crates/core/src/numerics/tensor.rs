//! Dense row-major tensors with exact elementwise algebra.
//!
//! Images are stored as `[height, width, channels]`, masks as
//! `[height, width]`. Only scalar broadcasting is supported; per-pixel masks
//! are lifted to image shape with [`Tensor::expand_channels`].

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

fn check_shape(shape: &[usize]) -> Result<usize> {
    if shape.is_empty() || shape.contains(&0) {
        return Err(Error::InvalidShape(shape.to_vec()));
    }
    Ok(shape.iter().product())
}

impl Tensor {
    pub fn new(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        let len = check_shape(shape)?;
        if len != data.len() {
            return Err(Error::invalid(format!(
                "shape {shape:?} needs {len} values, got {}",
                data.len()
            )));
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
        })
    }

    /// Tensor filled with `value`. Panics on a zero extent.
    pub fn full(shape: &[usize], value: f64) -> Self {
        let len = check_shape(shape).expect("tensor extents must be positive");
        Self {
            shape: shape.to_vec(),
            data: vec![value; len],
        }
    }

    pub fn zeros(shape: &[usize]) -> Self {
        Self::full(shape, 0.0)
    }

    /// The all-ones tensor `J`.
    pub fn ones(shape: &[usize]) -> Self {
        Self::full(shape, 1.0)
    }

    pub fn zeros_like(other: &Tensor) -> Self {
        Self::zeros(&other.shape)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        let len = check_shape(shape)?;
        if len != self.data.len() {
            return Err(Error::ShapeMismatch {
                left: self.shape,
                right: shape.to_vec(),
            });
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    pub fn same_shape(&self, other: &Tensor) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch {
                left: self.shape.clone(),
                right: other.shape.clone(),
            });
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_with(&self, other: &Tensor, f: impl Fn(f64, f64) -> f64) -> Result<Tensor> {
        self.same_shape(other)?;
        Ok(Tensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn hadamard(&self, other: &Tensor) -> Result<Tensor> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn scale(&self, factor: f64) -> Tensor {
        self.map(|v| v * factor)
    }

    pub fn add_scalar(&self, value: f64) -> Tensor {
        self.map(|v| v + value)
    }

    /// `(1 - w)·a + w·b`; exact at `w = 0` and `w = 1`.
    pub fn lerp(a: &Tensor, b: &Tensor, w: f64) -> Result<Tensor> {
        a.zip_with(b, |x, y| (1.0 - w) * x + w * y)
    }

    /// `a·x + b·y` elementwise, the workhorse of every closed-form transition.
    pub fn axpby(a: f64, x: &Tensor, b: f64, y: &Tensor) -> Result<Tensor> {
        x.zip_with(y, |u, v| a * u + b * v)
    }

    /// `J - self`.
    pub fn complement(&self) -> Tensor {
        self.map(|v| 1.0 - v)
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.data.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> Result<f64> {
        self.same_shape(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Lifts a `[h, w]` mask to `[h, w, channels]` by repeating each value.
    pub fn expand_channels(&self, channels: usize) -> Result<Tensor> {
        if self.shape.len() != 2 {
            return Err(Error::InvalidShape(self.shape.clone()));
        }
        let mut data = Vec::with_capacity(self.data.len() * channels);
        for &v in &self.data {
            data.extend(std::iter::repeat(v).take(channels));
        }
        Tensor::new(&[self.shape[0], self.shape[1], channels], data)
    }

    /// Lifts a mask to match `like`: identity for equal shapes, channel
    /// expansion for a `[h, w]` mask against an `[h, w, c]` image.
    pub fn broadcast_mask(&self, like: &Tensor) -> Result<Tensor> {
        if self.shape == like.shape {
            return Ok(self.clone());
        }
        if like.shape.len() == 3 && self.shape.len() == 2 && like.shape[..2] == self.shape[..] {
            return self.expand_channels(like.shape[2]);
        }
        Err(Error::ShapeMismatch {
            left: self.shape.clone(),
            right: like.shape.clone(),
        })
    }

    /// Horizontal mirror of an `[h, w, c]` (or `[h, w]`) raster.
    pub fn flip_horizontal(&self) -> Tensor {
        let (h, w) = (self.shape[0], self.shape[1]);
        let c = if self.shape.len() > 2 { self.shape[2] } else { 1 };
        let mut out = self.data.clone();
        for y in 0..h {
            for x in 0..w {
                let src = (y * w + (w - 1 - x)) * c;
                let dst = (y * w + x) * c;
                out[dst..dst + c].copy_from_slice(&self.data[src..src + c]);
            }
        }
        Tensor {
            shape: self.shape.clone(),
            data: out,
        }
    }
}
