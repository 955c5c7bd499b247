//! Binary `[h, w]` rasters: 1 = included, 0 = excluded.

use std::path::Path;

use crate::dataset::pnm;
use crate::error::{Error, Result};
use crate::numerics::Tensor;

pub fn check_binary(m: &Tensor) -> Result<()> {
    if m.shape().len() != 2 {
        return Err(Error::InvalidShape(m.shape().to_vec()));
    }
    match m.data().iter().position(|&v| v != 0.0 && v != 1.0) {
        Some(index) => Err(Error::NonBinaryMask {
            index,
            value: m.data()[index],
        }),
        None => Ok(()),
    }
}

pub fn union(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    check_binary(a)?;
    check_binary(b)?;
    a.zip_with(b, f64::max)
}

pub fn intersection(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    check_binary(a)?;
    check_binary(b)?;
    a.zip_with(b, f64::min)
}

pub fn complement(m: &Tensor) -> Result<Tensor> {
    check_binary(m)?;
    Ok(m.complement())
}

/// `a` with `b` removed.
pub fn difference(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    intersection(a, &complement(b)?)
}

pub fn union_all<'a>(masks: impl IntoIterator<Item = &'a Tensor>, like: [usize; 2]) -> Result<Tensor> {
    let mut acc = Tensor::zeros(&like);
    for m in masks {
        acc = union(&acc, m)?;
    }
    Ok(acc)
}

/// Pixel count of a binary mask.
pub fn area(m: &Tensor) -> usize {
    m.data().iter().filter(|&&v| v == 1.0).count()
}

pub fn overlaps(a: &Tensor, b: &Tensor) -> Result<bool> {
    a.same_shape(b)?;
    Ok(a.data().iter().zip(b.data()).any(|(x, y)| *x == 1.0 && *y == 1.0))
}

pub fn save_mask(m: &Tensor, path: &Path) -> Result<()> {
    check_binary(m)?;
    let bytes: Vec<u8> = m.data().iter().map(|&v| if v == 1.0 { 255 } else { 0 }).collect();
    pnm::write_pgm(path, m.shape()[1], m.shape()[0], &bytes)
}

/// Loads a P5 mask; only 0 and 255 are accepted.
pub fn load_mask(path: &Path) -> Result<Tensor> {
    let (w, h, bytes) = pnm::read_pgm(path)?;
    let mut data = Vec::with_capacity(bytes.len());
    for (index, &b) in bytes.iter().enumerate() {
        data.push(match b {
            0 => 0.0,
            255 => 1.0,
            v => {
                return Err(Error::NonBinaryMask {
                    index,
                    value: v as f64,
                })
            }
        });
    }
    Tensor::new(&[h, w], data)
}
