use crate::error::{Error, Result};

/// Cubic polynomial kernel `(xᵀy/d + 1)³`.
pub fn polynomial_kernel(x: &[f64], y: &[f64]) -> f64 {
    let d = x.len() as f64;
    let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    (dot / d + 1.0).powi(3)
}

fn check(set: &[Vec<f64>], name: &str, d: usize) -> Result<()> {
    if set.len() < 2 {
        return Err(Error::invalid(format!("KID needs at least 2 samples in {name}, got {}", set.len())));
    }
    if let Some(v) = set.iter().find(|v| v.len() != d) {
        return Err(Error::invalid(format!("feature dimension {} in {name} differs from {d}", v.len())));
    }
    Ok(())
}

fn within(set: &[Vec<f64>]) -> f64 {
    let n = set.len();
    let mut s = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            s += polynomial_kernel(&set[i], &set[j]);
        }
    }
    2.0 * s / (n * (n - 1)) as f64
}

/// Unbiased squared MMD between two feature sets under the cubic kernel.
pub fn kid(x: &[Vec<f64>], y: &[Vec<f64>]) -> Result<f64> {
    let d = x.first().map_or(0, Vec::len);
    if d == 0 {
        return Err(Error::invalid("KID needs non-empty feature vectors"));
    }
    check(x, "X", d)?;
    check(y, "Y", d)?;
    let mut cross = 0.0;
    for a in x {
        for b in y {
            cross += polynomial_kernel(a, b);
        }
    }
    cross /= (x.len() * y.len()) as f64;
    Ok(within(x) + within(y) - 2.0 * cross)
}
