use serde::{Deserialize, Serialize};

use super::delaunay::Point;
use super::warp::WarpMap;
use crate::error::{Error, Result};
use crate::numerics::Tensor;

const SUM_TOL: f64 = 1e-6;

fn check_unit_interval(alpha: &Tensor) -> Result<()> {
    if let Some((i, v)) = alpha.data().iter().enumerate().find(|(_, v)| !(0.0..=1.0).contains(*v)) {
        return Err(Error::invalid(format!("blend weight {v} at flat index {i} is outside [0, 1]")));
    }
    Ok(())
}

/// `(J − α)·x0 + α·warped`; `α` may be per-pixel `[h, w]` or full-shape.
pub fn blend(x0: &Tensor, warped: &Tensor, alpha: &Tensor) -> Result<Tensor> {
    x0.same_shape(warped)?;
    check_unit_interval(alpha)?;
    let a = alpha.broadcast_mask(x0)?;
    let mut out = x0.clone();
    for ((o, w), a) in out.data_mut().iter_mut().zip(warped.data()).zip(a.data()) {
        *o = (1.0 - a) * *o + a * w;
    }
    Ok(out)
}

/// Where the `Σ_l α^l = J` requirement of multi-reference blending is checked.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintScope {
    /// Only on pixels covered by at least one warped mask.
    #[default]
    Union,
    /// On every pixel.
    Global,
    /// Only require `Σ_l α^l·F(M^l) ≤ 1`, allowing partial intensity.
    Convex,
}

/// One reference already brought into the source frame.
#[derive(Clone, Debug)]
pub struct WarpedItem {
    /// `F(M^l)`, binary `[h, w]`.
    pub mask: Tensor,
    /// `F(M^l·y^l)`, `[h, w, c]`.
    pub content: Tensor,
    /// `α^l`, `[h, w]`.
    pub alpha: Tensor,
}

/// Multi-reference blend in normalized form:
/// `x'_0 = (J − Σ_l α^l·F(M^l))·x0 + Σ_l α^l·F(M^l·y^l)`.
///
/// With a single full-mask reference and `α = V` this is exactly
/// [`blend`] with `α` restricted to the hull.
pub fn multi_blend_warped(x0: &Tensor, items: &[WarpedItem], scope: ConstraintScope) -> Result<Tensor> {
    if items.is_empty() {
        return Err(Error::invalid("multi-blend needs at least one reference"));
    }
    let (h, w) = (x0.shape()[0], x0.shape()[1]);
    let c = x0.len() / (h * w);
    let mut alpha_sum = vec![0.0; h * w];
    let mut covered = vec![0.0; h * w];
    let mut union = vec![false; h * w];
    for it in items {
        if it.mask.shape() != [h, w] || it.alpha.shape() != [h, w] {
            return Err(Error::ShapeMismatch {
                left: it.mask.shape().to_vec(),
                right: vec![h, w],
            });
        }
        x0.same_shape(&it.content)?;
        check_unit_interval(&it.alpha)?;
        if let Some((i, &v)) = it.mask.data().iter().enumerate().find(|(_, &v)| v != 0.0 && v != 1.0) {
            return Err(Error::NonBinaryMask { index: i, value: v });
        }
        for i in 0..h * w {
            alpha_sum[i] += it.alpha.data()[i];
            covered[i] += it.alpha.data()[i] * it.mask.data()[i];
            union[i] |= it.mask.data()[i] == 1.0;
        }
    }
    let mut worst: Option<(usize, f64, f64)> = None;
    for i in 0..h * w {
        let (value, target_ok) = match scope {
            ConstraintScope::Union if union[i] => (alpha_sum[i], (alpha_sum[i] - 1.0).abs() <= SUM_TOL),
            ConstraintScope::Global => (alpha_sum[i], (alpha_sum[i] - 1.0).abs() <= SUM_TOL),
            ConstraintScope::Convex => (covered[i], covered[i] <= 1.0 + SUM_TOL),
            _ => continue,
        };
        if !target_ok {
            let dev = (value - 1.0).abs();
            if worst.map_or(true, |(_, _, d)| dev > d) {
                worst = Some((i, value, dev));
            }
        }
    }
    if let Some((i, sum, _)) = worst {
        return Err(Error::BlendConstraint {
            row: i / w,
            col: i % w,
            sum,
        });
    }
    let mut out = x0.clone();
    let od = out.data_mut();
    for i in 0..h * w {
        let keep = 1.0 - covered[i];
        for k in 0..c {
            let j = i * c + k;
            let mut v = keep * x0.data()[j];
            for it in items {
                let a = it.alpha.data()[i];
                if a != 0.0 {
                    v += a * it.content.data()[j];
                }
            }
            od[j] = v;
        }
    }
    Ok(out)
}

/// A reference image with its landmarks, a component mask in the
/// reference frame, and its per-pixel weight in the source frame.
#[derive(Clone, Debug)]
pub struct BlendReference {
    pub image: Tensor,
    pub landmarks: Vec<Point>,
    pub mask: Tensor,
    pub alpha: Tensor,
}

/// Warps each reference onto `src_lm` and applies [`multi_blend_warped`].
pub fn multi_blend(x0: &Tensor, src_lm: &[Point], refs: &[BlendReference], scope: ConstraintScope) -> Result<Tensor> {
    let (h, w) = (x0.shape()[0], x0.shape()[1]);
    let mut items = Vec::with_capacity(refs.len());
    for r in refs {
        let map = WarpMap::new(src_lm, &r.landmarks, h, w)?;
        let masked = r.mask.broadcast_mask(&r.image)?.hadamard(&r.image)?;
        items.push(WarpedItem {
            mask: map.apply_mask(&r.mask)?,
            content: map.apply(&masked)?,
            alpha: r.alpha.clone(),
        });
    }
    multi_blend_warped(x0, &items, scope)
}
