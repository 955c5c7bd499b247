//! Piecewise-affine warping of a reference raster onto source landmarks.
//!
//! Coordinates are `(x, y) = (column, row)` with pixel centers on integers.

use super::delaunay::{delaunay, orient, Point, TriangleMesh};
use crate::error::{Error, Result};
use crate::numerics::Tensor;

/// Affine `p ↦ (a·x + b·y + c, d·x + e·y + f)`.
pub type Affine = [f64; 6];

pub fn apply_affine(m: &Affine, p: Point) -> Point {
    [m[0] * p[0] + m[1] * p[1] + m[2], m[3] * p[0] + m[4] * p[1] + m[5]]
}

const AREA_EPS: f64 = 1e-9;

/// The affine taking triangle `from` onto `to` vertex by vertex.
fn triangle_affine(from: [Point; 3], to: [Point; 3]) -> Option<Affine> {
    let [p0, p1, p2] = from;
    let det = orient(p0, p1, p2);
    if det.abs() < AREA_EPS {
        return None;
    }
    // Solve for each output coordinate over the barycentric basis.
    let (ux, uy) = (p1[0] - p0[0], p1[1] - p0[1]);
    let (vx, vy) = (p2[0] - p0[0], p2[1] - p0[1]);
    let mut m = [0.0; 6];
    for k in 0..2 {
        let (du, dv) = (to[1][k] - to[0][k], to[2][k] - to[0][k]);
        let a = (du * vy - dv * uy) / det;
        let b = (dv * ux - du * vx) / det;
        m[3 * k] = a;
        m[3 * k + 1] = b;
        m[3 * k + 2] = to[0][k] - a * p0[0] - b * p0[1];
    }
    Some(m)
}

/// Whether the edge `a → b` of a counter-clockwise triangle owns the points
/// lying exactly on it; antisymmetric under reversal, so a shared edge has
/// exactly one owner.
fn owns_edge(a: Point, b: Point) -> bool {
    let dy = b[1] - a[1];
    dy > 0.0 || (dy == 0.0 && b[0] < a[0])
}

fn covers(t: [Point; 3], p: Point) -> bool {
    for e in 0..3 {
        let (a, b) = (t[e], t[(e + 1) % 3]);
        let s = orient(a, b, p);
        if s < 0.0 || (s == 0.0 && !owns_edge(a, b)) {
            return false;
        }
    }
    true
}

/// Precomputed source-frame rasterization of a landmark correspondence.
#[derive(Clone, Debug)]
pub struct WarpMap {
    height: usize,
    width: usize,
    mesh: TriangleMesh,
    affines: Vec<Affine>,
    /// Owning triangle per destination pixel.
    owner: Vec<Option<usize>>,
}

impl WarpMap {
    /// Meshes `src` and maps each triangle onto the matching `reference`
    /// triangle. Both landmark lists must correspond index-wise.
    pub fn new(src: &[Point], reference: &[Point], height: usize, width: usize) -> Result<Self> {
        if src.len() != reference.len() {
            return Err(Error::invalid(format!(
                "landmark counts differ: source {} vs reference {}",
                src.len(),
                reference.len()
            )));
        }
        let mesh = delaunay(src)?;
        let mut affines = Vec::with_capacity(mesh.triangles.len());
        for (ti, t) in mesh.triangles.iter().enumerate() {
            let s = [src[t[0]], src[t[1]], src[t[2]]];
            let r = [reference[t[0]], reference[t[1]], reference[t[2]]];
            if orient(r[0], r[1], r[2]).abs() < AREA_EPS {
                return Err(Error::Degenerate(format!(
                    "reference triangle {ti} (landmarks {:?}) has zero area",
                    t
                )));
            }
            let m = triangle_affine(s, r).ok_or_else(|| {
                Error::Degenerate(format!("source triangle {ti} (landmarks {:?}) has zero area", t))
            })?;
            affines.push(m);
        }
        let mut owner = vec![None; height * width];
        for (ti, t) in mesh.triangles.iter().enumerate() {
            let tri = [src[t[0]], src[t[1]], src[t[2]]];
            let lo_x = tri.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min).floor().max(0.0) as usize;
            let hi_x = tri.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max).ceil();
            let lo_y = tri.iter().map(|p| p[1]).fold(f64::INFINITY, f64::min).floor().max(0.0) as usize;
            let hi_y = tri.iter().map(|p| p[1]).fold(f64::NEG_INFINITY, f64::max).ceil();
            if hi_x < 0.0 || hi_y < 0.0 {
                continue;
            }
            let hi_x = (hi_x as usize).min(width.saturating_sub(1));
            let hi_y = (hi_y as usize).min(height.saturating_sub(1));
            for y in lo_y..=hi_y {
                for x in lo_x..=hi_x {
                    if covers(tri, [x as f64, y as f64]) {
                        owner[y * width + x] = Some(ti);
                    }
                }
            }
        }
        Ok(Self {
            height,
            width,
            mesh,
            affines,
            owner,
        })
    }

    pub fn mesh(&self) -> &TriangleMesh {
        &self.mesh
    }

    pub fn affines(&self) -> &[Affine] {
        &self.affines
    }

    /// `V`: 1 inside the source hull, 0 outside.
    pub fn validity(&self) -> Tensor {
        let data = self.owner.iter().map(|o| if o.is_some() { 1.0 } else { 0.0 }).collect();
        Tensor::new(&[self.height, self.width], data).expect("validity raster")
    }

    /// Reference-frame sampling position for a source pixel, if inside the hull.
    pub fn source_to_reference(&self, x: usize, y: usize) -> Option<Point> {
        self.owner[y * self.width + x].map(|ti| apply_affine(&self.affines[ti], [x as f64, y as f64]))
    }

    /// Warps an `[h, w, c]` or `[h, w]` reference raster; zero outside the hull.
    pub fn apply(&self, reference: &Tensor) -> Result<Tensor> {
        let shape = reference.shape();
        if shape.len() < 2 || shape.len() > 3 {
            return Err(Error::InvalidShape(shape.to_vec()));
        }
        let (rh, rw) = (shape[0], shape[1]);
        let c = if shape.len() == 3 { shape[2] } else { 1 };
        let mut out_shape = vec![self.height, self.width];
        if shape.len() == 3 {
            out_shape.push(c);
        }
        let mut out = vec![0.0; self.height * self.width * c];
        let src = reference.data();
        for y in 0..self.height {
            for x in 0..self.width {
                if let Some(p) = self.source_to_reference(x, y) {
                    let dst = (y * self.width + x) * c;
                    bilinear(src, rh, rw, c, p, &mut out[dst..dst + c]);
                }
            }
        }
        Tensor::new(&out_shape, out)
    }

    /// Warps a binary `[h, w]` mask: bilinear, thresholded at 0.5, zero
    /// outside the hull.
    pub fn apply_mask(&self, mask: &Tensor) -> Result<Tensor> {
        if mask.shape().len() != 2 {
            return Err(Error::InvalidShape(mask.shape().to_vec()));
        }
        Ok(self.apply(mask)?.map(|v| if v >= 0.5 { 1.0 } else { 0.0 }))
    }
}

/// Bilinear sample at `p` with edge clamping.
fn bilinear(src: &[f64], h: usize, w: usize, c: usize, p: Point, out: &mut [f64]) {
    let x = p[0].clamp(0.0, (w - 1) as f64);
    let y = p[1].clamp(0.0, (h - 1) as f64);
    let (x0, y0) = (x.floor() as usize, y.floor() as usize);
    let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
    let (fx, fy) = (x - x0 as f64, y - y0 as f64);
    for k in 0..c {
        let v = |yy: usize, xx: usize| src[(yy * w + xx) * c + k];
        let top = v(y0, x0) + fx * (v(y0, x1) - v(y0, x0));
        let bot = v(y1, x0) + fx * (v(y1, x1) - v(y1, x0));
        out[k] = top + fy * (bot - top);
    }
}

/// Warps `reference` from `ref_lm` onto `src_lm`; returns the warped raster
/// and its validity mask.
pub fn warp(reference: &Tensor, src_lm: &[Point], ref_lm: &[Point]) -> Result<(Tensor, Tensor)> {
    let (h, w) = (reference.shape()[0], reference.shape()[1]);
    let map = WarpMap::new(src_lm, ref_lm, h, w)?;
    Ok((map.apply(reference)?, map.validity()))
}
