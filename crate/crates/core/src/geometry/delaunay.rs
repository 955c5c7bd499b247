use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Triangles as counter-clockwise index triples into the landmark list.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TriangleMesh {
    pub triangles: Vec<[usize; 3]>,
}

/// Twice the signed area of `abc`; positive when counter-clockwise.
pub fn orient(a: Point, b: Point, c: Point) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

/// Positive when `d` is strictly inside the circumcircle of the
/// counter-clockwise triangle `abc`.
pub fn incircle(a: Point, b: Point, c: Point, d: Point) -> f64 {
    let (adx, ady) = (a[0] - d[0], a[1] - d[1]);
    let (bdx, bdy) = (b[0] - d[0], b[1] - d[1]);
    let (cdx, cdy) = (c[0] - d[0], c[1] - d[1]);
    let ad = adx * adx + ady * ady;
    let bd = bdx * bdx + bdy * bdy;
    let cd = cdx * cdx + cdy * cdy;
    adx * (bdy * cd - bd * cdy) - ady * (bdx * cd - bd * cdx) + ad * (bdx * cdy - bdy * cdx)
}

/// Scale-aware tolerance for the incircle determinant.
fn incircle_eps(pts: &[Point]) -> f64 {
    let span = pts
        .iter()
        .flat_map(|p| p.iter())
        .fold(0.0f64, |m, v| m.max(v.abs()))
        .max(1.0);
    1e-12 * span.powi(4)
}

fn validate(points: &[Point]) -> Result<()> {
    if points.len() < 3 {
        return Err(Error::invalid(format!("triangulation needs at least 3 points, got {}", points.len())));
    }
    if let Some(i) = points.iter().position(|p| !p[0].is_finite() || !p[1].is_finite()) {
        return Err(Error::invalid(format!("landmark {i} is not finite")));
    }
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&i, &j| points[i].partial_cmp(&points[j]).unwrap());
    for w in order.windows(2) {
        if points[w[0]] == points[w[1]] {
            return Err(Error::invalid(format!("duplicate landmarks {} and {}", w[0].min(w[1]), w[0].max(w[1]))));
        }
    }
    let a = points[0];
    let b = points[1];
    if points.iter().all(|&c| orient(a, b, c) == 0.0) {
        return Err(Error::Degenerate("all landmarks are collinear".into()));
    }
    Ok(())
}

/// Delaunay triangulation by lexicographic sweep followed by Lawson flips.
///
/// Co-circular configurations keep the sweep's diagonal, which depends only
/// on the point order, so the output is deterministic.
pub fn delaunay(points: &[Point]) -> Result<TriangleMesh> {
    validate(points)?;
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&i, &j| points[i].partial_cmp(&points[j]).unwrap().then(i.cmp(&j)));
    let p = |i: usize| points[i];

    // Leading collinear run, closed by the first point off its line.
    let mut k = 2;
    while orient(p(order[0]), p(order[1]), p(order[k])) == 0.0 {
        k += 1;
    }
    let apex = order[k];
    let run = &order[..k];
    let mut tris: Vec<[usize; 3]> = Vec::new();
    for w in run.windows(2) {
        tris.push(ccw(points, [w[0], w[1], apex]));
    }
    // Counter-clockwise hull polygon.
    let mut hull: Vec<usize> = if orient(p(run[0]), p(run[k - 1]), p(apex)) > 0.0 {
        let mut h = run.to_vec();
        h.push(apex);
        h
    } else {
        let mut h = vec![apex];
        h.extend(run.iter().rev());
        h
    };

    for &q in &order[k + 1..] {
        let n = hull.len();
        let visible: Vec<bool> = (0..n)
            .map(|i| orient(p(hull[i]), p(hull[(i + 1) % n]), p(q)) < 0.0)
            .collect();
        // Visible edges form one contiguous arc; find its start.
        let start = (0..n)
            .find(|&i| visible[i] && !visible[(i + n - 1) % n])
            .expect("a point beyond the sweep line sees the hull");
        let mut i = start;
        let mut arc = vec![hull[i]];
        while visible[i] {
            let (a, b) = (hull[i], hull[(i + 1) % n]);
            tris.push([b, a, q]);
            arc.push(b);
            i = (i + 1) % n;
        }
        // Replace the arc interior with q.
        let first = arc[0];
        let last = *arc.last().unwrap();
        let mut next = Vec::with_capacity(n + 1);
        let mut j = hull.iter().position(|&v| v == last).unwrap();
        loop {
            next.push(hull[j]);
            if hull[j] == first {
                break;
            }
            j = (j + 1) % n;
        }
        next.push(q);
        hull = next;
    }

    lawson(points, &mut tris);
    tris.sort();
    Ok(TriangleMesh { triangles: tris })
}

fn ccw(points: &[Point], t: [usize; 3]) -> [usize; 3] {
    if orient(points[t[0]], points[t[1]], points[t[2]]) < 0.0 {
        [t[0], t[2], t[1]]
    } else {
        t
    }
}

fn lawson(points: &[Point], tris: &mut [[usize; 3]]) {
    let eps = incircle_eps(points);
    let cap = 10 * tris.len() * tris.len() + 100;
    for _ in 0..cap {
        let mut edges: BTreeMap<(usize, usize), Vec<usize>> = BTreeMap::new();
        for (ti, t) in tris.iter().enumerate() {
            for e in 0..3 {
                let (a, b) = (t[e], t[(e + 1) % 3]);
                edges.entry((a.min(b), a.max(b))).or_default().push(ti);
            }
        }
        let mut touched = vec![false; tris.len()];
        let mut flipped = false;
        for ((a, b), ts) in edges {
            if ts.len() != 2 || touched[ts[0]] || touched[ts[1]] {
                continue;
            }
            let (t0, t1) = (tris[ts[0]], tris[ts[1]]);
            let c = *t0.iter().find(|&&v| v != a && v != b).unwrap();
            let d = *t1.iter().find(|&&v| v != a && v != b).unwrap();
            let [x, y, z] = t0;
            if incircle(points[x], points[y], points[z], points[d]) > eps {
                // Flip a-b to c-d; both new triangles stay counter-clockwise
                // because abcd is a convex quadrilateral here.
                tris[ts[0]] = ccw(points, [c, d, a]);
                tris[ts[1]] = ccw(points, [d, c, b]);
                touched[ts[0]] = true;
                touched[ts[1]] = true;
                flipped = true;
            }
        }
        if !flipped {
            return;
        }
    }
}

/// Brute-force check: no landmark strictly inside any triangle's circumcircle.
pub fn is_delaunay(points: &[Point], mesh: &TriangleMesh) -> bool {
    let eps = incircle_eps(points);
    mesh.triangles.iter().all(|t| {
        (0..points.len())
            .filter(|i| !t.contains(i))
            .all(|i| incircle(points[t[0]], points[t[1]], points[t[2]], points[i]) <= eps)
    })
}
