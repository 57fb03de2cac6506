//! Reference values for tests: closed forms for boxes, balls, polygons and
//! the cap body, plus a brute-force grid minimization of the gauge.
//!
//! Nothing here calls the estimators; polygons are re-derived from their
//! vertex lists.

use std::f64::consts::PI;

use serde::Serialize;

use crate::bodies::{ConvexBody, GaugeBody, Polytope};
use crate::error::{Error, Result};
use crate::parallel_measures::CellMeasure;
use crate::sphere_cells::SphereCells;
use crate::vector::Vector;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleMethod {
    ClosedForm,
    GridBruteForce,
    Triangulation,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleReport {
    pub quantity: String,
    pub value: f64,
    pub method: OracleMethod,
}

impl OracleReport {
    pub fn new(quantity: impl Into<String>, value: f64, method: OracleMethod) -> Self {
        OracleReport {
            quantity: quantity.into(),
            value,
            method,
        }
    }
}

/// Counter-clockwise extreme points of a planar point set (gift wrapping).
pub fn polygon_ring(vertices: &[Vector]) -> Result<Vec<Vector>> {
    if vertices.len() < 3 || vertices.iter().any(|v| v.dim() != 2) {
        return Err(Error::InvalidSpec("a polygon needs three planar points".into()));
    }
    let cross = |o: &Vector, a: &Vector, b: &Vector| {
        (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    };
    let start = *vertices
        .iter()
        .min_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])))
        .unwrap();
    let mut ring = vec![start];
    let mut current = start;
    loop {
        let mut next = if vertices[0] == current { vertices[1] } else { vertices[0] };
        for v in vertices {
            if *v == current {
                continue;
            }
            let c = cross(&current, &next, v);
            // clockwise of the candidate, or collinear and farther
            if c < 0.0 || (c == 0.0 && current.distance(v) > current.distance(&next)) {
                next = *v;
            }
        }
        if next == start {
            break;
        }
        ring.push(next);
        current = next;
        if ring.len() > vertices.len() {
            return Err(Error::InvalidSpec("degenerate polygon".into()));
        }
    }
    if ring.len() < 3 {
        return Err(Error::InvalidSpec("polygon has no interior".into()));
    }
    Ok(ring)
}

/// Edges `(outer unit normal, length)` of a convex polygon.
pub fn polygon_edges(vertices: &[Vector]) -> Result<Vec<(Vector, f64)>> {
    let ring = polygon_ring(vertices)?;
    let mut edges = Vec::with_capacity(ring.len());
    for i in 0..ring.len() {
        let a = ring[i];
        let b = ring[(i + 1) % ring.len()];
        let len = a.distance(&b);
        if len < 1e-12 {
            return Err(Error::DegenerateEdge { length: len });
        }
        edges.push((Vector::from_slice(&[(b[1] - a[1]) / len, -(b[0] - a[0]) / len]), len));
    }
    Ok(edges)
}

pub fn polygon_area(vertices: &[Vector]) -> Result<f64> {
    let ring = polygon_ring(vertices)?;
    let mut twice = 0.0;
    for i in 0..ring.len() {
        let (a, b) = (ring[i], ring[(i + 1) % ring.len()]);
        twice += a[0] * b[1] - a[1] * b[0];
    }
    Ok(0.5 * twice)
}

pub fn polygon_perimeter(vertices: &[Vector]) -> Result<f64> {
    Ok(polygon_edges(vertices)?.iter().map(|e| e.1).sum())
}

/// Surface area measure of a polygon: edge lengths at the edge normals.
pub fn polygon_area_measure(p: &Polytope, cells: &SphereCells) -> Result<CellMeasure> {
    if cells.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: cells.dim(),
        });
    }
    let mut masses = vec![0.0; cells.count()];
    for (normal, len) in polygon_edges(p.vertices())? {
        masses[cells.locate(&normal)] += len;
    }
    Ok(CellMeasure::exact(masses))
}

/// `area(P + rho B^2)`.
pub fn planar_parallel_area(p: &Polytope, rho: f64) -> Result<f64> {
    if !(rho >= 0.0) {
        return Err(Error::InvalidSpec("rho must be nonnegative".into()));
    }
    let v = p.vertices();
    Ok(polygon_area(v)? + polygon_perimeter(v)? * rho + PI * rho * rho)
}

/// Perimeter of `P + rho B^2`.
pub fn planar_parallel_perimeter(p: &Polytope, rho: f64) -> Result<f64> {
    Ok(polygon_perimeter(p.vertices())? + 2.0 * PI * rho)
}

/// Euclidean distance from `x` to a convex polygon.
pub fn polygon_distance(vertices: &[Vector], x: &Vector) -> Result<f64> {
    let ring = polygon_ring(vertices)?;
    let mut inside = true;
    let mut best = f64::INFINITY;
    for i in 0..ring.len() {
        let (a, b) = (ring[i], ring[(i + 1) % ring.len()]);
        let ab = b - a;
        let ax = *x - a;
        if ab[0] * ax[1] - ab[1] * ax[0] < 0.0 {
            inside = false;
        }
        let t = (ax.dot(&ab) / ab.norm_squared()).clamp(0.0, 1.0);
        best = best.min((ax - ab * t).norm());
    }
    Ok(if inside { 0.0 } else { best })
}

/// `n`-volume of the ball of radius `r`, `n <= 3`.
pub fn ball_volume(n: usize, r: f64) -> Result<f64> {
    match n {
        1 => Ok(2.0 * r),
        2 => Ok(PI * r * r),
        3 => Ok(4.0 / 3.0 * PI * r * r * r),
        _ => Err(Error::Unsupported(format!("ball volume in dimension {n}"))),
    }
}

pub fn ellipsoid_volume(semi_axes: &[f64]) -> Result<f64> {
    Ok(ball_volume(semi_axes.len(), 1.0)? * semi_axes.iter().product::<f64>())
}

/// `vol(box + t B^n)` for a box with the given side lengths, `n = 2, 3`.
pub fn box_parallel_volume(sides: &[f64], t: f64) -> Result<f64> {
    let v = box_mixed_volumes(sides)?;
    let n = sides.len();
    Ok((0..=n)
        .map(|j| crate::numeric::binomial(n, j) * t.powi((n - j) as i32) * v[j])
        .sum())
}

/// `V(box[j], B[n - j])` for `j = 0..=n`, `n = 2, 3`.
pub fn box_mixed_volumes(sides: &[f64]) -> Result<Vec<f64>> {
    match sides {
        [a, b] => Ok(vec![PI, a + b, a * b]),
        [a, b, c] => Ok(vec![
            4.0 * PI / 3.0,
            PI * (a + b + c) / 3.0,
            2.0 * (a * b + b * c + c * a) / 3.0,
            a * b * c,
        ]),
        _ => Err(Error::Unsupported("box mixed volumes need n = 2 or 3".into())),
    }
}

/// `V(K[j], B[3 - j])` for the cap body `conv(B^3, {a})`, `|a| = 2`: the
/// body is 1-tangential to the ball, so `V_1 = V_2 = V_3 = vol K = 3 pi / 2`.
pub fn cap_body_mixed_volumes() -> Vec<f64> {
    // ball without the cap beyond the tangency plane x = 1/2, plus the cone
    let cap = PI * 0.25 * (3.0 - 0.5) / 3.0;
    let cone = PI * 0.75 * 1.5 / 3.0;
    let vol = 4.0 * PI / 3.0 - cap + cone;
    vec![4.0 * PI / 3.0, vol, vol, vol]
}

/// Area measures `S_0, S_1, S_2` of an axis box in space relative to the
/// ball. `S_2` puts the face areas on `+-e_i`, `S_1` spreads half of each
/// edge length over its quarter circle of normals (integrated with
/// `arc_points` midpoints per edge), `S_0` is spherical area.
pub fn box_area_measures(sides: &[f64], cells: &SphereCells, arc_points: usize) -> Result<Vec<CellMeasure>> {
    let &[a, b, c] = sides else {
        return Err(Error::Unsupported("box area measures need n = 3".into()));
    };
    if cells.dim() != 3 {
        return Err(Error::DimensionMismatch {
            expected: 3,
            got: cells.dim(),
        });
    }
    let m = cells.count();
    let s0 = (0..m).map(|c| cells.area(c)).collect();
    let len = [a, b, c];
    let mut s1 = vec![0.0; m];
    let mut s2 = vec![0.0; m];
    for i in 0..3 {
        let face = len[(i + 1) % 3] * len[(i + 2) % 3];
        for sign in [1.0, -1.0] {
            s2[cells.locate(&(Vector::basis(3, i) * sign))] += face;
        }
        // four edges parallel to e_i, normals in the quarter circles
        // between +-e_j and +-e_k
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        for (sj, sk) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
            let w = 0.5 * len[i] * (PI / 2.0) / arc_points as f64;
            for q in 0..arc_points {
                let th = (q as f64 + 0.5) / arc_points as f64 * PI / 2.0;
                let mut u = Vector::zeros(3);
                u[j] = sj * th.cos();
                u[k] = sk * th.sin();
                s1[cells.locate(&u)] += w;
            }
        }
    }
    Ok(vec![CellMeasure::exact(s0), CellMeasure::exact(s1), CellMeasure::exact(s2)])
}

/// Upper bound on `d^E(K, x)`: the minimum of `g_E(x - y)` over the grid
/// points `y` of `K` on a `resolution^n` grid over the bounding box of `K`,
/// followed by finer grids around the near-optimal region. Near a smooth
/// optimum on a flat face the windows shrink only like the square root of
/// the step, which limits the accuracy to about `1e-5` of the body size.
pub fn grid_gauge_distance(k: &ConvexBody, e: &GaugeBody, x: &Vector, resolution: usize) -> Result<f64> {
    let n = k.dim();
    if !(n == 2 || n == 3) {
        return Err(Error::Unsupported(format!("grid search in dimension {n}")));
    }
    if e.dim() != n || x.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: x.dim() });
    }
    if resolution < 2 {
        return Err(Error::InvalidSpec("resolution must be at least 2".into()));
    }
    if k.contains(x) {
        return Ok(0.0);
    }
    let (lo, hi) = k.bounding_box(None);
    let lipschitz = 1.0 / e.inner_radius();
    let f = |y: &Vector| e.gauge(&(*x - *y));
    let (mut wlo, mut whi) = (lo, hi);
    let mut res = resolution;
    let mut best = f64::INFINITY;
    let zoom_res = if n == 2 { 512 } else { 64 };
    for _level in 0..40 {
        let step = Vector::from_fn(n, |i| (whi[i] - wlo[i]) / (res - 1) as f64);
        let scan = |visit: &mut dyn FnMut(&Vector, f64)| {
            let total = res.pow(n as u32);
            for idx in 0..total {
                let mut r = idx;
                let y = Vector::from_fn(n, |i| {
                    let c = r % res;
                    r /= res;
                    wlo[i] + step[i] * c as f64
                });
                if k.contains(&y) {
                    visit(&y, f(&y));
                }
            }
        };
        let mut level_best = f64::INFINITY;
        scan(&mut |_, v| level_best = level_best.min(v));
        if !level_best.is_finite() {
            if best.is_finite() {
                break;
            }
            return Err(Error::InvalidSpec("no grid point falls in K".into()));
        }
        best = best.min(level_best);
        let slack = lipschitz * step.norm();
        let mut nlo = Vector::from_fn(n, |_| f64::INFINITY);
        let mut nhi = Vector::from_fn(n, |_| f64::NEG_INFINITY);
        scan(&mut |y, v| {
            if v <= level_best + slack {
                for i in 0..n {
                    nlo[i] = nlo[i].min(y[i]);
                    nhi[i] = nhi[i].max(y[i]);
                }
            }
        });
        for i in 0..n {
            nlo[i] = (nlo[i] - step[i]).max(lo[i]);
            nhi[i] = (nhi[i] + step[i]).min(hi[i]);
        }
        let width = (0..n).map(|i| nhi[i] - nlo[i]).fold(0.0, f64::max);
        let old = (0..n).map(|i| whi[i] - wlo[i]).fold(0.0, f64::max);
        if width < 1e-12 * (1.0 + old) || (res == zoom_res && width > 0.99 * old) {
            break;
        }
        (wlo, whi, res) = (nlo, nhi, zoom_res);
    }
    Ok(best)
}
