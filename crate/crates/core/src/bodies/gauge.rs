//! Gauge bodies: smooth, strictly convex bodies with the origin inside.

use crate::error::{Error, Result};
use crate::numeric::{convex_line_min, golden_min, sphere_extremum};
use crate::vector::{SymMatrix, Vector};

use super::polytope::Polytope;
use super::Direction;

/// Smallest admissible smoothing radius of a [`GaugeShape::SmoothedPolytope`].
pub const MIN_EPSILON: f64 = 1e-3;

#[derive(Clone, Debug)]
pub enum GaugeShape {
    Ball {
        radius: f64,
    },
    /// `h(u) = sqrt(u^T A u)`.
    Ellipsoid {
        a: SymMatrix,
        a_inv: SymMatrix,
    },
    /// `g(w) = (sum |w_i / s_i|^p)^(1/p)`.
    LpBall {
        p: f64,
        q: f64,
        scales: Vector,
    },
    /// `h = h_P + epsilon |u|`, the outer parallel body of `P`.
    SmoothedPolytope {
        polytope: Polytope,
        epsilon: f64,
    },
}

#[derive(Clone, Debug)]
pub struct GaugeBody {
    shape: GaugeShape,
    dim: usize,
    inner_radius: f64,
    outer_radius: f64,
}

#[inline]
fn signed_pow(x: f64, e: f64) -> f64 {
    if e == 3.0 {
        x * x * x
    } else if e == 1.0 {
        x
    } else {
        x.signum() * x.abs().powf(e)
    }
}

#[inline]
fn abs_pow(x: f64, e: f64) -> f64 {
    if e == 4.0 {
        let y = x * x;
        y * y
    } else if e == 2.0 {
        x * x
    } else {
        x.abs().powf(e)
    }
}

impl GaugeBody {
    pub fn ball(dim: usize, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidSpec(format!("ball radius {radius} must be positive")));
        }
        Ok(GaugeBody {
            shape: GaugeShape::Ball { radius },
            dim,
            inner_radius: radius,
            outer_radius: radius,
        })
    }

    /// Ellipsoid with support function `sqrt(u^T A u)`, `A` positive definite.
    pub fn ellipsoid(rows: &[Vec<f64>]) -> Result<Self> {
        let a = SymMatrix::from_rows(rows)
            .ok_or_else(|| Error::InvalidSpec("ellipsoid matrix must be square".into()))?;
        let eig = nalgebra::SymmetricEigen::new(a.to_nalgebra());
        let lmin = eig.eigenvalues.min();
        let lmax = eig.eigenvalues.max();
        if !(lmin > 0.0) || !lmax.is_finite() {
            return Err(Error::InvalidSpec("ellipsoid matrix must be positive definite".into()));
        }
        let inv = a
            .to_nalgebra()
            .cholesky()
            .ok_or_else(|| Error::InvalidSpec("ellipsoid matrix must be positive definite".into()))?
            .inverse();
        Ok(GaugeBody {
            dim: a.dim(),
            shape: GaugeShape::Ellipsoid {
                a,
                a_inv: SymMatrix::from_nalgebra(&inv),
            },
            inner_radius: lmin.sqrt(),
            outer_radius: lmax.sqrt(),
        })
    }

    /// Axis-parallel ellipsoid with the given semi-axes.
    pub fn ellipsoid_axes(semi_axes: &[f64]) -> Result<Self> {
        let n = semi_axes.len();
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| if i == j { semi_axes[i] * semi_axes[i] } else { 0.0 })
                    .collect()
            })
            .collect();
        GaugeBody::ellipsoid(&rows)
    }

    pub fn lp_ball(p: f64, scales: &[f64]) -> Result<Self> {
        if !(p > 1.0 && p.is_finite()) {
            return Err(Error::InvalidSpec(format!("exponent p = {p} must lie in (1, inf)")));
        }
        if scales.is_empty() || scales.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::InvalidSpec("lp scales must be positive".into()));
        }
        let scales = Vector::from_slice(scales);
        let q = p / (p - 1.0);
        let smin = scales.as_slice().iter().cloned().fold(f64::INFINITY, f64::min);
        let smax = scales.max_abs();
        let mut body = GaugeBody {
            dim: scales.dim(),
            shape: GaugeShape::LpBall { p, q, scales },
            inner_radius: smin,
            outer_radius: smax,
        };
        // the ball is the extreme case on one side of p = 2 only
        if p < 2.0 {
            body.inner_radius = sphere_extremum(body.dim, |u| body.support(u), false);
        } else if p > 2.0 {
            body.outer_radius = sphere_extremum(body.dim, |u| body.support(u), true);
        }
        Ok(body)
    }

    pub fn smoothed_polytope(vertices: Vec<Vector>, epsilon: f64) -> Result<Self> {
        if !(epsilon >= MIN_EPSILON && epsilon.is_finite()) {
            return Err(Error::InvalidSpec(format!(
                "smoothing epsilon {epsilon} below {MIN_EPSILON}"
            )));
        }
        let polytope = Polytope::new(vertices)?;
        let dim = polytope.dim();
        let origin = Vector::zeros(dim);
        let Some(margin) = polytope.facet_margin(&origin) else {
            return Err(Error::Unsupported(
                "smoothed polytopes need dimension 2 or 3".into(),
            ));
        };
        let dist0 = polytope.nearest_point(&origin).unwrap().norm();
        if dist0 >= epsilon {
            return Err(Error::InvalidSpec(
                "origin must be interior to the smoothed polytope".into(),
            ));
        }
        let inner_radius = if margin >= 0.0 { margin + epsilon } else { epsilon - dist0 };
        let outer_radius = polytope
            .vertices()
            .iter()
            .map(|v| v.norm())
            .fold(0.0, f64::max)
            + epsilon;
        Ok(GaugeBody {
            shape: GaugeShape::SmoothedPolytope { polytope, epsilon },
            dim,
            inner_radius,
            outer_radius,
        })
    }

    pub fn shape(&self) -> &GaugeShape {
        &self.shape
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Largest `r` with `r B^n` inside the body.
    pub fn inner_radius(&self) -> f64 {
        self.inner_radius
    }

    /// Smallest `R` with the body inside `R B^n`.
    pub fn outer_radius(&self) -> f64 {
        self.outer_radius
    }

    pub fn is_euclidean_ball(&self) -> bool {
        matches!(self.shape, GaugeShape::Ball { .. })
    }

    /// `lambda E`.
    pub fn scaled(&self, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidSpec("scale must be positive".into()));
        }
        let shape = match &self.shape {
            GaugeShape::Ball { radius } => GaugeShape::Ball {
                radius: radius * lambda,
            },
            GaugeShape::Ellipsoid { a, a_inv } => GaugeShape::Ellipsoid {
                a: a.scaled(lambda * lambda),
                a_inv: a_inv.scaled(1.0 / (lambda * lambda)),
            },
            GaugeShape::LpBall { p, q, scales } => GaugeShape::LpBall {
                p: *p,
                q: *q,
                scales: *scales * lambda,
            },
            GaugeShape::SmoothedPolytope { polytope, epsilon } => GaugeShape::SmoothedPolytope {
                polytope: polytope.scaled(lambda)?,
                epsilon: epsilon * lambda,
            },
        };
        Ok(GaugeBody {
            shape,
            dim: self.dim,
            inner_radius: self.inner_radius * lambda,
            outer_radius: self.outer_radius * lambda,
        })
    }

    /// Support function `h_E(u)`; positively homogeneous, any `u`.
    #[inline]
    pub fn support(&self, u: &Vector) -> f64 {
        match &self.shape {
            GaugeShape::Ball { radius } => radius * u.norm(),
            GaugeShape::Ellipsoid { a, .. } => a.quad(u).max(0.0).sqrt(),
            GaugeShape::LpBall { q, scales, .. } => {
                let mut s = 0.0;
                let umax = u.max_abs();
                if umax == 0.0 {
                    return 0.0;
                }
                for i in 0..self.dim {
                    s += abs_pow(scales[i] * u[i] / umax, *q);
                }
                umax * s.powf(1.0 / q)
            }
            GaugeShape::SmoothedPolytope { polytope, epsilon } => {
                polytope.support_value(u) + epsilon * u.norm()
            }
        }
    }

    /// `grad h_E(u)`, the boundary point with outer normal `u`.
    #[inline]
    pub fn support_gradient(&self, u: &Vector) -> Vector {
        match &self.shape {
            GaugeShape::Ball { radius } => *u * (radius / u.norm()),
            GaugeShape::Ellipsoid { a, .. } => {
                let au = a.mul_vec(u);
                au * (1.0 / au.dot(u).sqrt())
            }
            GaugeShape::LpBall { q, scales, .. } => {
                let h = self.support(u);
                Vector::from_fn(self.dim, |i| {
                    scales[i] * signed_pow(scales[i] * u[i] / h, q - 1.0)
                })
            }
            GaugeShape::SmoothedPolytope { polytope, epsilon } => {
                polytope.support_point(u) + *u * (epsilon / u.norm())
            }
        }
    }

    /// Hessian of `h_E` at `u`.
    pub fn support_hessian(&self, u: &Vector) -> SymMatrix {
        let n = self.dim;
        let identity_minus = |s: f64| {
            let r = u.norm();
            SymMatrix::from_fn(n, |i, j| if i == j { s / r } else { 0.0 })
                .add_outer(-s / (r * r * r), u)
        };
        match &self.shape {
            GaugeShape::Ball { radius } => identity_minus(*radius),
            GaugeShape::Ellipsoid { a, .. } => {
                let h = self.support(u);
                let au = a.mul_vec(u);
                a.scaled(1.0 / h).add_outer(-1.0 / (h * h * h), &au)
            }
            GaugeShape::LpBall { q, scales, .. } => {
                let h = self.support(u);
                let grad = self.support_gradient(u);
                SymMatrix::from_fn(n, |i, j| {
                    let diag = if i == j {
                        scales[i] * scales[i] * abs_pow(scales[i] * u[i] / h, q - 2.0) / h
                    } else {
                        0.0
                    };
                    (q - 1.0) * (diag - grad[i] * grad[j] / h)
                })
            }
            GaugeShape::SmoothedPolytope { epsilon, .. } => identity_minus(*epsilon),
        }
    }

    /// Minkowski functional `g_E(w) = min{s >= 0 : w in sE}`.
    #[inline]
    pub fn gauge(&self, w: &Vector) -> f64 {
        match &self.shape {
            GaugeShape::Ball { radius } => w.norm() / radius,
            GaugeShape::Ellipsoid { a_inv, .. } => a_inv.quad(w).max(0.0).sqrt(),
            GaugeShape::LpBall { p, scales, .. } => {
                let mut m: f64 = 0.0;
                for i in 0..self.dim {
                    m = m.max((w[i] / scales[i]).abs());
                }
                if m == 0.0 {
                    return 0.0;
                }
                let mut s = 0.0;
                for i in 0..self.dim {
                    s += abs_pow(w[i] / scales[i] / m, *p);
                }
                m * s.powf(1.0 / p)
            }
            GaugeShape::SmoothedPolytope { polytope, epsilon } => {
                smoothed_gauge(polytope, *epsilon, w, self.inner_radius)
            }
        }
    }

    /// `grad g_E(w) = u / h_E(u)` with `u = u_E(w / g_E(w))`.
    #[inline]
    pub fn gauge_gradient(&self, w: &Vector) -> Vector {
        match &self.shape {
            GaugeShape::Ball { radius } => *w * (1.0 / (radius * w.norm())),
            GaugeShape::Ellipsoid { a_inv, .. } => {
                let aw = a_inv.mul_vec(w);
                aw * (1.0 / aw.dot(w).sqrt())
            }
            GaugeShape::LpBall { p, scales, .. } => {
                let g = self.gauge(w);
                Vector::from_fn(self.dim, |i| signed_pow(w[i] / scales[i] / g, p - 1.0) / scales[i])
            }
            GaugeShape::SmoothedPolytope { polytope, epsilon } => {
                let g = smoothed_gauge(polytope, *epsilon, w, self.inner_radius);
                let b = *w * (1.0 / g);
                let u = (b - polytope.nearest_point(&b).unwrap())
                    .normalized()
                    .unwrap_or_else(|| b.normalized().unwrap());
                u * (1.0 / self.support(&u))
            }
        }
    }

    /// Minimizer over `t in [0, t_max]` of `g_E(w - t d)`.
    pub fn line_min(&self, w: &Vector, d: &Vector, t_max: f64) -> f64 {
        let quadratic = |wd: f64, dd: f64| {
            if dd <= 0.0 {
                0.0
            } else {
                (wd / dd).clamp(0.0, t_max)
            }
        };
        match &self.shape {
            GaugeShape::Ball { .. } => quadratic(w.dot(d), d.norm_squared()),
            GaugeShape::Ellipsoid { a_inv, .. } => {
                let md = a_inv.mul_vec(d);
                quadratic(w.dot(&md), d.dot(&md))
            }
            GaugeShape::LpBall { p, scales, .. } => {
                let n = self.dim;
                let mut a = [0.0; crate::vector::MAX_DIM];
                let mut e = [0.0; crate::vector::MAX_DIM];
                // normalize so the powers stay in range
                let scale = (0..n)
                    .map(|i| (w[i] / scales[i]).abs().max((d[i] * t_max / scales[i]).abs()))
                    .fold(0.0, f64::max);
                if scale == 0.0 {
                    return 0.0;
                }
                for i in 0..n {
                    a[i] = w[i] / scales[i] / scale;
                    e[i] = d[i] / scales[i] / scale;
                }
                let p = *p;
                convex_line_min(
                    |t| {
                        let (mut d1, mut d2) = (0.0, 0.0);
                        for i in 0..n {
                            let r = a[i] - t * e[i];
                            d1 -= e[i] * signed_pow(r, p - 1.0);
                            d2 += e[i] * e[i] * abs_pow(r, p - 2.0);
                        }
                        (p * d1, p * (p - 1.0) * d2)
                    },
                    t_max,
                )
            }
            GaugeShape::SmoothedPolytope { .. } => {
                golden_min(|t| self.gauge(&w.axpy(-t, d)), 0.0, t_max, 80)
            }
        }
    }

    /// `x_E(u)`: the boundary point with outer unit normal `u`.
    pub fn reverse_gauss(&self, u: &Direction) -> Vector {
        self.support_gradient(u.as_vector())
    }

    /// `u_E(x)` for a boundary point `x`.
    pub fn gauss_map(&self, x: &Vector, tol: f64) -> Result<Direction> {
        if x.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.dim(),
            });
        }
        let deviation = (self.gauge(x) - 1.0).abs();
        if !(deviation < tol) {
            return Err(Error::NotOnBoundary { deviation });
        }
        Ok(Direction::from_unit(
            self.gauge_gradient(x).normalized().expect("nonzero gauge gradient"),
        ))
    }
}

/// Gauge of `P + epsilon B` by bisection on the scale `s`: `w / s` lies in
/// the body iff `dist(w / s, P) <= epsilon`.
fn smoothed_gauge(polytope: &Polytope, epsilon: f64, w: &Vector, inner_radius: f64) -> f64 {
    let norm = w.norm();
    if norm == 0.0 {
        return 0.0;
    }
    let inside = |s: f64| {
        let b = *w * (1.0 / s);
        (b - polytope.nearest_point(&b).unwrap()).norm() <= epsilon
    };
    let mut hi = norm / inner_radius;
    let mut lo = 0.0;
    while !inside(hi) {
        lo = hi;
        hi *= 2.0;
    }
    while hi - lo > 1e-10 * hi {
        let mid = 0.5 * (lo + hi);
        if inside(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}
