//! Convex bodies and gauge bodies exposed through support, support-point and
//! membership oracles.

mod gauge;
mod polytope;
mod spec;
mod tangential;

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fw::{self, EuclideanNorm, FwOptions};
use crate::numeric::{golden_min, sphere_directions};
use crate::vector::{SymMatrix, Vector};

pub use gauge::{GaugeBody, GaugeShape, MIN_EPSILON};
pub use polytope::{Facet, Hull, Polytope};
pub use spec::{BodySpec, TermSpec};
pub use tangential::{make_tangential_body, TangentialBody, TangentialSpec};

/// A unit vector.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Direction(Vector);

impl Direction {
    /// Normalizes `v`; fails for the zero vector.
    pub fn new(v: Vector) -> Result<Self> {
        v.normalized()
            .map(Direction)
            .ok_or_else(|| Error::InvalidSpec("direction must be nonzero".into()))
    }

    /// Wraps a vector already known to be of unit length.
    pub fn from_unit(v: Vector) -> Self {
        debug_assert!((v.norm() - 1.0).abs() < 1e-12, "not a unit vector: {v:?}");
        Direction(v)
    }

    pub fn as_vector(&self) -> &Vector {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }
}

impl std::ops::Deref for Direction {
    type Target = Vector;
    fn deref(&self) -> &Vector {
        &self.0
    }
}

/// Support function of a smooth body about its reference point.
pub trait SupportFunction: Send + Sync + fmt::Debug {
    fn dim(&self) -> usize;
    fn value(&self, u: &Vector) -> f64;
    fn gradient(&self, u: &Vector) -> Vector;
    fn hessian(&self, u: &Vector) -> SymMatrix;
    fn outer_radius(&self) -> f64;
    fn inner_radius(&self) -> f64;
    /// Minkowski functional about the reference point, when known.
    fn gauge(&self, _w: &Vector) -> Option<f64> {
        None
    }
}

impl SupportFunction for GaugeBody {
    fn dim(&self) -> usize {
        GaugeBody::dim(self)
    }
    fn value(&self, u: &Vector) -> f64 {
        self.support(u)
    }
    fn gradient(&self, u: &Vector) -> Vector {
        self.support_gradient(u)
    }
    fn hessian(&self, u: &Vector) -> SymMatrix {
        self.support_hessian(u)
    }
    fn outer_radius(&self) -> f64 {
        GaugeBody::outer_radius(self)
    }
    fn inner_radius(&self) -> f64 {
        GaugeBody::inner_radius(self)
    }
    fn gauge(&self, w: &Vector) -> Option<f64> {
        Some(GaugeBody::gauge(self, w))
    }
}

#[derive(Debug)]
struct ScaledSupport {
    inner: Arc<dyn SupportFunction>,
    lambda: f64,
}

impl SupportFunction for ScaledSupport {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn value(&self, u: &Vector) -> f64 {
        self.lambda * self.inner.value(u)
    }
    fn gradient(&self, u: &Vector) -> Vector {
        self.inner.gradient(u) * self.lambda
    }
    fn hessian(&self, u: &Vector) -> SymMatrix {
        self.inner.hessian(u).scaled(self.lambda)
    }
    fn outer_radius(&self) -> f64 {
        self.lambda * self.inner.outer_radius()
    }
    fn inner_radius(&self) -> f64 {
        self.lambda * self.inner.inner_radius()
    }
    fn gauge(&self, w: &Vector) -> Option<f64> {
        self.inner.gauge(w).map(|g| g / self.lambda)
    }
}

/// `h_K(u) = <center, u> + h(u)` for an analytic support function `h`.
#[derive(Clone, Debug)]
pub struct SmoothBody {
    evaluator: Arc<dyn SupportFunction>,
    center: Vector,
}

impl SmoothBody {
    pub fn new(evaluator: Arc<dyn SupportFunction>, center: Vector) -> Result<Self> {
        if evaluator.dim() != center.dim() {
            return Err(Error::DimensionMismatch {
                expected: evaluator.dim(),
                got: center.dim(),
            });
        }
        Ok(SmoothBody { evaluator, center })
    }

    pub fn center(&self) -> Vector {
        self.center
    }

    pub fn support_value(&self, u: &Vector) -> f64 {
        self.center.dot(u) + self.evaluator.value(u)
    }

    pub fn support_gradient(&self, u: &Vector) -> Vector {
        self.center + self.evaluator.gradient(u)
    }

    pub fn support_hessian(&self, u: &Vector) -> SymMatrix {
        self.evaluator.hessian(u)
    }

    pub fn evaluator(&self) -> &Arc<dyn SupportFunction> {
        &self.evaluator
    }
}

#[derive(Clone, Debug)]
pub struct HullBody {
    base: Box<ConvexBody>,
    points: Vec<Vector>,
    /// The hull itself when the base is a polytope.
    exact: Option<Polytope>,
}

impl HullBody {
    pub fn base(&self) -> &ConvexBody {
        &self.base
    }

    pub fn points(&self) -> &[Vector] {
        &self.points
    }
}

#[derive(Clone, Debug)]
pub enum BodyKind {
    Polytope(Polytope),
    Ball { center: Vector, radius: f64 },
    Smooth(SmoothBody),
    Hull(HullBody),
    Minkowski(Vec<(f64, ConvexBody)>),
}

#[derive(Clone, Debug)]
pub struct ConvexBody {
    kind: BodyKind,
    center: Vector,
    outer_radius: f64,
}

/// Outcome of a membership query; `margin` is positive inside and its size
/// bounds how far the decision is from flipping.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Membership {
    pub inside: bool,
    pub margin: f64,
}

/// Default identity tolerance.
pub const TOL: f64 = 1e-9;

impl ConvexBody {
    pub fn polytope(vertices: Vec<Vector>) -> Result<Self> {
        Ok(ConvexBody::from_polytope(Polytope::new(vertices)?))
    }

    pub fn from_polytope(p: Polytope) -> Self {
        let center = p.centroid();
        let outer_radius = p
            .vertices()
            .iter()
            .map(|v| v.distance(&center))
            .fold(0.0, f64::max);
        ConvexBody {
            kind: BodyKind::Polytope(p),
            center,
            outer_radius,
        }
    }

    pub fn ball(center: Vector, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) || !center.is_finite() {
            return Err(Error::InvalidSpec(format!("ball radius {radius} must be positive")));
        }
        Ok(ConvexBody {
            kind: BodyKind::Ball { center, radius },
            center,
            outer_radius: radius,
        })
    }

    pub fn smooth(evaluator: Arc<dyn SupportFunction>, center: Vector) -> Result<Self> {
        let outer_radius = evaluator.outer_radius();
        Ok(ConvexBody {
            kind: BodyKind::Smooth(SmoothBody::new(evaluator, center)?),
            center,
            outer_radius,
        })
    }

    /// The gauge body itself, translated by `center`.
    pub fn from_gauge(e: &GaugeBody, center: Vector) -> Result<Self> {
        ConvexBody::smooth(Arc::new(e.clone()), center)
    }

    pub fn hull(base: ConvexBody, points: Vec<Vector>) -> Result<Self> {
        let dim = base.dim();
        if let Some(p) = points.iter().find(|p| p.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: p.dim(),
            });
        }
        let exact = match &base.kind {
            BodyKind::Polytope(p) => {
                let mut vs = p.vertices().to_vec();
                vs.extend_from_slice(&points);
                Some(Polytope::new(vs)?)
            }
            _ => None,
        };
        let center = base.center;
        let outer_radius = points
            .iter()
            .map(|p| p.distance(&center))
            .fold(base.outer_radius, f64::max);
        Ok(ConvexBody {
            kind: BodyKind::Hull(HullBody {
                base: Box::new(base),
                points,
                exact,
            }),
            center,
            outer_radius,
        })
    }

    pub fn minkowski(terms: Vec<(f64, ConvexBody)>) -> Result<Self> {
        let Some(dim) = terms.first().map(|t| t.1.dim()) else {
            return Err(Error::InvalidSpec("empty Minkowski combination".into()));
        };
        if terms.iter().any(|(c, _)| !(*c >= 0.0 && c.is_finite())) {
            return Err(Error::InvalidSpec("Minkowski coefficients must be nonnegative".into()));
        }
        if !terms.iter().any(|(c, _)| *c > 0.0) {
            return Err(Error::InvalidSpec("Minkowski combination has no interior".into()));
        }
        if let Some((_, b)) = terms.iter().find(|(_, b)| b.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: b.dim(),
            });
        }
        let center = terms
            .iter()
            .fold(Vector::zeros(dim), |acc, (c, b)| acc + b.center * *c);
        let outer_radius = terms.iter().map(|(c, b)| c * b.outer_radius).sum();
        Ok(ConvexBody {
            kind: BodyKind::Minkowski(terms),
            center,
            outer_radius,
        })
    }

    pub fn kind(&self) -> &BodyKind {
        &self.kind
    }

    pub fn dim(&self) -> usize {
        self.center.dim()
    }

    /// An interior point, also the center of the cached outer ball.
    pub fn center(&self) -> Vector {
        self.center
    }

    /// `R_out`: the body lies in the ball of this radius about [`Self::center`].
    pub fn outer_radius(&self) -> f64 {
        self.outer_radius
    }

    pub fn as_polytope(&self) -> Option<&Polytope> {
        match &self.kind {
            BodyKind::Polytope(p) => Some(p),
            BodyKind::Hull(h) => h.exact.as_ref(),
            _ => None,
        }
    }

    pub fn as_smooth(&self) -> Option<&SmoothBody> {
        match &self.kind {
            BodyKind::Smooth(s) => Some(s),
            _ => None,
        }
    }

    /// `h_K(v)` for any `v` (positively homogeneous).
    pub fn support_value(&self, v: &Vector) -> f64 {
        match &self.kind {
            BodyKind::Polytope(p) => p.support_value(v),
            BodyKind::Ball { center, radius } => center.dot(v) + radius * v.norm(),
            BodyKind::Smooth(s) => s.support_value(v),
            BodyKind::Hull(h) => h
                .points
                .iter()
                .map(|p| p.dot(v))
                .fold(h.base.support_value(v), f64::max),
            BodyKind::Minkowski(terms) => terms.iter().map(|(c, b)| c * b.support_value(v)).sum(),
        }
    }

    /// A maximizer of `<x, v>` over the body; ties go to the lowest index
    /// (base before the added points of a hull).
    pub fn support_point(&self, v: &Vector) -> Vector {
        match &self.kind {
            BodyKind::Polytope(p) => p.support_point(v),
            BodyKind::Ball { center, radius } => match v.normalized() {
                Some(u) => center.axpy(*radius, &u),
                None => *center,
            },
            BodyKind::Smooth(s) => {
                if v.norm_squared() == 0.0 {
                    s.center
                } else {
                    s.support_gradient(v)
                }
            }
            BodyKind::Hull(h) => {
                let mut best = h.base.support_point(v);
                let mut best_val = best.dot(v);
                for p in &h.points {
                    let val = p.dot(v);
                    if val > best_val {
                        best = *p;
                        best_val = val;
                    }
                }
                best
            }
            BodyKind::Minkowski(terms) => terms
                .iter()
                .fold(Vector::zeros(self.dim()), |acc, (c, b)| {
                    acc + b.support_point(v) * *c
                }),
        }
    }

    /// `(h_K, grad h_K, hess h_K)` at `u` when the support function is twice
    /// differentiable away from the origin: balls, smooth bodies and their
    /// positive combinations.
    pub fn smooth_support(&self, u: &Vector) -> Option<(f64, Vector, SymMatrix)> {
        match &self.kind {
            BodyKind::Ball { center, radius } => {
                let r = u.norm();
                let hess = SymMatrix::from_fn(u.dim(), |i, j| if i == j { radius / r } else { 0.0 })
                    .add_outer(-radius / (r * r * r), u);
                Some((center.dot(u) + radius * r, center.axpy(radius / r, u), hess))
            }
            BodyKind::Smooth(s) => Some((
                s.support_value(u),
                s.support_gradient(u),
                s.support_hessian(u),
            )),
            BodyKind::Minkowski(terms) => {
                let n = u.dim();
                let mut acc = (0.0, Vector::zeros(n), SymMatrix::zeros(n));
                for (c, b) in terms {
                    let (h, g, m) = b.smooth_support(u)?;
                    acc.0 += c * h;
                    acc.1 = acc.1.axpy(*c, &g);
                    acc.2 = SymMatrix::from_fn(n, |i, j| acc.2.get(i, j) + c * m.get(i, j));
                }
                Some(acc)
            }
            BodyKind::Polytope(_) | BodyKind::Hull(_) => None,
        }
    }

    pub fn is_smooth(&self) -> bool {
        match &self.kind {
            BodyKind::Ball { .. } | BodyKind::Smooth(_) => true,
            BodyKind::Minkowski(terms) => terms.iter().all(|(_, b)| b.is_smooth()),
            BodyKind::Polytope(_) | BodyKind::Hull(_) => false,
        }
    }

    /// `(h_K(u), s(u))`.
    pub fn support(&self, u: &Direction) -> (f64, Vector) {
        let point = self.support_point(u);
        (self.support_value(u), point)
    }

    /// Membership with its decision margin.
    pub fn membership_margin(&self, x: &Vector) -> Membership {
        let margin = match &self.kind {
            BodyKind::Polytope(p) => match p.facet_margin(x) {
                Some(m) => m,
                None => return self.separation_membership(x),
            },
            BodyKind::Ball { center, radius } => radius - x.distance(center),
            BodyKind::Smooth(s) => match s.evaluator.gauge(&(*x - s.center)) {
                Some(g) => (1.0 - g) * s.evaluator.inner_radius(),
                None => return self.separation_membership(x),
            },
            BodyKind::Hull(h) => {
                if let Some(p) = &h.exact {
                    p.facet_margin(x).unwrap_or_else(|| self.separation_membership(x).margin)
                } else {
                    let base = h.base.membership_margin(x);
                    if base.inside {
                        base.margin
                    } else if h.points.len() == 1 {
                        match ray_margin(&h.base, &h.points[0], x) {
                            Some(m) => m,
                            None => return self.separation_membership(x),
                        }
                    } else {
                        return self.separation_membership(x);
                    }
                }
            }
            BodyKind::Minkowski(_) => return self.separation_membership(x),
        };
        Membership {
            inside: margin >= 0.0,
            margin,
        }
    }

    pub fn contains(&self, x: &Vector) -> bool {
        self.membership_margin(x).inside
    }

    /// `x in K`, refusing to decide when the margin is below `tol`.
    pub fn membership(&self, x: &Vector, tol: f64) -> Result<bool> {
        if x.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: x.dim(),
            });
        }
        let m = self.membership_margin(x);
        if m.margin.abs() < tol {
            Err(Error::Indeterminate { margin: m.margin })
        } else {
            Ok(m.inside)
        }
    }

    /// Separation test through the Euclidean projection: outside points get
    /// minus a lower bound on their distance, inside points the smallest
    /// slack `h_K(u) - <x, u>` over a fixed direction set.
    fn separation_membership(&self, x: &Vector) -> Membership {
        let scale = self.outer_radius.max(1e-300);
        let opts = FwOptions {
            tol: 1e-12 * scale,
            max_iter: 10_000,
            zero: 1e-12 * scale,
        };
        let lmo = |v: &Vector| self.support_point(v);
        let r = fw::minimize(&EuclideanNorm, &lmo, x, self.center, &opts, None);
        if r.value > opts.zero && r.lower > 0.0 {
            return Membership {
                inside: false,
                margin: -r.lower,
            };
        }
        let depth = sphere_directions(self.dim(), 2000)
            .iter()
            .map(|u| self.support_value(u) - x.dot(u))
            .fold(f64::INFINITY, f64::min);
        Membership {
            inside: true,
            margin: depth.max(0.0),
        }
    }

    /// Axis-aligned bounding box of `K + rho E`.
    pub fn bounding_box(&self, e: Option<(&GaugeBody, f64)>) -> (Vector, Vector) {
        let n = self.dim();
        let mut lo = Vector::zeros(n);
        let mut hi = Vector::zeros(n);
        for i in 0..n {
            let ei = Vector::basis(n, i);
            let (ep, em) = match e {
                Some((g, rho)) => (rho * g.support(&ei), rho * g.support(&(-ei))),
                None => (0.0, 0.0),
            };
            hi[i] = self.support_value(&ei) + ep;
            lo[i] = -self.support_value(&(-ei)) - em;
        }
        (lo, hi)
    }

    /// `lambda K` for `lambda > 0`.
    pub fn scaled(&self, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidSpec("scale must be positive".into()));
        }
        Ok(match &self.kind {
            BodyKind::Polytope(p) => ConvexBody::from_polytope(p.scaled(lambda)?),
            BodyKind::Ball { center, radius } => ConvexBody::ball(*center * lambda, radius * lambda)?,
            BodyKind::Smooth(s) => ConvexBody::smooth(
                Arc::new(ScaledSupport {
                    inner: s.evaluator.clone(),
                    lambda,
                }),
                s.center * lambda,
            )?,
            BodyKind::Hull(h) => ConvexBody::hull(
                h.base.scaled(lambda)?,
                h.points.iter().map(|p| *p * lambda).collect(),
            )?,
            BodyKind::Minkowski(terms) => ConvexBody::minkowski(
                terms.iter().map(|(c, b)| (c * lambda, b.clone())).collect(),
            )?,
        })
    }

    /// A point of the body near `x` to start the projection from: the best
    /// vertex for polytopes, the support point towards `x` otherwise.
    pub fn warm_start(&self, x: &Vector, score: impl Fn(&Vector) -> f64) -> Vector {
        match self.as_polytope() {
            Some(p) => {
                let mut best = p.vertices()[0];
                let mut best_val = score(&best);
                for v in &p.vertices()[1..] {
                    let s = score(v);
                    if s < best_val {
                        best = *v;
                        best_val = s;
                    }
                }
                best
            }
            None => self.support_point(&(*x - self.center)),
        }
    }
}

/// Membership margin in `conv(base, {a})` via the ray `z = a + tau (x - a)`,
/// `tau >= 1`: `x` is inside iff some `z` lies in the base.
fn ray_margin(base: &ConvexBody, a: &Vector, x: &Vector) -> Option<f64> {
    let (c, r_in, gauge): (Vector, f64, Box<dyn Fn(&Vector) -> f64>) = match &base.kind {
        BodyKind::Ball { center, radius } => {
            let (c, r) = (*center, *radius);
            (c, r, Box::new(move |z: &Vector| z.distance(&c) / r))
        }
        BodyKind::Smooth(s) => {
            s.evaluator.gauge(&Vector::zeros(base.dim()))?;
            let ev = s.evaluator.clone();
            let c = s.center;
            (c, ev.inner_radius(), Box::new(move |z: &Vector| ev.gauge(&(*z - c)).unwrap()))
        }
        _ => return None,
    };
    let dir = *x - *a;
    let len = dir.norm();
    if len == 0.0 {
        return Some(0.0);
    }
    if let BodyKind::Ball { radius, .. } = &base.kind {
        let tau = (-(*a - c).dot(&dir) / (len * len)).max(1.0);
        return Some(radius - a.axpy(tau, &dir).distance(&c));
    }
    let tau_max = 1.0 + (a.distance(&c) + base.outer_radius) / len;
    let phi = |tau: f64| gauge(&a.axpy(tau, &dir));
    let tau = golden_min(phi, 1.0, tau_max, 200);
    Some((1.0 - phi(tau)) * r_in)
}
