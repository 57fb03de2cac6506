//! Distance, projection and normals measured with the gauge of `E`.
//!
//! `d^E(K, x) = min_{y in K} g_E(x - y)`, solved by Frank-Wolfe with the
//! support points of `K` as linear-minimization oracle.

use rayon::prelude::*;
use serde::Serialize;

use crate::bodies::{BodyKind, ConvexBody, Direction, GaugeBody};
use crate::dual::{apex_hull_dual, newton_dual, DualOutcome};
use crate::error::{Error, Result};
use crate::fw::{self, FwOptions, FwStatus};
use crate::numeric::golden_min;
use crate::sampling::{chunk_rng, BoxRegion};
use crate::vector::Vector;

pub const DEFAULT_TOL: f64 = 1e-9;
pub const MAX_ITER: usize = 10_000;
const PLANAR_ITER: usize = 1_000;

#[derive(Clone, Debug, Serialize)]
pub struct EDistanceResult {
    pub d: f64,
    /// The E-projection of `x` onto `K`.
    pub p: Vector,
    /// Relative normal: the point of `bd E` with `x = p + d y`; unset for `d = 0`.
    pub y: Option<Vector>,
    /// Common outer normal of `K` at `p` and of `E` at `y`; unset for `d = 0`.
    pub u: Option<Direction>,
    pub converged: bool,
    pub gap: f64,
    pub iterations: usize,
}

impl EDistanceResult {
    fn inside(x: &Vector) -> Self {
        EDistanceResult {
            d: 0.0,
            p: *x,
            y: None,
            u: None,
            converged: true,
            gap: 0.0,
            iterations: 0,
        }
    }
}

/// Cheap exact membership is available, so the solver can skip points of `K`.
fn exact_membership(k: &ConvexBody) -> bool {
    match k.kind() {
        BodyKind::Polytope(p) => p.hull().is_some(),
        BodyKind::Ball { .. } => true,
        BodyKind::Smooth(s) => s.evaluator().gauge(&s.center()).is_some(),
        BodyKind::Hull(h) => {
            k.as_polytope().is_some_and(|p| p.hull().is_some())
                || (h.points().len() == 1
                    && matches!(h.base().kind(), BodyKind::Ball { .. } | BodyKind::Smooth(_)))
        }
        BodyKind::Minkowski(_) => false,
    }
}

/// Dual Newton solve for smooth bodies and single-apex hulls of smooth
/// bodies; `None` when it does not apply.
fn dual_probe(
    k: &ConvexBody,
    e: &GaugeBody,
    x: &Vector,
    tol: f64,
    stop: Option<&dyn Fn(f64, f64) -> bool>,
) -> Option<DualOutcome> {
    let u0 = (*x - k.center()).normalized()?;
    if k.is_smooth() {
        let support = |u: &Vector| k.smooth_support(u).unwrap();
        return Some(newton_dual(&support, e, x, u0, tol, stop));
    }
    if let BodyKind::Hull(h) = k.kind() {
        if h.points().len() == 1 && h.base().is_smooth() {
            let support = |u: &Vector| h.base().smooth_support(u).unwrap();
            return Some(apex_hull_dual(&support, &h.points()[0], e, x, u0, tol, stop));
        }
    }
    None
}

/// Planar dual solve. `(<x, u> - h_K(u)) / h_E(u)` is quasi-concave on the arc
/// where it is positive, so a golden-section search in the angle from `u0`
/// gives a lower bound; the support segment of `K` there gives the upper one.
/// Returns `(lower, upper, p, u)`.
fn planar_dual(
    k: &ConvexBody,
    e: &GaugeBody,
    x: &Vector,
    u0: &Vector,
) -> (f64, f64, Vector, Vector) {
    let dir = |t: f64| Vector::from_slice(&[t.cos(), t.sin()]);
    let phi = |t: f64| {
        let u = dir(t);
        (x.dot(&u) - k.support(&Direction::from_unit(u)).0) / e.support(&u)
    };
    let theta0 = u0[1].atan2(u0[0]);
    // coarse scan first, in case `u0` is far off
    let h = std::f64::consts::PI / 64.0;
    let (mut best_t, mut best) = (theta0, phi(theta0));
    for i in -31..=31 {
        let t = theta0 + i as f64 * h;
        let f = phi(t);
        if f > best {
            (best_t, best) = (t, f);
        }
    }
    let t = golden_min(|t| -phi(t), best_t - h, best_t + h, 200);
    let (t, lower) = if phi(t) >= best { (t, phi(t)) } else { (best_t, best) };
    let eps = 1e-7;
    let q1 = k.support(&Direction::from_unit(dir(t + eps))).1;
    let q2 = k.support(&Direction::from_unit(dir(t - eps))).1;
    let w = *x - q1;
    let s = e.line_min(&w, &(q2 - q1), 1.0);
    let p = q1.axpy(s, &(q2 - q1));
    (lower, e.gauge(&(*x - p)), p, dir(t))
}

pub(crate) enum Probe {
    Inside,
    /// Early exit: `d <= upper`, and the caller's stop rule held.
    Bracket {
        upper: f64,
    },
    Solved(EDistanceResult),
}

/// Solves for `d^E(K, x)`, stopping early when `stop(lower, upper)` says the
/// bracket is already conclusive.
pub(crate) fn probe(
    k: &ConvexBody,
    e: &GaugeBody,
    x: &Vector,
    tol: f64,
    stop: Option<&dyn Fn(f64, f64) -> bool>,
) -> Result<Probe> {
    if exact_membership(k) && k.contains(x) {
        return Ok(Probe::Inside);
    }
    match dual_probe(k, e, x, tol, stop) {
        Some(DualOutcome::Converged(s)) if s.upper > 0.0 => {
            let y = (*x - s.p) * (1.0 / s.upper);
            return Ok(Probe::Solved(EDistanceResult {
                d: s.upper,
                p: s.p,
                y: Some(y),
                u: Some(Direction::from_unit(s.u)),
                converged: true,
                gap: s.upper - s.lower,
                iterations: s.iterations,
            }));
        }
        Some(DualOutcome::Stopped(s)) => {
            return Ok(Probe::Bracket { upper: s.upper })
        }
        _ => {}
    }
    let start = k.warm_start(x, |v| e.gauge(&(*x - *v)));
    let lmo = |v: &Vector| k.support_point(v);
    let mut opts = FwOptions {
        tol,
        // the planar fallback below is cheaper than a long crawl
        max_iter: if x.dim() == 2 { PLANAR_ITER } else { MAX_ITER },
        zero: 1e-3 * tol,
    };
    let mut r = fw::minimize(e, &lmo, x, start, &opts, stop);
    if r.status == FwStatus::IterationLimit && x.dim() == 2 {
        // flat pieces of a curved boundary make the primal crawl; in the
        // plane the dual is a one-dimensional search instead
        let w = *x - r.y;
        if let Some(u0) = e.gauge_gradient(&w).normalized() {
            let (lower, upper, p, u) = planar_dual(k, e, x, &u0);
            let (d, p) = if upper < r.value { (upper, p) } else { (r.value, r.y) };
            let gap = d - lower.max(r.lower);
            if gap <= tol && d > 0.0 {
                let w = *x - p;
                let u = e.gauge_gradient(&w).normalized().unwrap_or(u);
                return Ok(Probe::Solved(EDistanceResult {
                    d,
                    p,
                    y: Some(w * (1.0 / d)),
                    u: Some(Direction::from_unit(u)),
                    converged: true,
                    gap: gap.max(0.0),
                    iterations: r.iterations,
                }));
            }
        }
        // points inside a body without exact membership: keep going
        opts.max_iter = MAX_ITER;
        r = fw::minimize(e, &lmo, x, r.y, &opts, stop);
    }
    match r.status {
        FwStatus::Zero => Ok(Probe::Inside),
        FwStatus::Stopped => Ok(Probe::Bracket { upper: r.value }),
        FwStatus::IterationLimit => Err(Error::NoConvergence {
            iterations: r.iterations,
            gap: r.gap,
        }),
        FwStatus::Converged => {
            let d = r.value;
            let w = *x - r.y;
            let y = w * (1.0 / d);
            let u = Direction::from_unit(e.gauge_gradient(&w).normalized().unwrap());
            Ok(Probe::Solved(EDistanceResult {
                d,
                p: r.y,
                y: Some(y),
                u: Some(u),
                converged: true,
                gap: r.gap,
                iterations: r.iterations,
            }))
        }
    }
}

fn check_dims(k: &ConvexBody, e: &GaugeBody, x: &Vector) -> Result<()> {
    for got in [e.dim(), x.dim()] {
        if got != k.dim() {
            return Err(Error::DimensionMismatch {
                expected: k.dim(),
                got,
            });
        }
    }
    Ok(())
}

/// `d^E(K, x)` with projection, relative normal and separating normal.
pub fn e_distance(k: &ConvexBody, e: &GaugeBody, x: &Vector, tol: f64) -> Result<EDistanceResult> {
    check_dims(k, e, x)?;
    if !(tol > 0.0) {
        return Err(Error::InvalidSpec("tolerance must be positive".into()));
    }
    match probe(k, e, x, tol, None)? {
        Probe::Inside => Ok(EDistanceResult::inside(x)),
        Probe::Solved(r) => Ok(r),
        Probe::Bracket { .. } => unreachable!("no early exit requested"),
    }
}

/// `x in K + rho E`, i.e. `d^E(K, x) <= rho`.
pub fn parallel_membership(k: &ConvexBody, e: &GaugeBody, rho: f64, x: &Vector) -> Result<bool> {
    check_dims(k, e, x)?;
    if !(rho >= 0.0) {
        return Err(Error::InvalidSpec("rho must be nonnegative".into()));
    }
    if rho == 0.0 && exact_membership(k) {
        return Ok(k.contains(x));
    }
    let stop = |lo: f64, up: f64| lo > rho || up <= rho;
    Ok(match probe(k, e, x, DEFAULT_TOL, Some(&stop))? {
        Probe::Inside => true,
        Probe::Bracket { upper, .. } => upper <= rho,
        Probe::Solved(r) => r.d <= rho + DEFAULT_TOL,
    })
}

/// `(|d(x1) - d(x2)|, |x1 - x2| / r_0(E))`; the first never exceeds the
/// second by more than the solver tolerance.
pub fn lipschitz_witness(
    k: &ConvexBody,
    e: &GaugeBody,
    x1: &Vector,
    x2: &Vector,
) -> Result<(f64, f64)> {
    let d1 = e_distance(k, e, x1, DEFAULT_TOL)?.d;
    let d2 = e_distance(k, e, x2, DEFAULT_TOL)?.d;
    Ok(((d1 - d2).abs(), x1.distance(x2) / e.inner_radius()))
}

#[derive(Clone, Debug, Serialize)]
pub struct ShellSample {
    pub x: Vector,
    pub result: EDistanceResult,
    /// Volume represented by the sample.
    pub weight: f64,
}

#[derive(Clone, Debug)]
pub struct ShellSampleSet {
    pub samples: Vec<ShellSample>,
    pub region: BoxRegion,
    pub box_volume: f64,
    pub drawn: usize,
}

impl ShellSampleSet {
    pub fn acceptance(&self) -> f64 {
        self.samples.len() as f64 / self.drawn as f64
    }
}

const SHELL_CHUNK: usize = 4096;

/// Bounding box of `K + rho E`.
pub fn parallel_box(k: &ConvexBody, e: &GaugeBody, rho: f64) -> BoxRegion {
    let (lo, hi) = k.bounding_box(Some((e, rho)));
    BoxRegion::new(lo, hi)
}

/// Uniform points of the bounding box of `K + rho2 E` with
/// `rho1 < d^E(K, x) <= rho2`.
pub fn shell_sample(
    k: &ConvexBody,
    e: &GaugeBody,
    rho1: f64,
    rho2: f64,
    count: usize,
    seed: u64,
) -> Result<ShellSampleSet> {
    if !(rho1 >= 0.0 && rho2 > rho1) {
        return Err(Error::InvalidSpec("need 0 <= rho1 < rho2".into()));
    }
    let region = parallel_box(k, e, rho2);
    let box_volume = region.volume();
    let weight = box_volume / count as f64;
    let stop = |lo: f64, up: f64| lo > rho2 || up <= rho1;
    let chunks = count.div_ceil(SHELL_CHUNK);
    let parts: Vec<Result<Vec<ShellSample>>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = chunk_rng(seed, c);
            let mut out = Vec::new();
            for _ in c * SHELL_CHUNK..((c + 1) * SHELL_CHUNK).min(count) {
                let x = region.uniform(&mut rng);
                if let Probe::Solved(r) = probe(k, e, &x, DEFAULT_TOL, Some(&stop))? {
                    if r.d > rho1 && r.d <= rho2 {
                        out.push(ShellSample { x, result: r, weight });
                    }
                }
            }
            Ok(out)
        })
        .collect();
    let mut samples = Vec::new();
    for p in parts {
        samples.extend(p?);
    }
    let set = ShellSampleSet {
        samples,
        region,
        box_volume,
        drawn: count,
    };
    let rate = set.acceptance();
    if rate < 1e-5 {
        return Err(Error::EmptyShell { rate });
    }
    Ok(set)
}

/// CSV header matching [`shell_csv_row`].
pub fn shell_csv_header(n: usize) -> String {
    let mut cols = Vec::new();
    for prefix in ["x", "p", "y", "u"] {
        if prefix == "p" {
            cols.push("d".to_string());
        }
        cols.extend((0..n).map(|i| format!("{prefix}{i}")));
    }
    cols.push("weight".into());
    cols.join(",")
}

pub fn shell_csv_row(s: &ShellSample) -> String {
    let n = s.x.dim();
    let mut cols: Vec<String> = s.x.as_slice().iter().map(|v| format!("{v:.17e}")).collect();
    cols.push(format!("{:.17e}", s.result.d));
    let blank = vec![String::new(); n];
    cols.extend(s.result.p.as_slice().iter().map(|v| format!("{v:.17e}")));
    match s.result.y {
        Some(y) => cols.extend(y.as_slice().iter().map(|v| format!("{v:.17e}"))),
        None => cols.extend(blank.iter().cloned()),
    }
    match s.result.u {
        Some(u) => cols.extend(u.as_slice().iter().map(|v| format!("{v:.17e}"))),
        None => cols.extend(blank),
    }
    cols.push(format!("{:.17e}", s.weight));
    cols.join(",")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bodies::Polytope;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_slice(xs)
    }

    fn square() -> ConvexBody {
        ConvexBody::from_polytope(Polytope::axis_box(&[0.0, 0.0], &[1.0, 1.0]).unwrap())
    }

    #[test]
    fn facet_distance() {
        let e = GaugeBody::ball(2, 1.0).unwrap();
        let r = e_distance(&square(), &e, &v(&[2.0, 0.5]), 1e-10).unwrap();
        assert!((r.d - 1.0).abs() < 1e-9);
        assert!((r.p - v(&[1.0, 0.5])).norm() < 1e-6);
        assert!((r.y.unwrap() - v(&[1.0, 0.0])).norm() < 1e-6);
        assert!((*r.u.unwrap().as_vector() - v(&[1.0, 0.0])).norm() < 1e-6);
    }

    #[test]
    fn gauge_scaling() {
        let e = GaugeBody::ball(2, 2.0).unwrap();
        let r = e_distance(&square(), &e, &v(&[2.0, 0.5]), 1e-10).unwrap();
        assert!((r.d - 0.5).abs() < 1e-9);
        assert!((r.y.unwrap() - v(&[2.0, 0.0])).norm() < 1e-6);
    }

    #[test]
    fn inside_sentinel() {
        let e = GaugeBody::ball(2, 1.0).unwrap();
        let r = e_distance(&square(), &e, &v(&[0.4, 0.5]), 1e-10).unwrap();
        assert_eq!(r.d, 0.0);
        assert!(r.y.is_none() && r.u.is_none());
    }

    #[test]
    fn parallel_membership_boundary() {
        let e = GaugeBody::ball(2, 1.0).unwrap();
        assert!(parallel_membership(&square(), &e, 1.0, &v(&[2.0, 0.5])).unwrap());
        assert!(!parallel_membership(&square(), &e, 0.999, &v(&[2.0, 0.5])).unwrap());
        assert!(!parallel_membership(&square(), &e, 0.0, &v(&[1.5, 0.5])).unwrap());
        assert!(parallel_membership(&square(), &e, 0.0, &v(&[0.5, 0.5])).unwrap());
    }

    #[test]
    fn lipschitz_examples() {
        let e = GaugeBody::ball(2, 1.0).unwrap();
        let x = v(&[2.0, 0.5]);
        assert_eq!(lipschitz_witness(&square(), &e, &x, &x).unwrap(), (0.0, 0.0));
        let (l, r) = lipschitz_witness(&square(), &e, &x, &v(&[3.0, 0.5])).unwrap();
        assert!((l - 1.0).abs() < 1e-9 && (r - 1.0).abs() < 1e-15);
    }

    #[test]
    fn csv_row_shape() {
        let e = GaugeBody::ball(2, 1.0).unwrap();
        let set = shell_sample(&square(), &e, 0.0, 1.0, 500, 1).unwrap();
        let header = shell_csv_header(2);
        for s in &set.samples {
            assert_eq!(shell_csv_row(s).split(',').count(), header.split(',').count());
        }
    }
}
