//! Pairwise Frank-Wolfe for `min_{y in K} f(x - y)` with a 1-homogeneous
//! convex `f`, driven by a linear-minimization (support point) oracle of `K`.

use crate::vector::Vector;

/// Objective `f(w)` with `w = x - y`.
pub trait Objective {
    fn value(&self, w: &Vector) -> f64;
    fn gradient(&self, w: &Vector) -> Vector;
    /// Minimizer over `t in [0, t_max]` of `f(w - t d)`.
    fn line_min(&self, w: &Vector, d: &Vector, t_max: f64) -> f64;
}

/// Euclidean norm objective, used for Euclidean projections.
pub struct EuclideanNorm;

impl Objective for EuclideanNorm {
    fn value(&self, w: &Vector) -> f64 {
        w.norm()
    }
    fn gradient(&self, w: &Vector) -> Vector {
        *w * (1.0 / w.norm())
    }
    fn line_min(&self, w: &Vector, d: &Vector, t_max: f64) -> f64 {
        let dd = d.norm_squared();
        if dd <= 0.0 {
            0.0
        } else {
            (w.dot(d) / dd).clamp(0.0, t_max)
        }
    }
}

impl Objective for crate::bodies::GaugeBody {
    fn value(&self, w: &Vector) -> f64 {
        self.gauge(w)
    }
    fn gradient(&self, w: &Vector) -> Vector {
        self.gauge_gradient(w)
    }
    fn line_min(&self, w: &Vector, d: &Vector, t_max: f64) -> f64 {
        crate::bodies::GaugeBody::line_min(self, w, d, t_max)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct FwOptions {
    /// Stop once the duality gap is at most `tol`.
    pub tol: f64,
    pub max_iter: usize,
    /// Values at or below this count as zero (the point lies in `K`).
    pub zero: f64,
}

impl Default for FwOptions {
    fn default() -> Self {
        FwOptions {
            tol: 1e-9,
            max_iter: 10_000,
            zero: 1e-13,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FwStatus {
    Converged,
    /// The objective reached zero.
    Zero,
    /// Stopped by the caller's predicate on the bracket `[lower, value]`.
    Stopped,
    IterationLimit,
}

#[derive(Clone, Debug)]
pub struct FwResult {
    pub y: Vector,
    /// Objective at `y`, an upper bound on the minimum.
    pub value: f64,
    /// Best dual value seen, a lower bound on the minimum.
    pub lower: f64,
    pub gap: f64,
    pub iterations: usize,
    pub status: FwStatus,
}

const MAX_ATOMS: usize = 64;

/// Runs the solver from the point `start` of `K`.
///
/// `stop(lower, upper)` may end the run early once the bracket on the
/// minimum is narrow enough for the caller.
pub fn minimize<O: Objective + ?Sized>(
    obj: &O,
    lmo: &dyn Fn(&Vector) -> Vector,
    x: &Vector,
    start: Vector,
    opts: &FwOptions,
    stop: Option<&dyn Fn(f64, f64) -> bool>,
) -> FwResult {
    let mut atoms: Vec<(Vector, f64)> = vec![(start, 1.0)];
    let mut y = start;
    let mut lower = f64::NEG_INFINITY;
    let mut gap = f64::INFINITY;
    let mut value = obj.value(&(*x - y));
    let mut iterations = 0;
    let status = loop {
        if value <= opts.zero {
            break FwStatus::Zero;
        }
        let w = *x - y;
        let grad = obj.gradient(&w);
        let s = lmo(&grad);
        // f(w) = <grad, w> by homogeneity, so the dual value is <grad, x - s>
        gap = grad.dot(&(s - y)).max(0.0);
        lower = lower.max(value - gap);
        if gap <= opts.tol {
            break FwStatus::Converged;
        }
        if stop.is_some_and(|f| f(lower, value)) {
            break FwStatus::Stopped;
        }
        if iterations >= opts.max_iter {
            break FwStatus::IterationLimit;
        }
        iterations += 1;

        // pairwise step: shift weight from the worst atom in use onto `s`
        let (away, _) = atoms
            .iter()
            .enumerate()
            .map(|(i, (a, _))| (i, grad.dot(&(y - *a))))
            .fold((0, f64::NEG_INFINITY), |best, c| if c.1 > best.1 { c } else { best });
        let (a, alpha) = atoms[away];
        if a != s {
            let d = s - a;
            let t = obj.line_min(&w, &d, alpha);
            y = y.axpy(t, &d);
            if t >= alpha {
                atoms.swap_remove(away);
            } else {
                atoms[away].1 -= t;
            }
            match atoms.iter_mut().find(|(v, _)| *v == s) {
                Some(atom) => atom.1 += t.min(alpha),
                None => atoms.push((s, t.min(alpha))),
            }
        } else {
            let d = s - y;
            let t = obj.line_min(&w, &d, 1.0);
            y = y.axpy(t, &d);
            for atom in atoms.iter_mut() {
                atom.1 *= 1.0 - t;
            }
            atoms[away].1 += t;
        }
        atoms.retain(|(_, a)| *a > 1e-15);
        if atoms.len() > MAX_ATOMS {
            atoms.clear();
            atoms.push((y, 1.0));
        }
        value = obj.value(&(*x - y));
    };
    FwResult {
        y,
        value,
        lower: lower.max(0.0),
        gap,
        iterations,
        status,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bodies::Polytope;

    #[test]
    fn euclidean_projection_onto_square() {
        let sq = Polytope::axis_box(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        let lmo = |g: &Vector| sq.support_point(g);
        let x = Vector::from_slice(&[2.0, 0.5]);
        let r = minimize(
            &EuclideanNorm,
            &lmo,
            &x,
            sq.vertices()[0],
            &FwOptions::default(),
            None,
        );
        assert_eq!(r.status, FwStatus::Converged);
        assert!((r.value - 1.0).abs() < 1e-9);
        assert!((r.y - Vector::from_slice(&[1.0, 0.5])).norm() < 1e-6);
    }

    #[test]
    fn interior_point_reaches_zero() {
        let sq = Polytope::axis_box(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        let lmo = |g: &Vector| sq.support_point(g);
        let x = Vector::from_slice(&[0.3, 0.6]);
        let r = minimize(
            &EuclideanNorm,
            &lmo,
            &x,
            sq.vertices()[0],
            &FwOptions::default(),
            None,
        );
        assert!(r.value < 1e-8);
    }

    #[test]
    fn classification_stops_early() {
        let sq = Polytope::axis_box(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
        let lmo = |g: &Vector| sq.support_point(g);
        let x = Vector::from_slice(&[5.0, 0.5]);
        let r = minimize(
            &EuclideanNorm,
            &lmo,
            &x,
            sq.vertices()[0],
            &FwOptions::default(),
            Some(&|lo: f64, _: f64| lo > 1.0),
        );
        assert_eq!(r.status, FwStatus::Stopped);
        assert!(r.lower > 1.0);
    }
}
