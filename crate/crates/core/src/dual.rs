//! Newton ascent on the dual of the E-distance for smooth `K`:
//!
//! `d^E(K, x) = max_u (<x, u> - h_K(u)) / h_E(u)`.
//!
//! Every iterate `u` brackets the distance between the dual value and
//! `g_E(x - grad h_K(u))`, so the stopping rule is certified. Frank-Wolfe
//! is slow on curved bodies once `x` is close to `K`; this is not.

use crate::bodies::GaugeBody;
use crate::vector::{SymMatrix, Vector, MAX_DIM};

/// `(h(u), grad h(u), hess h(u))` of a support function.
pub(crate) type SupportEval<'a> = dyn Fn(&Vector) -> (f64, Vector, SymMatrix) + 'a;

#[derive(Clone, Copy, Debug)]
pub(crate) struct DualSolution {
    pub u: Vector,
    /// `grad h_K(u)`, a point of `K`.
    pub p: Vector,
    pub lower: f64,
    pub upper: f64,
    pub iterations: usize,
}

pub(crate) enum DualOutcome {
    Converged(DualSolution),
    Stopped(DualSolution),
    /// No ascent possible from the start; the caller should fall back.
    Failed,
}

const MAX_NEWTON: usize = 100;

fn dual_value(x: &Vector, u: &Vector, h_k: f64, e: &GaugeBody) -> f64 {
    (x.dot(u) - h_k) / e.support(u)
}

/// Solves `A z = r` for `z` in the orthogonal complement of the unit `u`.
fn tangent_solve(a: &SymMatrix, u: &Vector, r: &Vector) -> Option<Vector> {
    let n = u.dim();
    // `A + u u^T` is nonsingular iff `A` is positive on the complement and
    // `A u = 0`; the solve then lands in the complement because `<u, r> = 0`
    let mut m = [[0.0; MAX_DIM + 1]; MAX_DIM];
    for i in 0..n {
        for j in 0..n {
            m[i][j] = a.get(i, j) + u[i] * u[j];
        }
        m[i][n] = r[i];
    }
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if !(m[piv][col].abs() > 1e-300) {
            return None;
        }
        m.swap(col, piv);
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            for k in col..=n {
                m[row][k] -= f * m[col][k];
            }
        }
    }
    let mut z = Vector::zeros(n);
    for i in (0..n).rev() {
        let mut s = m[i][n];
        for k in i + 1..n {
            s -= m[i][k] * z[k];
        }
        z[i] = s / m[i][i];
    }
    let along = z.dot(u);
    let z = z.axpy(-along, u);
    z.is_finite().then_some(z)
}

/// Maximizes the dual value from the unit direction `u0`.
pub(crate) fn newton_dual(
    support: &SupportEval,
    e: &GaugeBody,
    x: &Vector,
    u0: Vector,
    tol: f64,
    stop: Option<&dyn Fn(f64, f64) -> bool>,
) -> DualOutcome {
    let mut u = u0;
    let (h0, mut g, mut hess) = support(&u);
    let mut phi = dual_value(x, &u, h0, e);
    let mut best_upper = f64::INFINITY;
    let mut best_p = g;
    for it in 0..MAX_NEWTON {
        let upper = e.gauge(&(*x - g));
        if upper < best_upper {
            best_upper = upper;
            best_p = g;
        }
        let sol = DualSolution {
            u,
            p: best_p,
            lower: phi.max(0.0),
            upper: best_upper,
            iterations: it,
        };
        if best_upper - phi <= tol {
            return DualOutcome::Converged(sol);
        }
        if stop.is_some_and(|f| f(sol.lower, sol.upper)) {
            return DualOutcome::Stopped(sol);
        }
        let ge = e.support_gradient(&u);
        let r = *x - g - ge * phi;
        let r = r.axpy(-r.dot(&u), &u);
        let mut dir = None;
        let he = e.support_hessian(&u);
        let a = SymMatrix::from_fn(u.dim(), |i, j| hess.get(i, j) + phi.max(0.0) * he.get(i, j));
        if a.rows().iter().flatten().all(|v| v.is_finite()) {
            dir = tangent_solve(&a, &u, &r);
        }
        let dir = match dir.or_else(|| tangent_solve(&hess, &u, &r)) {
            Some(d) => d,
            None => return DualOutcome::Failed,
        };
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            if let Some(v) = u.axpy(t, &dir).normalized() {
                let (hv, gv, hessv) = support(&v);
                let pv = dual_value(x, &v, hv, e);
                if pv > phi {
                    (u, g, hess, phi) = (v, gv, hessv, pv);
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !accepted {
            // no representable ascent left: we sit at the maximum to
            // rounding, so report whatever bracket we have
            let upper = e.gauge(&(*x - g)).min(best_upper);
            let sol = DualSolution {
                u,
                p: if upper < best_upper { g } else { best_p },
                lower: phi.max(0.0),
                upper,
                iterations: it + 1,
            };
            return if upper - phi <= tol.max(1e-12 * upper) {
                DualOutcome::Converged(sol)
            } else {
                DualOutcome::Failed
            };
        }
    }
    DualOutcome::Failed
}

/// Dual ascent for `K = conv(B, {a})` with smooth base `B`.
///
/// `K` is the union of `K_l = (1 - l) B + l a`, and `l -> d^E(K_l, x)` is
/// convex with derivative proportional to `h_B(u_l) - <a, u_l>` (envelope
/// theorem), so the optimal `l` is a root found by regula falsi. Each
/// `K_l` is smooth for `l < 1`.
pub(crate) fn apex_hull_dual(
    base: &SupportEval,
    apex: &Vector,
    e: &GaugeBody,
    x: &Vector,
    u0: Vector,
    tol: f64,
    stop: Option<&dyn Fn(f64, f64) -> bool>,
) -> DualOutcome {
    let inner_tol = 0.01 * tol;
    let lower_k = |u: &Vector| {
        let h = base(u).0.max(apex.dot(u));
        (x.dot(u) - h) / e.support(u)
    };
    let slope = |u: &Vector| base(u).0 - apex.dot(u);
    let onto_kink = |u: &Vector| {
        let mut v = *u;
        for _ in 0..3 {
            let (h, g, _) = base(&v);
            let f = h - apex.dot(&v);
            let grad = g - *apex;
            let grad = grad.axpy(-grad.dot(&v), &v);
            let gg = grad.norm_squared();
            if !(gg > 0.0) {
                break;
            }
            match v.axpy(-f / gg, &grad).normalized() {
                Some(w) => v = w,
                None => break,
            }
        }
        v
    };
    let DualOutcome::Converged(s0) = newton_dual(base, e, x, u0, inner_tol, None) else {
        return DualOutcome::Failed;
    };
    let f0 = slope(&s0.u);
    if f0 >= 0.0 {
        // the apex stays behind the supporting plane of the base solution
        return DualOutcome::Converged(s0);
    }
    let w = *x - *apex;
    let g_apex = e.gauge(&w);
    let Some(u1) = e.gauge_gradient(&w).normalized() else {
        return DualOutcome::Failed;
    };
    let f1 = slope(&u1);
    if f1 <= 0.0 {
        return DualOutcome::Converged(DualSolution {
            u: u1,
            p: *apex,
            lower: g_apex,
            upper: g_apex,
            iterations: s0.iterations,
        });
    }

    let (mut lo, mut flo, mut hi, mut fhi) = (0.0, f0, 1.0, f1);
    let mut side = 0i8;
    let (mut upper, mut p) = if s0.upper < g_apex {
        (s0.upper, s0.p)
    } else {
        (g_apex, *apex)
    };
    let (l0, l1) = (lower_k(&s0.u), lower_k(&u1));
    let (mut lower, mut u_best) = if l0 > l1 { (l0, s0.u) } else { (l1, u1) };
    let mut warm = s0.u;
    let mut iterations = s0.iterations;
    for _ in 0..200 {
        let lam = ((lo * fhi - hi * flo) / (fhi - flo)).clamp(lo, hi);
        let shrunk = |u: &Vector| {
            let (h, g, m) = base(u);
            (
                (1.0 - lam) * h + lam * apex.dot(u),
                g * (1.0 - lam) + *apex * lam,
                m.scaled(1.0 - lam),
            )
        };
        let DualOutcome::Converged(s) = newton_dual(&shrunk, e, x, warm, inner_tol, None) else {
            return DualOutcome::Failed;
        };
        iterations += s.iterations;
        warm = s.u;
        if s.upper < upper {
            upper = s.upper;
            p = s.p;
        }
        // the bound at `u_l` itself is only first-order accurate, since the
        // optimum sits on the kink `h_B = <a, .>` of `h_K`; on the kink the
        // dual is smooth
        for u in [s.u, onto_kink(&s.u)] {
            let l = lower_k(&u);
            if l > lower {
                lower = l;
                u_best = u;
            }
        }
        let sol = DualSolution {
            u: u_best,
            p,
            lower: lower.max(0.0),
            upper,
            iterations,
        };
        if upper - lower <= tol {
            return DualOutcome::Converged(sol);
        }
        if stop.is_some_and(|f| f(sol.lower, sol.upper)) {
            return DualOutcome::Stopped(sol);
        }
        let f = slope(&s.u);
        if f > 0.0 {
            hi = lam;
            fhi = f;
            if side == 1 {
                flo *= 0.5;
            }
            side = 1;
        } else {
            lo = lam;
            flo = f;
            if side == -1 {
                fhi *= 0.5;
            }
            side = -1;
        }
        if hi - lo <= 1e-15 {
            return if upper - lower <= tol.max(1e-12 * upper) {
                DualOutcome::Converged(sol)
            } else {
                DualOutcome::Failed
            };
        }
    }
    DualOutcome::Failed
}
