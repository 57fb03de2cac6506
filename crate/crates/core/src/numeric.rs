//! Scalar minimization, quadrature nodes and direction sets.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::vector::Vector;

const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Golden-section minimization of a unimodal `f` on `[a, b]`.
pub fn golden_min(mut f: impl FnMut(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> f64 {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..iters {
        if b - a <= 1e-15 * (1.0 + a.abs().max(b.abs())) {
            break;
        }
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    let (m, fm) = if fc <= fd { (c, fc) } else { (d, fd) };
    // endpoints can win for monotone functions
    let (fa, fb) = (f(a), f(b));
    if fa < fm && fa <= fb {
        a
    } else if fb < fm {
        b
    } else {
        m
    }
}

/// Minimizer on `[0, t_max]` of a convex function given through its first
/// and second derivative, by Newton steps safeguarded with bisection.
pub fn convex_line_min(mut deriv: impl FnMut(f64) -> (f64, f64), t_max: f64) -> f64 {
    let (d0, _) = deriv(0.0);
    if d0 >= 0.0 {
        return 0.0;
    }
    let (d1, _) = deriv(t_max);
    if d1 <= 0.0 {
        return t_max;
    }
    let (mut lo, mut hi) = (0.0, t_max);
    let (mut t, mut dt) = (0.0, d0);
    let mut f2 = deriv(0.0).1;
    for _ in 0..100 {
        let mut next = t - dt / f2;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        let step = (next - t).abs();
        t = next;
        let (a, b) = deriv(t);
        dt = a;
        f2 = b;
        if dt < 0.0 {
            lo = t;
        } else if dt > 0.0 {
            hi = t;
        } else {
            return t;
        }
        if step <= 1e-15 * (1.0 + t) || hi - lo <= 1e-15 * (1.0 + t) {
            break;
        }
    }
    t
}

pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let mut c = 1.0;
    for i in 0..k.min(n - k) {
        c = c * (n - i) as f64 / (i + 1) as f64;
    }
    c
}

/// Chebyshev points of the first kind mapped to `[a, b]`, increasing.
pub fn chebyshev_nodes(a: f64, b: f64, count: usize) -> Vec<f64> {
    let mut nodes: Vec<f64> = (0..count)
        .map(|k| {
            let x = ((2 * k + 1) as f64 * std::f64::consts::PI / (2 * count) as f64).cos();
            0.5 * (a + b) + 0.5 * (b - a) * x
        })
        .collect();
    nodes.sort_by(f64::total_cmp);
    nodes
}

/// Gauss-Legendre nodes and weights on `[0, 1]`.
pub fn gauss_legendre(order: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = Vec::with_capacity(order);
    let mut weights = Vec::with_capacity(order);
    let n = order as f64;
    for i in 0..order {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=order {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        nodes.push(0.5 * (1.0 - x));
        weights.push(1.0 / ((1.0 - x * x) * dp * dp));
    }
    (nodes, weights)
}

/// A deterministic, roughly uniform set of unit vectors.
pub fn sphere_directions(dim: usize, count: usize) -> Vec<Vector> {
    match dim {
        1 => vec![Vector::from_slice(&[1.0]), Vector::from_slice(&[-1.0])],
        2 => (0..count)
            .map(|k| {
                let a = 2.0 * std::f64::consts::PI * k as f64 / count as f64;
                Vector::from_slice(&[a.cos(), a.sin()])
            })
            .collect(),
        3 => {
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            (0..count)
                .map(|k| {
                    let z = 1.0 - 2.0 * (k as f64 + 0.5) / count as f64;
                    let r = (1.0 - z * z).sqrt();
                    let a = golden * k as f64;
                    Vector::from_slice(&[r * a.cos(), r * a.sin(), z])
                })
                .collect()
        }
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
            (0..count)
                .map(|_| loop {
                    let v = Vector::from_fn(dim, |_| gaussian(&mut rng));
                    if let Some(u) = v.normalized() {
                        break u;
                    }
                })
                .collect()
        }
    }
}

pub fn gaussian(rng: &mut impl Rng) -> f64 {
    let u1: f64 = 1.0 - rng.random::<f64>();
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Extremum of `f` over the unit sphere: dense search, then local refinement.
pub fn sphere_extremum(dim: usize, mut f: impl FnMut(&Vector) -> f64, maximize: bool) -> f64 {
    let sign = if maximize { -1.0 } else { 1.0 };
    let mut obj = |u: &Vector| sign * f(u);
    let count = match dim {
        1 => 2,
        2 => 4096,
        3 => 20000,
        _ => 50000,
    };
    let dirs = sphere_directions(dim, count);
    let (mut best, mut best_val) = (dirs[0], obj(&dirs[0]));
    for d in &dirs[1..] {
        let v = obj(d);
        if v < best_val {
            best = *d;
            best_val = v;
        }
    }
    if dim > 1 {
        let mut step = 4.0 / (count as f64).powf(1.0 / (dim - 1) as f64);
        while step > 1e-12 {
            let mut improved = false;
            for i in 0..dim {
                for s in [-1.0, 1.0] {
                    let mut c = best;
                    c[i] += s * step;
                    let c = c.normalized().unwrap_or(best);
                    let v = obj(&c);
                    if v < best_val {
                        best = c;
                        best_val = v;
                        improved = true;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
    }
    sign * best_val
}
