//! Volumes and the mixed volumes `V_j^E = V(K[j], E[n-j])`, read off the
//! Steiner polynomial `vol(K + tE) = sum_j C(n, j) t^{n-j} V_j^E`.
//!
//! All t-nodes are tested on the same sample points, so differences of
//! coefficients carry much less noise than the coefficients themselves.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::bodies::{ConvexBody, GaugeBody};
use crate::error::{Error, Result};
use crate::gauge_metric::{parallel_box, probe, Probe, DEFAULT_TOL};
use crate::numeric::{binomial, chebyshev_nodes};
use crate::parallel_measures::{Estimate, SamplingOptions};
use crate::sampling::{integrate, BoxRegion, Layout, PairPlan};

const MAX_CONDITION: f64 = 1e8;

/// Default relative tolerance of [`tangential_detect`].
pub const DEFAULT_TANGENTIAL_TOL: f64 = 0.02;

/// `vol(K)`: exact for polytopes in the plane and in space, Monte Carlo
/// otherwise.
pub fn volume(k: &ConvexBody, opts: &SamplingOptions) -> Result<Estimate> {
    if let Some(h) = k.as_polytope().and_then(|p| p.hull()) {
        return Ok(Estimate {
            value: h.volume,
            stderr: 0.0,
        });
    }
    if opts.samples < 2 {
        return Err(Error::InvalidSpec("need at least two samples".into()));
    }
    let (lo, hi) = k.bounding_box(None);
    let plan = PairPlan::new(BoxRegion::new(lo, hi), opts.samples, opts.scheme, opts.seed);
    let m = integrate(&plan, &Layout::new([1]), 0, |x, em| {
        if k.contains(x) {
            em.push(0, 1.0);
        }
        Ok(())
    })?;
    Ok(Estimate {
        value: m.sum[0],
        stderr: m.group_cov(0)[0].max(0.0).sqrt(),
    })
}

/// `2(n + 1)` Chebyshev nodes on `[0.1, 1.5]`.
pub fn default_t_nodes(n: usize) -> Vec<f64> {
    chebyshev_nodes(0.1, 1.5, 2 * (n + 1))
}

#[derive(Clone, Debug, Serialize)]
pub struct MixedVolumeTable {
    pub n: usize,
    /// `V_0 .. V_n`.
    pub v: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Covariance of `V_0 .. V_n`, row-major.
    pub cov: Vec<f64>,
    /// Chi-square per degree of freedom of the polynomial fit.
    pub fit_residual: f64,
    pub t_nodes: Vec<f64>,
    /// `vol(K + t_i E)` at the nodes.
    pub node_volumes: Vec<Estimate>,
    pub samples: usize,
    pub seed: u64,
    pub box_volume: f64,
    pub condition: f64,
}

impl MixedVolumeTable {
    /// A table known without error, e.g. from closed forms.
    pub fn exact(v: Vec<f64>) -> Self {
        let n = v.len() - 1;
        MixedVolumeTable {
            n,
            stderr: vec![0.0; n + 1],
            cov: vec![0.0; (n + 1) * (n + 1)],
            v,
            fit_residual: 0.0,
            t_nodes: Vec::new(),
            node_volumes: Vec::new(),
            samples: 0,
            seed: 0,
            box_volume: 0.0,
            condition: 1.0,
        }
    }

    pub fn cov(&self, a: usize, b: usize) -> f64 {
        self.cov[a * (self.n + 1) + b]
    }

    pub fn estimate(&self, j: usize) -> Estimate {
        Estimate {
            value: self.v[j],
            stderr: self.stderr[j],
        }
    }

    /// Variance of `sum_j c_j ln V_j` to first order.
    fn log_var(&self, c: &[f64]) -> f64 {
        let mut var = 0.0;
        for a in 0..=self.n {
            for b in 0..=self.n {
                if c[a] != 0.0 && c[b] != 0.0 {
                    var += c[a] * c[b] * self.cov(a, b) / (self.v[a] * self.v[b]);
                }
            }
        }
        var.max(0.0)
    }

    /// The table of `lambda K`: `V_j -> lambda^j V_j`.
    pub fn scaled(&self, lambda: f64) -> Self {
        let mut t = self.clone();
        for j in 0..=self.n {
            t.v[j] *= lambda.powi(j as i32);
            t.stderr[j] *= lambda.powi(j as i32);
            for b in 0..=self.n {
                t.cov[j * (self.n + 1) + b] *= lambda.powi((j + b) as i32);
            }
        }
        t
    }

    /// `j,V_j,stderr`.
    pub fn csv(&self) -> String {
        let mut out = String::from("j,V_j,stderr\n");
        for j in 0..=self.n {
            writeln!(out, "{j},{:.17e},{:.17e}", self.v[j], self.stderr[j]).unwrap();
        }
        out
    }
}

/// Design matrix of the Steiner polynomial in the basis `V_0 .. V_n`.
fn steiner_design(t: &[f64], n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(t.len(), n + 1, |i, j| binomial(n, j) * t[i].powi((n - j) as i32))
}

/// Fits `V_0 .. V_n` to Monte Carlo estimates of `vol(K + t_i E)`.
pub fn steiner_fit(
    k: &ConvexBody,
    e: &GaugeBody,
    t_nodes: &[f64],
    opts: &SamplingOptions,
) -> Result<MixedVolumeTable> {
    let n = k.dim();
    if e.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: e.dim(),
        });
    }
    let mut t = t_nodes.to_vec();
    if t.iter().any(|x| !(*x > 0.0 && x.is_finite())) {
        return Err(Error::InvalidSpec("t-nodes must be positive".into()));
    }
    t.sort_by(f64::total_cmp);
    t.dedup();
    if t.len() < n + 1 {
        return Err(Error::InvalidSpec(format!("need at least {} distinct t-nodes", n + 1)));
    }
    if opts.samples < 2 {
        return Err(Error::InvalidSpec("need at least two samples".into()));
    }
    let design = steiner_design(&t, n);
    let sv = design.clone().svd(false, false).singular_values;
    let condition = sv.max() / sv.min();
    if !(condition <= MAX_CONDITION) {
        return Err(Error::IllConditioned { condition });
    }

    let nt = t.len();
    let t_max = t[nt - 1];
    let region = parallel_box(k, e, t_max);
    let box_volume = region.volume();
    let plan = PairPlan::new(region, opts.samples, opts.scheme, opts.seed);
    let stop = |lo: f64, up: f64| t.iter().all(|&ti| up <= ti || lo > ti);
    let m = integrate(&plan, &Layout::new([nt]), 0, |x, em| {
        let first = match probe(k, e, x, DEFAULT_TOL, Some(&stop))? {
            Probe::Inside => 0,
            Probe::Bracket { upper, .. } => t.partition_point(|&ti| ti < upper),
            Probe::Solved(r) => t.partition_point(|&ti| ti < r.d - DEFAULT_TOL),
        };
        for i in first..nt {
            em.push(i, 1.0);
        }
        Ok(())
    })?;
    let y = DVector::from_column_slice(m.group_sum(0));
    let c = DMatrix::from_row_slice(nt, nt, m.group_cov(0));
    let node_volumes = (0..nt)
        .map(|i| Estimate {
            value: y[i],
            stderr: c[(i, i)].max(0.0).sqrt(),
        })
        .collect();

    // generalized least squares with the sample covariance; plain least
    // squares when that covariance is degenerate
    let (v, cov) = match c.clone().cholesky() {
        Some(ch) => {
            let wa = ch.solve(&design);
            let wy = ch.solve(&y);
            let normal = design.transpose() * &wa;
            let inv = normal.try_inverse().ok_or(Error::IllConditioned { condition })?;
            let v = &inv * (design.transpose() * wy);
            (v, inv)
        }
        None => {
            let pinv = (design.transpose() * &design)
                .try_inverse()
                .ok_or(Error::IllConditioned { condition })?
                * design.transpose();
            let v = &pinv * &y;
            let cov = &pinv * &c * pinv.transpose();
            (v, cov)
        }
    };
    let r = &y - &design * &v;
    let fit_residual = if nt > n + 1 {
        let chi2 = match c.clone().cholesky() {
            Some(ch) => r.dot(&ch.solve(&r)),
            None => f64::NAN,
        };
        chi2 / (nt - n - 1) as f64
    } else {
        0.0
    };
    let size = n + 1;
    Ok(MixedVolumeTable {
        n,
        v: v.iter().copied().collect(),
        stderr: (0..size).map(|j| cov[(j, j)].max(0.0).sqrt()).collect(),
        cov: (0..size * size).map(|i| cov[(i / size, i % size)]).collect(),
        fit_residual,
        t_nodes: t,
        node_volumes,
        samples: m.samples,
        seed: opts.seed,
        box_volume,
        condition,
    })
}

/// Ratios `r_j = V_j / V_{j+1}` and the log-concavity margins
/// `V_j^2 - V_{j-1} V_{j+1}`.
#[derive(Clone, Debug, Serialize)]
pub struct AfChain {
    pub ratios: Vec<Estimate>,
    pub log_concavity: Vec<Estimate>,
    /// `r_0 <= r_1 <= .. <= r_{n-1}` holds exactly in the estimates.
    pub monotone: bool,
    /// Largest violation in units of its standard error (0 if none).
    pub worst_z: f64,
}

/// Checks `V_{n-1}/V_n >= V_{n-2}/V_{n-1} >= .. >= V_0/V_1`; a violation
/// beyond three standard errors is an error.
pub fn af_chain(table: &MixedVolumeTable) -> Result<AfChain> {
    let n = table.n;
    if table.v.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidSpec("mixed volumes must be positive".into()));
    }
    let mut ratios = Vec::with_capacity(n);
    for j in 0..n {
        let mut c = vec![0.0; n + 1];
        c[j] = 1.0;
        c[j + 1] = -1.0;
        let r = table.v[j] / table.v[j + 1];
        ratios.push(Estimate {
            value: r,
            stderr: r * table.log_var(&c).sqrt(),
        });
    }
    let mut log_concavity = Vec::new();
    let mut monotone = true;
    let mut worst_z: f64 = 0.0;
    let mut violation = None;
    for j in 1..n {
        let (a, b, d) = (table.v[j - 1], table.v[j], table.v[j + 1]);
        let margin = b * b - a * d;
        // gradient of the margin in (V_{j-1}, V_j, V_{j+1})
        let g = [(j - 1, -d), (j, 2.0 * b), (j + 1, -a)];
        let mut var = 0.0;
        for &(p, gp) in &g {
            for &(q, gq) in &g {
                var += gp * gq * table.cov(p, q);
            }
        }
        let sd = var.max(0.0).sqrt();
        log_concavity.push(Estimate {
            value: margin,
            stderr: sd,
        });
        if margin < 0.0 {
            monotone = false;
            let z = if sd > 0.0 { -margin / sd } else { f64::INFINITY };
            worst_z = worst_z.max(z);
            if z > 3.0 && violation.is_none() {
                violation = Some(Error::ChainViolation {
                    index: j,
                    excess: -margin - 3.0 * sd,
                });
            }
        }
    }
    match violation {
        Some(err) => Err(err),
        None => Ok(AfChain {
            ratios,
            log_concavity,
            monotone,
            worst_z,
        }),
    }
}

/// Relative gap of the rescaled `V_j` to the rescaled `V_n`.
#[derive(Clone, Debug, Serialize)]
pub struct ChainGap {
    pub j: usize,
    pub gap: f64,
    pub stderr: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct TangentialReport {
    /// Smallest `k <= n - 2` with `V_k = .. = V_n` after rescaling.
    pub k: Option<usize>,
    /// `r = V_n / V_{n-1}`.
    pub r: Estimate,
    /// Gaps of `V_0 .. V_{n-1}` to `V_n` after `K -> K / r`.
    pub gaps: Vec<ChainGap>,
    pub tol: f64,
}

/// Detects `V_k = V_{k+1} = .. = V_n` after rescaling `K` to `r = 1`.
///
/// The step `V_{n-1} = V_n` holds by construction of the rescaling, so only
/// `k <= n - 2` is informative; a body matching none of them gets `None`.
pub fn tangential_detect(table: &MixedVolumeTable, tol: f64) -> Result<TangentialReport> {
    let n = table.n;
    if n < 2 {
        return Err(Error::Unsupported("tangential detection below dimension 2".into()));
    }
    if table.v.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::InvalidSpec("mixed volumes must be positive".into()));
    }
    // ln V'_j = ln V_j - j (ln V_n - ln V_{n-1})
    let coeffs = |j: usize| {
        let mut c = vec![0.0; n + 1];
        c[j] += 1.0;
        c[n] -= j as f64;
        c[n - 1] += j as f64;
        c
    };
    let log_rescaled = |j: usize| {
        let c = coeffs(j);
        (0..=n).map(|i| c[i] * table.v[i].ln()).sum::<f64>()
    };
    let mut rc = vec![0.0; n + 1];
    rc[n] = 1.0;
    rc[n - 1] = -1.0;
    let r = table.v[n] / table.v[n - 1];
    let r = Estimate {
        value: r,
        stderr: r * table.log_var(&rc).sqrt(),
    };
    // pairwise gap test between rescaled V_a and V_b
    let pair = |a: usize, b: usize| {
        let (ca, cb) = (coeffs(a), coeffs(b));
        let c: Vec<f64> = ca.iter().zip(&cb).map(|(x, y)| x - y).collect();
        let diff = log_rescaled(a) - log_rescaled(b);
        let sd = table.log_var(&c).sqrt();
        (diff.abs().exp() - 1.0, sd * diff.abs().exp())
    };
    let gaps = (0..n)
        .map(|j| {
            let (gap, stderr) = pair(j, n);
            ChainGap { j, gap, stderr }
        })
        .collect();
    let chain_ok = |k: usize| {
        (k..=n).all(|a| ((a + 1)..=n).all(|b| {
            let (gap, sd) = pair(a, b);
            gap <= tol + 3.0 * sd
        }))
    };
    let k = (0..=n - 2).find(|&k| chain_ok(k));
    Ok(TangentialReport { k, r, gaps, tol })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn design_reproduces_box_steiner_polynomial() {
        let t = [0.3, 0.7, 1.1, 1.5];
        let a = steiner_design(&t, 3);
        let v = DVector::from_vec(vec![4.0 * PI / 3.0, PI, 2.0, 1.0]);
        let y = a * v;
        for (i, &ti) in t.iter().enumerate() {
            let exact = 1.0 + 6.0 * ti + 3.0 * PI * ti * ti + 4.0 * PI / 3.0 * ti.powi(3);
            assert!((y[i] - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn chain_of_exact_box_table() {
        let t = MixedVolumeTable::exact(vec![4.0 * PI / 3.0, PI, 2.0, 1.0]);
        let c = af_chain(&t).unwrap();
        let r: Vec<f64> = c.ratios.iter().map(|e| 1.0 / e.value).collect();
        assert!((r[2] - 0.5).abs() < 1e-12);
        assert!((r[1] - 2.0 / PI).abs() < 1e-12);
        assert!((r[0] - 0.75).abs() < 1e-12);
        assert!(c.monotone);
    }

    #[test]
    fn chain_violation_is_reported() {
        let t = MixedVolumeTable::exact(vec![1.0, 0.5, 1.0]);
        assert!(matches!(af_chain(&t), Err(Error::ChainViolation { index: 1, .. })));
    }

    #[test]
    fn tangential_classes_of_exact_tables() {
        let vol = 4.0 * PI / 3.0;
        let homothet = MixedVolumeTable::exact((0..4).map(|j| vol * 2f64.powi(j)).collect());
        let rep = tangential_detect(&homothet, 0.02).unwrap();
        assert_eq!(rep.k, Some(0));
        assert!((rep.r.value - 2.0).abs() < 1e-12);

        let cap = MixedVolumeTable::exact(vec![vol, 1.5 * PI, 1.5 * PI, 1.5 * PI]);
        let rep = tangential_detect(&cap, 0.02).unwrap();
        assert_eq!(rep.k, Some(1));
        assert!((rep.r.value - 1.0).abs() < 1e-12);

        let cuboid = MixedVolumeTable::exact(vec![vol, vol, 10.0 / 3.0, 2.0]);
        assert_eq!(tangential_detect(&cuboid, 0.02).unwrap().k, None);
    }

    #[test]
    fn scaling_multiplies_by_powers() {
        let t = MixedVolumeTable::exact(vec![1.0, 2.0, 3.0]).scaled(2.0);
        assert_eq!(t.v, vec![1.0, 4.0, 12.0]);
    }
}
