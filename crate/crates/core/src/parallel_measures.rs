//! Area, support and curvature measures of `K` relative to `E`, recovered
//! from the volume of thin shells `a < d^E(K, x) <= b`.
//!
//! Since `|grad d^E| = 1 / h_E(u)`, the coarea formula turns the shell
//! integral of `1 / (delta h_E(u))` over the points whose normal `u` falls
//! in a cell `alpha` into the average over `rho in (a, b]` of
//! `H^{n-1}(B_rho(K, alpha)) = sum_m rho^{n-1-m} C(n-1, m) S_m(K, alpha)`.
//! The shell averages at several radii are then fitted for `S_0..S_{n-1}`
//! by least squares, cell by cell.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::bodies::{ConvexBody, GaugeBody};
use crate::error::{Error, Result};
use crate::gauge_metric::{parallel_box, probe, Probe, DEFAULT_TOL};
use crate::numeric::{binomial, chebyshev_nodes};
use crate::sampling::{integrate, Layout, Moments, PairPlan, Scheme};
use crate::sphere_cells::SphereCells;
use crate::vector::Vector;

/// A measure discretized on cells.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellMeasure {
    pub masses: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Sum of `masses`.
    pub total: f64,
    /// Cells whose small negative fit was set to zero.
    pub clamped: Vec<usize>,
}

impl CellMeasure {
    /// A measure known without error.
    pub fn exact(masses: Vec<f64>) -> Self {
        let total = masses.iter().sum();
        CellMeasure {
            stderr: vec![0.0; masses.len()],
            masses,
            total,
            clamped: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    /// Sums cells into `count` coarse cells through `parents`; errors add
    /// in quadrature.
    pub fn aggregate(&self, parents: &[usize], count: usize) -> CellMeasure {
        let mut masses = vec![0.0; count];
        let mut var = vec![0.0; count];
        for (c, &p) in parents.iter().enumerate() {
            masses[p] += self.masses[c];
            var[p] += self.stderr[c] * self.stderr[c];
        }
        let total = masses.iter().sum();
        CellMeasure {
            masses,
            stderr: var.into_iter().map(f64::sqrt).collect(),
            total,
            clamped: Vec::new(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

/// Shell radii `rho_i` and common thickness `delta`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShellNodes {
    pub rho: Vec<f64>,
    pub delta: f64,
}

impl ShellNodes {
    /// The thickness defaults to the smallest node spacing, and never
    /// exceeds the smallest radius.
    pub fn new(mut rho: Vec<f64>, delta: Option<f64>) -> Result<Self> {
        if rho.is_empty() || rho.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return Err(Error::InvalidSpec("shell radii must be positive".into()));
        }
        rho.sort_by(f64::total_cmp);
        let spacing = rho.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
        if spacing == 0.0 {
            return Err(Error::InvalidSpec("shell radii must be distinct".into()));
        }
        let delta = delta.unwrap_or_else(|| spacing.min(rho[0]));
        if !(delta > 0.0 && delta < 2.0 * rho[0]) {
            return Err(Error::InvalidSpec(format!(
                "shell thickness {delta} must lie in (0, 2 rho_min)"
            )));
        }
        Ok(ShellNodes { rho, delta })
    }

    /// `2n` Chebyshev radii on `[0.05, 1] * scale(K)`, where the scale is
    /// the mean side of the bounding box.
    pub fn default_for(k: &ConvexBody) -> Self {
        let n = k.dim();
        let (lo, hi) = k.bounding_box(None);
        let scale = (0..n).map(|i| hi[i] - lo[i]).sum::<f64>() / n as f64;
        ShellNodes::new(chebyshev_nodes(0.05 * scale, scale, 2 * n), None).expect("valid nodes")
    }

    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    pub fn shell(&self, i: usize) -> (f64, f64) {
        (self.rho[i] - 0.5 * self.delta, self.rho[i] + 0.5 * self.delta)
    }

    pub fn outer(&self) -> f64 {
        self.shell(self.len() - 1).1
    }

    /// Row `i`: average over shell `i` of `rho^{n-1-m} C(n-1, m)`, `m = 0..n`.
    pub fn design(&self, n: usize) -> DMatrix<f64> {
        DMatrix::from_fn(self.len(), n, |i, m| {
            let (a, b) = self.shell(i);
            let k = (n - 1 - m) as i32;
            binomial(n - 1, m) * (b.powi(k + 1) - a.powi(k + 1)) / ((k + 1) as f64 * self.delta)
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SamplingOptions {
    pub samples: usize,
    pub seed: u64,
    pub scheme: Scheme,
}

impl SamplingOptions {
    pub fn new(samples: usize, seed: u64) -> Self {
        SamplingOptions {
            samples,
            seed,
            scheme: Scheme::Stratified,
        }
    }
}

/// How a profile was computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProfileMethod {
    /// Monte Carlo shell volumes fitted over radii.
    ShellFit,
    /// Surface quadrature for smooth pairs; `samples` counts integrand
    /// evaluations and the sampling fields are unused.
    Quadrature,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProfileMeta {
    pub method: ProfileMethod,
    pub rho_nodes: Vec<f64>,
    pub delta: f64,
    pub samples: usize,
    pub seed: u64,
    pub scheme: Scheme,
    /// Sample counts per shell.
    pub accepted: Vec<u64>,
    pub box_volume: f64,
    pub condition: f64,
}

/// `S_0^E .. S_{n-1}^E` on the boundary cells, with the integrals of
/// `h_E`, `h_K` and `u` against each measure taken at the sample normals.
#[derive(Clone, Debug, Serialize)]
pub struct AreaMeasureProfile {
    pub dim: usize,
    pub cells: SphereCells,
    pub measures: Vec<CellMeasure>,
    /// Per cell, the covariance of `(S_0, .., S_{n-1})`, row-major.
    #[serde(skip)]
    pub cell_cov: Vec<Vec<f64>>,
    /// Unclamped total masses.
    pub totals: Vec<Estimate>,
    /// `int h_E dS_k`.
    pub h_e_moments: Vec<Estimate>,
    /// `int h_K dS_k`.
    pub h_k_moments: Vec<Estimate>,
    /// `int u_i dS_k`, indexed `[k][i]`.
    pub centroids: Vec<Vec<Estimate>>,
    /// Chi-square per degree of freedom of the fit of the total masses.
    pub fit_residual: f64,
    pub meta: ProfileMeta,
}

impl AreaMeasureProfile {
    /// `V_k^E = (1/n) int h_E dS_k` and `V_{k+1}^E = (1/n) int h_K dS_k`,
    /// both for `k = 0..n-1`.
    pub fn mixed_volumes(&self) -> (Vec<Estimate>, Vec<Estimate>) {
        let n = self.dim as f64;
        let scale = |e: &Estimate| Estimate {
            value: e.value / n,
            stderr: e.stderr / n,
        };
        (
            self.h_e_moments.iter().map(scale).collect(),
            self.h_k_moments.iter().map(scale).collect(),
        )
    }

    /// `cell_id, u_c, patch area, S_0..S_{n-1}, stderr_0..stderr_{n-1}`.
    pub fn csv(&self) -> String {
        let n = self.dim;
        let mut out = String::from("cell_id");
        for i in 0..n {
            write!(out, ",u{i}").unwrap();
        }
        out.push_str(",area");
        for k in 0..n {
            write!(out, ",S{k}").unwrap();
        }
        for k in 0..n {
            write!(out, ",stderr{k}").unwrap();
        }
        out.push('\n');
        for c in 0..self.cells.count() {
            write!(out, "{c}").unwrap();
            for v in self.cells.representative(c).as_slice() {
                write!(out, ",{v:.17e}").unwrap();
            }
            write!(out, ",{:.17e}", self.cells.area(c)).unwrap();
            for m in &self.measures {
                write!(out, ",{:.17e}", m.masses[c]).unwrap();
            }
            for m in &self.measures {
                write!(out, ",{:.17e}", m.stderr[c]).unwrap();
            }
            out.push('\n');
        }
        out
    }

    /// Per-cell ratio `S_k / S_{n-1}` for plotting.
    pub fn ratio_csv(&self, k: usize) -> String {
        let top = &self.measures[self.dim - 1];
        let mut out = String::from("cell_id,ratio\n");
        for c in 0..self.cells.count() {
            let r = if top.masses[c] > 0.0 {
                self.measures[k].masses[c] / top.masses[c]
            } else {
                f64::NAN
            };
            writeln!(out, "{c},{r:.17e}").unwrap();
        }
        out
    }
}

/// Regular grid of boxes over `[lo, hi]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpatialGrid {
    pub lo: Vector,
    pub hi: Vector,
    pub counts: Vec<usize>,
}

impl SpatialGrid {
    pub fn new(lo: Vector, hi: Vector, counts: Vec<usize>) -> Result<Self> {
        if counts.len() != lo.dim() || counts.contains(&0) || (0..lo.dim()).any(|i| !(hi[i] > lo[i])) {
            return Err(Error::InvalidSpec("bad spatial grid".into()));
        }
        Ok(SpatialGrid { lo, hi, counts })
    }

    /// `per_axis^n` boxes over the bounding box of `K`.
    pub fn over(k: &ConvexBody, per_axis: usize) -> Result<Self> {
        let (lo, hi) = k.bounding_box(None);
        SpatialGrid::new(lo, hi, vec![per_axis; k.dim()])
    }

    pub fn count(&self) -> usize {
        self.counts.iter().product()
    }

    /// Box containing `p`; points outside are clamped to the border boxes.
    pub fn locate(&self, p: &Vector) -> usize {
        let mut idx = 0;
        let mut stride = 1;
        for i in 0..self.counts.len() {
            let t = (p[i] - self.lo[i]) / (self.hi[i] - self.lo[i]);
            let c = ((t * self.counts[i] as f64).floor().max(0.0) as usize).min(self.counts[i] - 1);
            idx += c * stride;
            stride *= self.counts[i];
        }
        idx
    }

    pub fn bounds(&self, s: usize) -> (Vector, Vector) {
        let n = self.counts.len();
        let mut lo = Vector::zeros(n);
        let mut hi = Vector::zeros(n);
        let mut rest = s;
        for i in 0..n {
            let c = rest % self.counts[i];
            rest /= self.counts[i];
            let w = (self.hi[i] - self.lo[i]) / self.counts[i] as f64;
            lo[i] = self.lo[i] + w * c as f64;
            hi[i] = lo[i] + w;
        }
        (lo, hi)
    }
}

/// Least-squares map from shell averages to measures, `S = L y`.
struct Fit {
    design: DMatrix<f64>,
    pinv: DMatrix<f64>,
    condition: f64,
}

const MAX_CONDITION: f64 = 1e8;

impl Fit {
    fn new(nodes: &ShellNodes, n: usize) -> Result<Self> {
        let design = nodes.design(n);
        if nodes.len() < n {
            return Err(Error::InvalidSpec(format!("need at least {n} shell radii")));
        }
        let sv = design.clone().svd(false, false).singular_values;
        let condition = sv.max() / sv.min();
        if !(condition <= MAX_CONDITION) {
            return Err(Error::IllConditioned { condition });
        }
        let ata = design.transpose() * &design;
        let pinv = ata.try_inverse().ok_or(Error::IllConditioned { condition })? * design.transpose();
        Ok(Fit {
            design,
            pinv,
            condition,
        })
    }

    /// Coefficients and their covariance from node values `y` with
    /// covariance `cov` (row-major).
    fn apply(&self, y: &[f64], cov: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let (n, k) = self.pinv.shape();
        let s: Vec<f64> = (0..n).map(|m| (0..k).map(|i| self.pinv[(m, i)] * y[i]).sum()).collect();
        let mut c = vec![0.0; n * n];
        for a in 0..n {
            for b in 0..n {
                let mut acc = 0.0;
                for i in 0..k {
                    let li = self.pinv[(a, i)];
                    if li == 0.0 {
                        continue;
                    }
                    for j in 0..k {
                        acc += li * cov[i * k + j] * self.pinv[(b, j)];
                    }
                }
                c[a * n + b] = acc;
            }
        }
        (s, c)
    }

    /// Generalized residual `r^T C^+ r / dof` of a fit.
    fn residual(&self, y: &[f64], cov: &[f64], s: &[f64]) -> f64 {
        let k = y.len();
        let n = s.len();
        if k <= n {
            return 0.0;
        }
        let r: Vec<f64> = (0..k)
            .map(|i| y[i] - (0..n).map(|m| self.design[(i, m)] * s[m]).sum::<f64>())
            .collect();
        let c = DMatrix::from_row_slice(k, k, cov);
        match c.pseudo_inverse(1e-14) {
            Ok(ci) => {
                let rv = nalgebra::DVector::from_vec(r);
                (rv.transpose() * ci * &rv)[(0, 0)] / (k - n) as f64
            }
            Err(_) => f64::NAN,
        }
    }
}

/// z-score below which a fitted negative mass is an error rather than
/// noise: 3, raised so that a correct fit with `cells` Gaussian cell errors
/// trips it with probability at most 1e-3.
fn failure_z(cells: usize) -> f64 {
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    normal.inverse_cdf(1.0 - 1e-3 / cells.max(1) as f64).max(3.0)
}

/// Clamps small negative masses to zero and fails on large ones.
fn finalize(raw: &[f64], var: &[f64], z_fail: f64) -> Result<CellMeasure> {
    let mut masses = Vec::with_capacity(raw.len());
    let mut stderr = Vec::with_capacity(raw.len());
    let mut clamped = Vec::new();
    for (c, (&m, &v)) in raw.iter().zip(var).enumerate() {
        let sd = v.max(0.0).sqrt();
        if m < 0.0 {
            if m < -z_fail * sd {
                return Err(Error::NegativeMass {
                    cell: c,
                    mass: m,
                    sigma: sd,
                });
            }
            clamped.push(c);
            masses.push(0.0);
        } else {
            masses.push(m);
        }
        stderr.push(sd);
    }
    let total = masses.iter().sum();
    Ok(CellMeasure {
        masses,
        stderr,
        total,
        clamped,
    })
}

/// Features integrated per shell in the global group: the density, and the
/// density times `h_E(u)`, `h_K(u)` and `u_i`.
fn feature_count(n: usize) -> usize {
    3 + n
}

struct ShellRun {
    moments: Moments,
    nodes: usize,
    local_groups: usize,
    box_volume: f64,
    samples: usize,
}

impl ShellRun {
    fn global_group(&self) -> usize {
        self.local_groups
    }

    /// Node values and covariance of global feature `f`.
    fn feature(&self, f: usize) -> (Vec<f64>, Vec<f64>) {
        let g = self.global_group();
        let size = self.moments.layout().group_size(g);
        let k = self.nodes;
        let y = self.moments.group_sum(g)[f * k..(f + 1) * k].to_vec();
        let full = self.moments.group_cov(g);
        let mut cov = vec![0.0; k * k];
        for i in 0..k {
            for j in 0..k {
                cov[i * k + j] = full[(f * k + i) * size + f * k + j];
            }
        }
        (y, cov)
    }
}

fn run_shells(
    k: &ConvexBody,
    e: &GaugeBody,
    cells: &SphereCells,
    grid: Option<&SpatialGrid>,
    nodes: &ShellNodes,
    opts: &SamplingOptions,
) -> Result<ShellRun> {
    let n = k.dim();
    if e.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: e.dim(),
        });
    }
    if cells.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: cells.dim(),
        });
    }
    if opts.samples < 2 {
        return Err(Error::InvalidSpec("need at least two samples".into()));
    }
    let m = cells.count();
    let spatial = grid.map_or(1, |g| g.count());
    let nn = nodes.len();
    let local_groups = spatial * m;
    let q = feature_count(n);
    let layout = Layout::new(std::iter::repeat_n(nn, local_groups).chain([q * nn]));
    let global = local_groups * nn;
    let region = parallel_box(k, e, nodes.outer());
    let plan = PairPlan::new(region, opts.samples, opts.scheme, opts.seed);
    let shells: Vec<(f64, f64)> = (0..nn).map(|i| nodes.shell(i)).collect();
    let stop = |lo: f64, up: f64| shells.iter().all(|&(a, b)| up <= a || lo > b);
    let delta = nodes.delta;
    let moments = integrate(&plan, &layout, nn, |x, em| {
        let Probe::Solved(r) = probe(k, e, x, DEFAULT_TOL, Some(&stop))? else {
            return Ok(());
        };
        let u = r.u.expect("solved points have a normal");
        let he = e.support(&u);
        let w = 1.0 / (delta * he);
        let hk = r.p.dot(&u);
        let s = grid.map_or(0, |g| g.locate(&r.p));
        let base = (s * m + cells.locate(&u)) * nn;
        for (i, &(a, b)) in shells.iter().enumerate() {
            if r.d > a && r.d <= b {
                em.push(base + i, w);
                em.push(global + i, w);
                em.push(global + nn + i, w * he);
                em.push(global + 2 * nn + i, w * hk);
                for j in 0..n {
                    em.push(global + (3 + j) * nn + i, w * u[j]);
                }
                em.tag.get_or_insert(i);
            }
        }
        Ok(())
    })?;
    for &count in &moments.counts {
        let rate = count as f64 / moments.samples as f64;
        if rate < 1e-5 {
            return Err(Error::EmptyShell { rate });
        }
    }
    Ok(ShellRun {
        samples: moments.samples,
        moments,
        nodes: nn,
        local_groups,
        box_volume: plan.region().volume(),
    })
}

/// `H^{n-1}(B_rho^E(K, alpha))` per cell from one shell of thickness `delta`.
pub fn estimate_boundary_density(
    k: &ConvexBody,
    e: &GaugeBody,
    cells: &SphereCells,
    rho: f64,
    delta: f64,
    opts: &SamplingOptions,
) -> Result<CellMeasure> {
    let nodes = ShellNodes::new(vec![rho], Some(delta))?;
    let run = run_shells(k, e, cells, None, &nodes, opts)?;
    let masses: Vec<f64> = (0..cells.count()).map(|c| run.moments.group_sum(c)[0]).collect();
    let stderr = (0..cells.count())
        .map(|c| run.moments.group_cov(c)[0].max(0.0).sqrt())
        .collect();
    let total = masses.iter().sum();
    Ok(CellMeasure {
        masses,
        stderr,
        total,
        clamped: Vec::new(),
    })
}

fn meta(nodes: &ShellNodes, opts: &SamplingOptions, run: &ShellRun, fit: &Fit) -> ProfileMeta {
    ProfileMeta {
        method: ProfileMethod::ShellFit,
        rho_nodes: nodes.rho.clone(),
        delta: nodes.delta,
        samples: run.samples,
        seed: opts.seed,
        scheme: opts.scheme,
        accepted: run.moments.counts.clone(),
        box_volume: run.box_volume,
        condition: fit.condition,
    }
}

/// Fits the global features: totals, `h_E`, `h_K` and centroid moments.
fn global_estimates(run: &ShellRun, fit: &Fit, n: usize) -> (Vec<Vec<Estimate>>, f64) {
    let mut out = Vec::new();
    let mut residual = 0.0;
    for f in 0..feature_count(n) {
        let (y, cov) = run.feature(f);
        let (s, c) = fit.apply(&y, &cov);
        if f == 0 {
            residual = fit.residual(&y, &cov, &s);
        }
        out.push(
            (0..n)
                .map(|k| Estimate {
                    value: s[k],
                    stderr: c[k * n + k].max(0.0).sqrt(),
                })
                .collect(),
        );
    }
    (out, residual)
}

struct CellFits {
    /// `raw[k][cell]`.
    raw: Vec<Vec<f64>>,
    var: Vec<Vec<f64>>,
    cov: Vec<Vec<f64>>,
}

fn fit_cells(run: &ShellRun, fit: &Fit, n: usize) -> CellFits {
    let groups = run.local_groups;
    let mut out = CellFits {
        raw: vec![vec![0.0; groups]; n],
        var: vec![vec![0.0; groups]; n],
        cov: Vec::with_capacity(groups),
    };
    for g in 0..groups {
        let (s, c) = fit.apply(run.moments.group_sum(g), run.moments.group_cov(g));
        for k in 0..n {
            out.raw[k][g] = s[k];
            out.var[k][g] = c[k * n + k];
        }
        out.cov.push(c);
    }
    out
}

fn profile_from(
    n: usize,
    cells: &SphereCells,
    fits: CellFits,
    globals: Vec<Vec<Estimate>>,
    residual: f64,
    meta: ProfileMeta,
) -> Result<AreaMeasureProfile> {
    let z = failure_z(cells.count() * n);
    let measures = (0..n)
        .map(|k| finalize(&fits.raw[k], &fits.var[k], z))
        .collect::<Result<Vec<_>>>()?;
    let centroids = (0..n).map(|k| (0..n).map(|i| globals[3 + i][k]).collect()).collect();
    Ok(AreaMeasureProfile {
        dim: n,
        cells: cells.clone(),
        measures,
        cell_cov: fits.cov,
        totals: globals[0].clone(),
        h_e_moments: globals[1].clone(),
        h_k_moments: globals[2].clone(),
        centroids,
        fit_residual: residual,
        meta,
    })
}

/// `S_0^E(K, .) .. S_{n-1}^E(K, .)` on the cells of `cells`.
pub fn fit_area_measures(
    k: &ConvexBody,
    e: &GaugeBody,
    cells: &SphereCells,
    nodes: &ShellNodes,
    opts: &SamplingOptions,
) -> Result<AreaMeasureProfile> {
    let n = k.dim();
    let fit = Fit::new(nodes, n)?;
    let run = run_shells(k, e, cells, None, nodes, opts)?;
    let (globals, residual) = global_estimates(&run, &fit, n);
    let fits = fit_cells(&run, &fit, n);
    let meta = meta(nodes, opts, &run, &fit);
    profile_from(n, cells, fits, globals, residual, meta)
}

/// Support measures `Theta_k^E(K, beta x alpha)` on spatial box `beta`
/// times boundary cell `alpha`.
#[derive(Clone, Debug, Serialize)]
pub struct SupportMeasureEstimate {
    pub grid: SpatialGrid,
    pub cells: SphereCells,
    /// Per `k`, masses at index `spatial * cells + cell`.
    pub measures: Vec<CellMeasure>,
    pub meta: ProfileMeta,
    #[serde(skip)]
    node_sums: Vec<Vec<f64>>,
    #[serde(skip)]
    node_covs: Vec<Vec<f64>>,
    #[serde(skip)]
    fit_nodes: ShellNodes,
    /// Global estimates reused by the marginal profile.
    #[serde(skip)]
    globals: Vec<Vec<Estimate>>,
    #[serde(skip)]
    residual: f64,
}

impl SupportMeasureEstimate {
    pub fn index(&self, spatial: usize, cell: usize) -> usize {
        spatial * self.cells.count() + cell
    }

    /// Fit of node values summed over the chosen product cells.
    fn merged(&self, members: impl Iterator<Item = usize>) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.cells.dim();
        let fit = Fit::new(&self.fit_nodes, n)?;
        let k = self.fit_nodes.len();
        let mut y = vec![0.0; k];
        let mut cov = vec![0.0; k * k];
        for g in members {
            for i in 0..k {
                y[i] += self.node_sums[g][i];
            }
            for (a, b) in cov.iter_mut().zip(&self.node_covs[g]) {
                *a += b;
            }
        }
        let (s, c) = fit.apply(&y, &cov);
        Ok((s, (0..n).map(|m| c[m * n + m]).collect()))
    }

    /// The area measures: the marginal over all spatial boxes.
    pub fn marginal_area(&self) -> Result<AreaMeasureProfile> {
        let n = self.cells.dim();
        let m = self.cells.count();
        let spatial = self.grid.count();
        let fit = Fit::new(&self.fit_nodes, n)?;
        let mut fits = CellFits {
            raw: vec![vec![0.0; m]; n],
            var: vec![vec![0.0; m]; n],
            cov: Vec::with_capacity(m),
        };
        let k = self.fit_nodes.len();
        for c in 0..m {
            let mut y = vec![0.0; k];
            let mut cov = vec![0.0; k * k];
            for s in 0..spatial {
                let g = s * m + c;
                for i in 0..k {
                    y[i] += self.node_sums[g][i];
                }
                for (a, b) in cov.iter_mut().zip(&self.node_covs[g]) {
                    *a += b;
                }
            }
            let (sv, cv) = fit.apply(&y, &cov);
            for j in 0..n {
                fits.raw[j][c] = sv[j];
                fits.var[j][c] = cv[j * n + j];
            }
            fits.cov.push(cv);
        }
        profile_from(n, &self.cells, fits, self.globals.clone(), self.residual, self.meta.clone())
    }
}

/// Support measures on `grid x cells`.
pub fn fit_support_measures(
    k: &ConvexBody,
    e: &GaugeBody,
    grid: &SpatialGrid,
    cells: &SphereCells,
    nodes: &ShellNodes,
    opts: &SamplingOptions,
) -> Result<SupportMeasureEstimate> {
    let n = k.dim();
    if grid.lo.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: grid.lo.dim(),
        });
    }
    let fit = Fit::new(nodes, n)?;
    let run = run_shells(k, e, cells, Some(grid), nodes, opts)?;
    let (globals, residual) = global_estimates(&run, &fit, n);
    let fits = fit_cells(&run, &fit, n);
    let z = failure_z(run.local_groups * n);
    let measures = (0..n)
        .map(|j| finalize(&fits.raw[j], &fits.var[j], z))
        .collect::<Result<Vec<_>>>()?;
    let groups = run.local_groups;
    Ok(SupportMeasureEstimate {
        grid: grid.clone(),
        cells: cells.clone(),
        measures,
        meta: meta(nodes, opts, &run, &fit),
        node_sums: (0..groups).map(|g| run.moments.group_sum(g).to_vec()).collect(),
        node_covs: (0..groups).map(|g| run.moments.group_cov(g).to_vec()).collect(),
        fit_nodes: nodes.clone(),
        globals,
        residual,
    })
}

/// Curvature measures `C_k^E(K, beta)` for unions `beta` of spatial boxes,
/// one measure per `k` with one entry per union. Variances of merged boxes
/// are added, ignoring the small cross-covariance between boxes.
pub fn curvature_measures(est: &SupportMeasureEstimate, betas: &[Vec<usize>]) -> Result<Vec<CellMeasure>> {
    let n = est.cells.dim();
    let m = est.cells.count();
    let mut raw = vec![vec![0.0; betas.len()]; n];
    let mut var = vec![vec![0.0; betas.len()]; n];
    for (b, beta) in betas.iter().enumerate() {
        if let Some(&s) = beta.iter().find(|&&s| s >= est.grid.count()) {
            return Err(Error::InvalidSpec(format!("no spatial box {s}")));
        }
        let (s, v) = est.merged(beta.iter().flat_map(|&s| (0..m).map(move |c| s * m + c)))?;
        for j in 0..n {
            raw[j][b] = s[j];
            var[j][b] = v[j];
        }
    }
    let z = failure_z(betas.len() * n);
    (0..n).map(|j| finalize(&raw[j], &var[j], z)).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProportionalityReport {
    pub k: usize,
    pub c: f64,
    /// `max_cell |S_k - c S_{n-1}| / mean cell mass of S_{n-1}`.
    pub max_dev: f64,
    /// The same after granting each cell three standard errors.
    pub noise_excess: f64,
    pub tol: f64,
    pub proportional: bool,
}

/// Tests `S_k^E(K, .) = c S_{n-1}^E(K, .)` cell by cell.
pub fn proportionality_test(p: &AreaMeasureProfile, k: usize, tol: f64) -> Result<ProportionalityReport> {
    let n = p.dim;
    if k + 2 > n {
        return Err(Error::InvalidSpec(format!("k must lie in 0..={}", n - 2)));
    }
    let top = &p.measures[n - 1];
    let sigma = p.totals[n - 1].stderr;
    if !(top.total > 3.0 * sigma) {
        return Err(Error::DegenerateProfile {
            total: top.total,
            sigma,
        });
    }
    let c = p.measures[k].total / top.total;
    let mean = top.total / top.len() as f64;
    let (mut max_dev, mut excess) = (0.0f64, 0.0f64);
    for cell in 0..top.len() {
        let dev = (p.measures[k].masses[cell] - c * top.masses[cell]).abs();
        let cov = &p.cell_cov[cell];
        let var = cov[k * n + k] + c * c * cov[(n - 1) * n + n - 1] - 2.0 * c * cov[k * n + n - 1];
        max_dev = max_dev.max(dev / mean);
        excess = excess.max((dev - 3.0 * var.max(0.0).sqrt()).max(0.0) / mean);
    }
    Ok(ProportionalityReport {
        k,
        c,
        max_dev,
        noise_excess: excess,
        tol,
        proportional: excess <= tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn design_rows_average_the_polynomial() {
        let nodes = ShellNodes::new(vec![0.3, 0.6, 0.9], Some(0.1)).unwrap();
        let a = nodes.design(3);
        // H(rho) = S0 rho^2 + 2 S1 rho + S2, averaged over (rho - .05, rho + .05]
        let s = [0.7, 1.1, 2.0];
        for i in 0..3 {
            let (lo, hi) = nodes.shell(i);
            let prim = |r: f64| s[0] * r.powi(3) / 3.0 + s[1] * r * r + s[2] * r;
            let avg = (prim(hi) - prim(lo)) / 0.1;
            let row: f64 = (0..3).map(|m| a[(i, m)] * s[m]).sum();
            assert!((row - avg).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_nodes() {
        assert!(ShellNodes::new(vec![0.2, 0.2], None).is_err());
        assert!(ShellNodes::new(vec![0.1, 0.5], Some(0.3)).is_err());
        assert!(ShellNodes::new(vec![-0.1, 0.5], None).is_err());
        let nodes = ShellNodes::new(vec![0.1, 0.1 + 1e-10, 0.5], Some(0.05)).unwrap();
        assert!(matches!(Fit::new(&nodes, 3), Err(Error::IllConditioned { .. })));
    }

    #[test]
    fn spatial_grid_locates() {
        let g = SpatialGrid::new(Vector::zeros(2), Vector::from_slice(&[1.0, 1.0]), vec![2, 2]).unwrap();
        assert_eq!(g.locate(&Vector::from_slice(&[0.1, 0.1])), 0);
        assert_eq!(g.locate(&Vector::from_slice(&[0.9, 0.1])), 1);
        assert_eq!(g.locate(&Vector::from_slice(&[0.1, 0.9])), 2);
        assert_eq!(g.locate(&Vector::from_slice(&[1.0, 1.0])), 3);
        let (lo, hi) = g.bounds(3);
        assert_eq!((lo[0], hi[1]), (0.5, 1.0));
    }

    #[test]
    fn failure_threshold_grows_with_cells() {
        assert!((failure_z(1) - 3.0902).abs() < 1e-3);
        assert!(failure_z(1536) > 4.5 && failure_z(1536) < 5.5);
    }
}
