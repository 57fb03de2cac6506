//! Relative differential geometry of a smooth body `K` against `E`.
//!
//! Boundary charts come from the inverse Gauss map: a chart direction
//! `v(z)` gives `X = grad h_K(v)` on `bd K` and `Y = grad h_E(v)` on `bd E`,
//! with the relative normal `xi = v / h_E(v)`. Then `G_ij = <xi_i, X_j>`,
//! `B_ij = <xi_i, Y_j>`, and the relative principal radii are the
//! eigenvalues of `G B^{-1}`.

use rayon::prelude::*;
use serde::Serialize;

use crate::bodies::{ConvexBody, GaugeBody};
use crate::error::{Error, Result};
use crate::numeric::{binomial, gauss_legendre};
use crate::parallel_measures::{
    AreaMeasureProfile, CellMeasure, Estimate, ProfileMeta, ProfileMethod,
};
use crate::sampling::Scheme;
use crate::sphere_cells::SphereCells;
use crate::vector::{SymMatrix, Vector};

/// Default central-difference step.
pub const DEFAULT_FD_STEP: f64 = 1e-5;
/// Default Gauss-Legendre order per direction of each quadrature piece.
pub const DEFAULT_ORDER: usize = 8;

const MIN_EIGENVALUE: f64 = 1e-10;
const MAX_ASYMMETRY: f64 = 1e-4;

/// Cube-face chart of the sphere: `v(z) = +-e_axis + sum_i z_i e_{b_i}`
/// over `|z_i| < half_width`, where `b_i` are the other axes in order.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Chart {
    pub dim: usize,
    pub axis: usize,
    pub positive: bool,
    pub half_width: f64,
}

impl Chart {
    pub fn new(dim: usize, axis: usize, positive: bool) -> Result<Self> {
        if !(2..=3).contains(&dim) || axis >= dim {
            return Err(Error::InvalidSpec(format!("no chart on axis {axis} in dimension {dim}")));
        }
        Ok(Chart {
            dim,
            axis,
            positive,
            half_width: 1.0,
        })
    }

    /// The `2n` face charts.
    pub fn atlas(dim: usize) -> Result<Vec<Chart>> {
        let mut out = Vec::new();
        for axis in 0..dim {
            for positive in [true, false] {
                out.push(Chart::new(dim, axis, positive)?);
            }
        }
        Ok(out)
    }

    fn others(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.dim).filter(move |&i| i != self.axis)
    }

    pub fn contains(&self, z: &[f64]) -> bool {
        z.len() == self.dim - 1 && z.iter().all(|c| c.abs() < self.half_width)
    }

    /// Unnormalized chart direction `v(z)`.
    pub fn direction(&self, z: &[f64]) -> Vector {
        let mut v = Vector::zeros(self.dim);
        v[self.axis] = if self.positive { 1.0 } else { -1.0 };
        for (c, i) in self.others().enumerate() {
            v[i] = z[c];
        }
        v
    }

    /// Outer unit normal `u(z)`.
    pub fn normal(&self, z: &[f64]) -> Vector {
        self.direction(z).normalized().expect("chart directions are nonzero")
    }

    fn frame(&self, z: &[f64]) -> Frame {
        Frame {
            v: self.direction(z),
            dv: self.others().map(|i| Vector::basis(self.dim, i)).collect(),
        }
    }

    fn check(&self, z: &[f64]) -> Result<()> {
        if self.contains(z) {
            Ok(())
        } else {
            Err(Error::InvalidSpec(format!("chart point {z:?} outside the chart domain")))
        }
    }
}

/// A direction and its derivatives in some parameters.
struct Frame {
    v: Vector,
    dv: Vec<Vector>,
}

/// Boundary points, relative normal and their parameter derivatives.
struct Jet {
    u: Vector,
    /// `|v|`.
    length: f64,
    hk: f64,
    he: f64,
    x: Vector,
    y: Vector,
    xi: Vector,
    xs: Vec<Vector>,
    ys: Vec<Vector>,
    xis: Vec<Vector>,
}

fn finite_hessian(h: &SymMatrix) -> bool {
    (0..h.dim()).all(|i| (0..h.dim()).all(|j| h.get(i, j).is_finite()))
}

fn jet_analytic(k: &ConvexBody, e: &GaugeBody, f: &Frame) -> Result<Jet> {
    let v = &f.v;
    let (hk, x, hess_k) = k.smooth_support(v).ok_or(Error::NotSmooth { min_eigenvalue: 0.0 })?;
    let he = e.support(v);
    let y = e.support_gradient(v);
    let hess_e = e.support_hessian(v);
    if !finite_hessian(&hess_e) || !finite_hessian(&hess_k) {
        return Err(Error::NotSmooth {
            min_eigenvalue: f64::NAN,
        });
    }
    let r = v.norm();
    Ok(Jet {
        u: *v * (1.0 / r),
        length: r,
        hk: hk / r,
        he: he / r,
        x,
        y,
        xi: *v * (1.0 / he),
        xs: f.dv.iter().map(|d| hess_k.mul_vec(d)).collect(),
        ys: f.dv.iter().map(|d| hess_e.mul_vec(d)).collect(),
        xis: f
            .dv
            .iter()
            .map(|d| *d * (1.0 / he) - *v * (y.dot(d) / (he * he)))
            .collect(),
    })
}

fn jet_central(k: &ConvexBody, e: &GaugeBody, chart: &Chart, z: &[f64], step: f64) -> Result<Jet> {
    let values = |z: &[f64]| {
        let v = chart.direction(z);
        (k.support_point(&v), e.support_gradient(&v), v * (1.0 / e.support(&v)))
    };
    let v = chart.direction(z);
    let (x, y, xi) = values(z);
    let (mut xs, mut ys, mut xis) = (Vec::new(), Vec::new(), Vec::new());
    for i in 0..chart.dim - 1 {
        let mut zp = z.to_vec();
        let mut zm = z.to_vec();
        zp[i] += step;
        zm[i] -= step;
        let (xp, yp, cp) = values(&zp);
        let (xm, ym, cm) = values(&zm);
        let s = 0.5 / step;
        xs.push((xp - xm) * s);
        ys.push((yp - ym) * s);
        xis.push((cp - cm) * s);
    }
    let r = v.norm();
    Ok(Jet {
        u: v * (1.0 / r),
        length: r,
        hk: k.support_value(&v) / r,
        he: e.support(&v) / r,
        x,
        y,
        xi,
        xs,
        ys,
        xis,
    })
}

fn gram(a: &[Vector], b: &[Vector]) -> Vec<Vec<f64>> {
    a.iter().map(|ai| b.iter().map(|bj| ai.dot(bj)).collect()).collect()
}

fn to_matrix(m: &[Vec<f64>]) -> nalgebra::DMatrix<f64> {
    let d = m.len();
    nalgebra::DMatrix::from_fn(d, d, |i, j| m[i][j])
}

fn symmetrized(m: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let d = m.len();
    (0..d).map(|i| (0..d).map(|j| 0.5 * (m[i][j] + m[j][i])).collect()).collect()
}

/// Eigenvalues of `A c = lambda B c`, ascending; `None` unless `B` is
/// positive definite.
fn generalized_eigenvalues(a: &[Vec<f64>], b: &[Vec<f64>]) -> Option<Vec<f64>> {
    let l = to_matrix(b).cholesky()?.l();
    let li = l.try_inverse()?;
    let c = &li * to_matrix(a) * li.transpose();
    let c = (&c + c.transpose()) * 0.5;
    let mut ev: Vec<f64> = c.symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    Some(ev)
}

/// `e_k(r) / C(len, k)` for `k = 0..=len`.
fn normalized_symmetric(r: &[f64]) -> Vec<f64> {
    let d = r.len();
    let mut e = vec![0.0; d + 1];
    e[0] = 1.0;
    for &x in r {
        for k in (1..=d).rev() {
            e[k] += x * e[k - 1];
        }
    }
    (0..=d).map(|k| e[k] / binomial(d, k)).collect()
}

fn determinant(rows: &[Vector]) -> f64 {
    let n = rows.len();
    nalgebra::DMatrix::from_fn(n, n, |i, j| rows[i][j]).determinant()
}

/// Relative shape at a chart point.
#[derive(Clone, Debug, Serialize)]
pub struct RelShape {
    pub z: Vec<f64>,
    /// Outer unit normal.
    pub u: Vector,
    pub x: Vector,
    pub y: Vector,
    pub xi: Vector,
    pub g: Vec<Vec<f64>>,
    /// Symmetrized.
    pub b: Vec<Vec<f64>>,
    /// Relative principal radii, ascending.
    pub radii: Vec<f64>,
    /// `s_0 .. s_{n-1}`.
    pub s: Vec<f64>,
    /// First fundamental form of `bd E` at `Y`.
    pub h: Vec<Vec<f64>>,
    /// `sqrt(det h)`.
    pub surface_element: f64,
    /// `|B - B^T| / |B|` before symmetrization.
    pub asymmetry: f64,
    /// `max_i |X_i - G_ij B^jr Y_r| / max_i |X_i|`.
    pub relation_residual: f64,
    /// Principal radii of `K` itself, ascending.
    pub euclidean_radii: Vec<f64>,
}

fn shape_from(jet: &Jet, z: &[f64], dv: &[Vector]) -> Result<RelShape> {
    let d = jet.xs.len();
    // Euclidean radii: X_j = H_K(v) dv_j against the metric of the projected
    // dv, and H_K(u) = |v| H_K(v)
    let tangents: Vec<Vector> = dv.iter().map(|t| *t - jet.u * jet.u.dot(t)).collect();
    let hk = symmetrized(&gram(&tangents, &jet.xs));
    let metric = gram(&tangents, &tangents);
    let euclidean_radii = generalized_eigenvalues(&hk, &metric)
        .ok_or(Error::NotSmooth { min_eigenvalue: 0.0 })?;
    let euclidean_radii: Vec<f64> = euclidean_radii.iter().map(|x| x * jet.length).collect();
    if let Some(&lo) = euclidean_radii.first() {
        if !(lo >= MIN_EIGENVALUE) {
            return Err(Error::NotSmooth { min_eigenvalue: lo });
        }
    }
    let g_raw = gram(&jet.xis, &jet.xs);
    let b_raw = gram(&jet.xis, &jet.ys);
    let (mut diff, mut norm) = (0.0, 0.0);
    for i in 0..d {
        for j in 0..d {
            diff += (b_raw[i][j] - b_raw[j][i]).powi(2);
            norm += b_raw[i][j].powi(2);
        }
    }
    let asymmetry = if norm > 0.0 { (diff / norm).sqrt() } else { 0.0 };
    if asymmetry > MAX_ASYMMETRY {
        return Err(Error::TensorAsymmetry { asymmetry });
    }
    let g = symmetrized(&g_raw);
    let b = symmetrized(&b_raw);
    let radii = generalized_eigenvalues(&g, &b).ok_or_else(|| Error::NotSmooth {
        min_eigenvalue: to_matrix(&b).symmetric_eigen().eigenvalues.min(),
    })?;
    if let Some(&lo) = radii.first() {
        if !(lo >= MIN_EIGENVALUE) {
            return Err(Error::NotSmooth { min_eigenvalue: lo });
        }
    }
    let s = normalized_symmetric(&radii);
    let h = gram(&jet.ys, &jet.ys);
    let surface_element = to_matrix(&h).determinant().max(0.0).sqrt();

    // X_i = G_ij B^{jr} Y_r
    let binv = to_matrix(&b).try_inverse().ok_or(Error::NotSmooth { min_eigenvalue: 0.0 })?;
    let coeff = to_matrix(&g) * binv;
    let scale = jet.xs.iter().map(Vector::norm).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut relation_residual: f64 = 0.0;
    for i in 0..d {
        let mut w = jet.xs[i];
        for rr in 0..d {
            w = w.axpy(-coeff[(i, rr)], &jet.ys[rr]);
        }
        relation_residual = relation_residual.max(w.norm() / scale);
    }
    Ok(RelShape {
        z: z.to_vec(),
        u: jet.u,
        x: jet.x,
        y: jet.y,
        xi: jet.xi,
        g,
        b,
        radii,
        s,
        h,
        surface_element,
        asymmetry,
        relation_residual,
        euclidean_radii,
    })
}

fn check_pair(k: &ConvexBody, e: &GaugeBody, chart: &Chart) -> Result<()> {
    for got in [e.dim(), chart.dim] {
        if got != k.dim() {
            return Err(Error::DimensionMismatch {
                expected: k.dim(),
                got,
            });
        }
    }
    Ok(())
}

/// Relative normal `xi` and `Y` at `X(z)`, with the residuals of
/// `<xi, X_i> = 0` and `<xi, Y> = 1`.
#[derive(Clone, Debug, Serialize)]
pub struct RelativeNormal {
    pub x: Vector,
    pub xi: Vector,
    pub y: Vector,
    /// `max_i |<xi, X_i>|`.
    pub orthogonality: f64,
    /// `|<xi, Y> - 1|`.
    pub normalization: f64,
}

pub fn relative_normalization(
    k: &ConvexBody,
    e: &GaugeBody,
    chart: &Chart,
    z: &[f64],
) -> Result<RelativeNormal> {
    let shape_jet = jet(k, e, chart, z, None)?;
    let frame = chart.frame(z);
    shape_from(&shape_jet, z, &frame.dv)?;
    let orthogonality = shape_jet
        .xs
        .iter()
        .map(|t| shape_jet.xi.dot(t).abs())
        .fold(0.0, f64::max);
    Ok(RelativeNormal {
        x: shape_jet.x,
        xi: shape_jet.xi,
        y: shape_jet.y,
        orthogonality,
        normalization: (shape_jet.xi.dot(&shape_jet.y) - 1.0).abs(),
    })
}

/// Analytic derivatives unless `fd_step` is given or `K` has no analytic
/// Hessian, then central differences.
fn jet(k: &ConvexBody, e: &GaugeBody, chart: &Chart, z: &[f64], fd_step: Option<f64>) -> Result<Jet> {
    check_pair(k, e, chart)?;
    chart.check(z)?;
    match fd_step {
        Some(step) if !(step > 0.0) => Err(Error::InvalidSpec("difference step must be positive".into())),
        Some(step) => jet_central(k, e, chart, z, step),
        None if k.is_smooth() => jet_analytic(k, e, &chart.frame(z)),
        None => jet_central(k, e, chart, z, DEFAULT_FD_STEP),
    }
}

/// `G`, `B`, radii and `s_k` at `z`; see [`jet`] for the derivatives used.
pub fn rel_tensors(
    k: &ConvexBody,
    e: &GaugeBody,
    chart: &Chart,
    z: &[f64],
    fd_step: Option<f64>,
) -> Result<RelShape> {
    let j = jet(k, e, chart, z, fd_step)?;
    shape_from(&j, z, &chart.frame(z).dv)
}

/// Largest relative gap between `|det(u, X_1 + rho Y_1, ..)|` and
/// `sum_m rho^m C(n-1, m) s_{n-1-m} sqrt(det h)` over `rhos`.
pub fn jacobian_expansion_check(
    k: &ConvexBody,
    e: &GaugeBody,
    chart: &Chart,
    z: &[f64],
    rhos: &[f64],
) -> Result<f64> {
    let j = jet(k, e, chart, z, None)?;
    let shape = shape_from(&j, z, &chart.frame(z).dv)?;
    let d = chart.dim - 1;
    let mut worst: f64 = 0.0;
    for &rho in rhos {
        let mut rows = vec![j.u];
        rows.extend((0..d).map(|i| j.xs[i].axpy(rho, &j.ys[i])));
        let direct = determinant(&rows).abs();
        let expansion: f64 = (0..=d)
            .map(|m| rho.powi(m as i32) * binomial(d, m) * shape.s[d - m])
            .sum::<f64>()
            * shape.surface_element;
        let scale = direct.abs().max(expansion.abs()).max(f64::MIN_POSITIVE);
        worst = worst.max((direct - expansion).abs() / scale);
    }
    Ok(worst)
}

/// A quadrature piece: parameters in `[0, 1]^{n-1}` mapped to directions.
enum Piece {
    /// Angles `from + (to - from) w^3`, graded towards `from`.
    Arc { from: f64, to: f64 },
    /// Bilinear quad with corner `v0`, graded towards the two sides through it.
    Quad { v0: Vector, m1: Vector, c: Vector, m2: Vector },
}

impl Piece {
    fn frame(&self, w: &[f64]) -> Frame {
        match self {
            Piece::Arc { from, to } => {
                let t = from + (to - from) * w[0].powi(3);
                let (s, c) = t.sin_cos();
                Frame {
                    v: Vector::from_slice(&[c, s]),
                    dv: vec![Vector::from_slice(&[-s, c]) * ((to - from) * 3.0 * w[0] * w[0])],
                }
            }
            Piece::Quad { v0, m1, c, m2 } => {
                let (xi, eta) = (w[0].powi(3), w[1].powi(3));
                let (dxi, deta) = (3.0 * w[0] * w[0], 3.0 * w[1] * w[1]);
                let v = *v0 * ((1.0 - xi) * (1.0 - eta))
                    + *m1 * (xi * (1.0 - eta))
                    + *c * (xi * eta)
                    + *m2 * ((1.0 - xi) * eta);
                let p_xi = (*m1 - *v0) * (1.0 - eta) + (*c - *m2) * eta;
                let p_eta = (*m2 - *v0) * (1.0 - xi) + (*c - *m1) * xi;
                Frame {
                    v,
                    dv: vec![p_xi * dxi, p_eta * deta],
                }
            }
        }
    }
}

/// Pieces covering a cell; their graded sides hold the cell boundary, where
/// the support Hessians of `l_q` gauges blow up.
fn pieces(cells: &SphereCells, c: usize) -> Vec<Piece> {
    match cells {
        SphereCells::Arcs { .. } => {
            let (a, b) = cells.arc_bounds(c).unwrap();
            let quarter = std::f64::consts::FRAC_PI_2;
            let mut cuts = vec![a, b];
            let first = (a / quarter).floor() as i64 + 1;
            let mut q = first;
            while (q as f64) * quarter < b {
                cuts.push(q as f64 * quarter);
                q += 1;
            }
            cuts.sort_by(f64::total_cmp);
            cuts.dedup_by(|x, y| (*x - *y).abs() < 1e-15);
            cuts.windows(2)
                .flat_map(|w| {
                    let mid = 0.5 * (w[0] + w[1]);
                    [Piece::Arc { from: w[0], to: mid }, Piece::Arc { from: w[1], to: mid }]
                })
                .collect()
        }
        SphereCells::Octahedral { .. } => {
            let tri = cells.triangle(c).unwrap();
            let centroid = (tri[0] + tri[1] + tri[2]) * (1.0 / 3.0);
            (0..3)
                .map(|i| {
                    let v0 = tri[i];
                    let (p, q) = (tri[(i + 1) % 3], tri[(i + 2) % 3]);
                    Piece::Quad {
                        v0,
                        m1: (v0 + p) * 0.5,
                        c: centroid,
                        m2: (v0 + q) * 0.5,
                    }
                })
                .collect()
        }
    }
}

struct CellSums {
    s: Vec<f64>,
    he: Vec<f64>,
    hk: Vec<f64>,
    u: Vec<Vec<f64>>,
    evaluations: usize,
}

fn integrate_cell(
    k: &ConvexBody,
    e: &GaugeBody,
    cells: &SphereCells,
    c: usize,
    nodes: &[f64],
    weights: &[f64],
) -> Result<CellSums> {
    let n = k.dim();
    let mut out = CellSums {
        s: vec![0.0; n],
        he: vec![0.0; n],
        hk: vec![0.0; n],
        u: vec![vec![0.0; n]; n],
        evaluations: 0,
    };
    let q = nodes.len();
    let points = q.pow((n - 1) as u32);
    for piece in pieces(cells, c) {
        for p in 0..points {
            let (w, wt): (Vec<f64>, f64) = if n == 2 {
                (vec![nodes[p]], weights[p])
            } else {
                let (i, j) = (p / q, p % q);
                (vec![nodes[i], nodes[j]], weights[i] * weights[j])
            };
            let frame = piece.frame(&w);
            let jet = jet_analytic(k, e, &frame)?;
            let shape = shape_from(&jet, &w, &frame.dv)?;
            let area = wt * shape.surface_element;
            for m in 0..n {
                let dens = area * shape.s[m];
                out.s[m] += dens;
                out.he[m] += dens * jet.he;
                out.hk[m] += dens * jet.hk;
                for i in 0..n {
                    out.u[m][i] += dens * jet.u[i];
                }
            }
            out.evaluations += 1;
        }
    }
    Ok(out)
}

/// `S_k^E(K, cell) = int s_k dH^{n-1}` over the part of `bd E` with normals in
/// the cell, by graded Gauss-Legendre quadrature of order `order` on each
/// piece of the cell.
pub fn integrate_area_measures_smooth(
    k: &ConvexBody,
    e: &GaugeBody,
    cells: &SphereCells,
    order: usize,
) -> Result<AreaMeasureProfile> {
    let n = k.dim();
    for got in [e.dim(), cells.dim()] {
        if got != n {
            return Err(Error::DimensionMismatch { expected: n, got });
        }
    }
    if !k.is_smooth() {
        return Err(Error::NotSmooth { min_eigenvalue: 0.0 });
    }
    if order == 0 {
        return Err(Error::InvalidSpec("quadrature order must be positive".into()));
    }
    let (nodes, weights) = gauss_legendre(order);
    let sums: Vec<CellSums> = (0..cells.count())
        .into_par_iter()
        .map(|c| integrate_cell(k, e, cells, c, &nodes, &weights))
        .collect::<Result<_>>()?;
    let m = cells.count();
    let measures = (0..n)
        .map(|k| CellMeasure::exact(sums.iter().map(|s| s.s[k]).collect()))
        .collect::<Vec<_>>();
    let exact = |v: f64| Estimate {
        value: v,
        stderr: 0.0,
    };
    let total = |f: &dyn Fn(&CellSums) -> f64| exact(sums.iter().map(f).sum());
    let evaluations = sums.iter().map(|s| s.evaluations).sum();
    Ok(AreaMeasureProfile {
        dim: n,
        cells: cells.clone(),
        totals: measures.iter().map(|mm| exact(mm.total)).collect(),
        measures,
        cell_cov: vec![vec![0.0; n * n]; m],
        h_e_moments: (0..n).map(|k| total(&|s| s.he[k])).collect(),
        h_k_moments: (0..n).map(|k| total(&|s| s.hk[k])).collect(),
        centroids: (0..n)
            .map(|k| (0..n).map(|i| total(&|s| s.u[k][i])).collect())
            .collect(),
        fit_residual: 0.0,
        meta: ProfileMeta {
            method: ProfileMethod::Quadrature,
            rho_nodes: Vec::new(),
            delta: 0.0,
            samples: evaluations,
            seed: 0,
            scheme: Scheme::Uniform,
            accepted: Vec::new(),
            box_volume: 0.0,
            condition: 1.0,
        },
    })
}
