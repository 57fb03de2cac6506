mod common;

use std::f64::consts::PI;

use common::{unit_square, v, within};
use relconvex::exact_oracles::polygon_area_measure;
use relconvex::parallel_measures::*;
use relconvex::sphere_cells::SphereCells;
use relconvex::{ConvexBody, GaugeBody, Vector};

fn disc(r: f64) -> ConvexBody {
    ConvexBody::ball(Vector::zeros(2), r).unwrap()
}

fn ball2() -> GaugeBody {
    GaugeBody::ball(2, 1.0).unwrap()
}

/// Perimeter of the ellipse with semi-axes `a, b`, by the trapezoid rule
/// (spectrally accurate for periodic integrands).
fn ellipse_perimeter(a: f64, b: f64) -> f64 {
    let m = 4096;
    (0..m)
        .map(|i| {
            let t = 2.0 * PI * i as f64 / m as f64;
            (a * a * t.sin().powi(2) + b * b * t.cos().powi(2)).sqrt()
        })
        .sum::<f64>()
        * 2.0
        * PI
        / m as f64
}

#[test]
fn disc_density_is_the_parallel_circumference() {
    let cells = SphereCells::arcs(8).unwrap();
    let (r, rho) = (1.0, 0.5);
    let m = estimate_boundary_density(&disc(r), &ball2(), &cells, rho, 0.02, &SamplingOptions::new(400_000, 1)).unwrap();
    let total = 2.0 * PI * (r + rho);
    let sd = m.stderr.iter().map(|s| s * s).sum::<f64>().sqrt();
    assert!(within(m.total, total, sd, 3.0), "{} vs {total} (sd {sd})", m.total);
    for c in 0..8 {
        assert!(within(m.masses[c], total / 8.0, m.stderr[c], 3.0), "cell {c}");
    }
}

#[test]
fn square_density_at_half() {
    let cells = SphereCells::arcs(8).unwrap();
    let m = estimate_boundary_density(&unit_square(), &ball2(), &cells, 0.5, 0.02, &SamplingOptions::new(400_000, 2)).unwrap();
    let sd = m.stderr.iter().map(|s| s * s).sum::<f64>().sqrt();
    assert!(within(m.total, 4.0 + PI, sd, 3.0), "{} (sd {sd})", m.total);
}

#[test]
fn halving_the_shell_is_consistent() {
    let cells = SphereCells::arcs(4).unwrap();
    let k = unit_square();
    let e = GaugeBody::ellipsoid_axes(&[1.0, 0.5]).unwrap();
    let a = estimate_boundary_density(&k, &e, &cells, 0.4, 0.04, &SamplingOptions::new(200_000, 3)).unwrap();
    let b = estimate_boundary_density(&k, &e, &cells, 0.4, 0.02, &SamplingOptions::new(200_000, 4)).unwrap();
    for c in 0..4 {
        let sd = (a.stderr[c].powi(2) + b.stderr[c].powi(2)).sqrt();
        assert!(within(a.masses[c], b.masses[c], sd, 3.0), "cell {c}");
    }
}

#[test]
fn scaled_disc_measures() {
    let cells = SphereCells::arcs(8).unwrap();
    let r = 1.5;
    let k = disc(r);
    let p = fit_area_measures(&k, &ball2(), &cells, &ShellNodes::default_for(&k), &SamplingOptions::new(400_000, 5)).unwrap();
    for c in 0..8 {
        let arc = cells.area(c);
        let (s0, s1) = (&p.measures[0], &p.measures[1]);
        assert!(within(s0.masses[c], arc, s0.stderr[c], 3.0), "S0 cell {c}: {} vs {arc}", s0.masses[c]);
        assert!(within(s1.masses[c], r * arc, s1.stderr[c], 3.0), "S1 cell {c}");
    }
    assert_eq!(p.meta.method, ProfileMethod::ShellFit);
    // stratification rounds the count down to a full grid
    assert!(p.meta.samples <= 400_000 && p.meta.samples > 399_000);
}

#[test]
fn square_measures_match_the_polygon_oracle() {
    let cells = SphereCells::arcs(16).unwrap();
    let k = unit_square();
    let p = fit_area_measures(&k, &ball2(), &cells, &ShellNodes::default_for(&k), &SamplingOptions::new(400_000, 6)).unwrap();
    let atoms = polygon_area_measure(k.as_polytope().unwrap(), &cells).unwrap();
    for c in 0..16 {
        let s1 = &p.measures[1];
        assert!(within(s1.masses[c], atoms.masses[c], s1.stderr[c].max(1e-9), 3.0), "S1 cell {c}");
        let s0 = &p.measures[0];
        assert!(within(s0.masses[c], cells.area(c), s0.stderr[c], 3.0), "S0 cell {c}");
    }
    assert!((p.totals[1].value - 4.0).abs() < 0.02 * 4.0);
}

#[test]
fn ellipse_gauge_area_measures() {
    // S_1 does not see E; S_0 is the ellipse's own perimeter measure
    let cells = SphereCells::arcs(8).unwrap();
    let k = unit_square();
    let e = GaugeBody::ellipsoid_axes(&[1.0, 0.5]).unwrap();
    let p = fit_area_measures(&k, &e, &cells, &ShellNodes::default_for(&k), &SamplingOptions::new(400_000, 7)).unwrap();
    let per = ellipse_perimeter(1.0, 0.5);
    assert!(within(p.totals[0].value, per, p.totals[0].stderr, 3.0), "{:?} vs {per}", p.totals[0]);
    assert!(within(p.totals[1].value, 4.0, p.totals[1].stderr, 3.0), "{:?}", p.totals[1]);
}

#[test]
fn body_equal_to_gauge_has_equal_measures() {
    let cells = SphereCells::arcs(8).unwrap();
    let e = GaugeBody::ellipsoid_axes(&[1.0, 0.6]).unwrap();
    let k = ConvexBody::from_gauge(&e, Vector::zeros(2)).unwrap();
    let p = fit_area_measures(&k, &e, &cells, &ShellNodes::default_for(&k), &SamplingOptions::new(400_000, 8)).unwrap();
    for c in 0..8 {
        // S_0 and S_1 come from the same samples, so use the fitted covariance
        let cov = &p.cell_cov[c];
        let sd = (cov[0] + cov[3] - 2.0 * cov[1]).max(0.0).sqrt();
        assert!(within(p.measures[0].masses[c], p.measures[1].masses[c], sd, 3.0), "cell {c}");
    }
}

#[test]
fn area_measure_centroids_vanish() {
    let cells = SphereCells::arcs(8).unwrap();
    let k = ConvexBody::polytope(vec![v(&[0.0, 0.0]), v(&[1.0, 0.2]), v(&[0.4, 0.9])]).unwrap();
    let e = GaugeBody::lp_ball(4.0, &[1.0, 1.0]).unwrap();
    let p = fit_area_measures(&k, &e, &cells, &ShellNodes::default_for(&k), &SamplingOptions::new(300_000, 9)).unwrap();
    for per_k in &p.centroids {
        for est in per_k {
            assert!(within(est.value, 0.0, est.stderr, 3.0), "{est:?}");
        }
    }
}

#[test]
fn refinement_reaggregates() {
    let coarse = SphereCells::arcs(8).unwrap();
    let fine = coarse.refined();
    let k = unit_square();
    let e = GaugeBody::ellipsoid_axes(&[1.0, 0.5]).unwrap();
    let nodes = ShellNodes::default_for(&k);
    let a = fit_area_measures(&k, &e, &coarse, &nodes, &SamplingOptions::new(300_000, 10)).unwrap();
    let b = fit_area_measures(&k, &e, &fine, &nodes, &SamplingOptions::new(300_000, 11)).unwrap();
    let parents = coarse.parent_map(&fine);
    for j in 0..2 {
        let agg = b.measures[j].aggregate(&parents, coarse.count());
        for c in 0..coarse.count() {
            let sd = (a.measures[j].stderr[c].powi(2) + agg.stderr[c].powi(2)).sqrt().max(1e-9);
            assert!(within(a.measures[j].masses[c], agg.masses[c], sd, 3.0), "S{j} cell {c}");
        }
    }
}

fn square_support() -> SupportMeasureEstimate {
    let k = unit_square();
    let grid = SpatialGrid::over(&k, 2).unwrap();
    let cells = SphereCells::arcs(8).unwrap();
    fit_support_measures(&k, &ball2(), &grid, &cells, &ShellNodes::default_for(&k), &SamplingOptions::new(400_000, 12)).unwrap()
}

#[test]
fn corner_box_curvature_measures() {
    let est = square_support();
    let c = curvature_measures(&est, &[vec![0]]).unwrap();
    // the corner's normal cone is a quarter circle; the box holds two half edges
    assert!(within(c[0].masses[0], PI / 2.0, c[0].stderr[0], 3.0), "{:?}", c[0]);
    assert!(within(c[1].masses[0], 1.0, c[1].stderr[0].max(1e-9), 3.0), "{:?}", c[1]);
}

#[test]
fn curvature_measures_are_additive() {
    let est = square_support();
    let c = curvature_measures(&est, &[vec![0], vec![1], vec![0, 1], vec![0, 1, 2, 3]]).unwrap();
    for j in 0..2 {
        let m = &c[j].masses;
        assert!((m[0] + m[1] - m[2]).abs() < 1e-9 * m[2].abs().max(1.0));
        let total = est.marginal_area().unwrap().measures[j].total;
        assert!((m[3] - total).abs() < 1e-9 * total.max(1.0), "{} vs {total}", m[3]);
    }
}

#[test]
fn marginal_matches_area_fit() {
    let est = square_support();
    let k = unit_square();
    let p = fit_area_measures(&k, &ball2(), &est.cells, &ShellNodes::default_for(&k), &SamplingOptions::new(400_000, 12)).unwrap();
    let marginal = est.marginal_area().unwrap();
    for j in 0..2 {
        for c in 0..est.cells.count() {
            let (a, b) = (p.measures[j].masses[c], marginal.measures[j].masses[c]);
            assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0), "S{j} cell {c}: {a} vs {b}");
        }
    }
}

#[test]
fn homothetic_gauge_is_proportional() {
    let cells = SphereCells::arcs(8).unwrap();
    let e = GaugeBody::ellipsoid_axes(&[1.0, 0.6]).unwrap();
    let k = ConvexBody::from_gauge(&e.scaled(2.0).unwrap(), Vector::zeros(2)).unwrap();
    let p = fit_area_measures(&k, &e, &cells, &ShellNodes::default_for(&k), &SamplingOptions::new(400_000, 13)).unwrap();
    let r = proportionality_test(&p, 0, 0.05).unwrap();
    assert!(r.proportional, "{r:?}");
    assert!((r.c - 0.5).abs() < 0.02, "{r:?}");
}

#[test]
fn square_is_not_proportional() {
    let cells = SphereCells::arcs(8).unwrap();
    let k = unit_square();
    let p = fit_area_measures(&k, &ball2(), &cells, &ShellNodes::default_for(&k), &SamplingOptions::new(400_000, 14)).unwrap();
    let r = proportionality_test(&p, 0, 0.05).unwrap();
    assert!(!r.proportional, "{r:?}");
    assert!(r.max_dev > 0.5, "{r:?}");
}

#[test]
fn proportionality_rejects_top_index() {
    let cells = SphereCells::arcs(4).unwrap();
    let k = unit_square();
    let p = fit_area_measures(&k, &ball2(), &cells, &ShellNodes::default_for(&k), &SamplingOptions::new(20_000, 15)).unwrap();
    assert!(proportionality_test(&p, 1, 0.05).is_err());
}

#[test]
fn csv_has_one_row_per_cell() {
    let cells = SphereCells::arcs(4).unwrap();
    let k = unit_square();
    let p = fit_area_measures(&k, &ball2(), &cells, &ShellNodes::default_for(&k), &SamplingOptions::new(20_000, 16)).unwrap();
    let csv = p.csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "cell_id,u0,u1,area,S0,S1,stderr0,stderr1");
    assert_eq!(lines.len(), 5);
}
