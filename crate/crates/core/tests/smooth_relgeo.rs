use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relconvex::smooth_relgeo::{
    integrate_area_measures_smooth, jacobian_expansion_check, rel_tensors,
    relative_normalization, Chart, DEFAULT_FD_STEP, DEFAULT_ORDER,
};
use relconvex::sphere_cells::SphereCells;
use relconvex::{ConvexBody, Error, GaugeBody, Vector};

fn random_point(rng: &mut ChaCha8Rng, n: usize) -> (Chart, Vec<f64>) {
    let charts = Chart::atlas(n).unwrap();
    let chart = charts[rng.random_range(0..charts.len())].clone();
    let z = (0..n - 1).map(|_| rng.random_range(-0.95..0.95)).collect();
    (chart, z)
}

fn ellipsoid(axes: &[f64]) -> (GaugeBody, ConvexBody) {
    let e = GaugeBody::ellipsoid_axes(axes).unwrap();
    let k = ConvexBody::from_gauge(&e, Vector::zeros(axes.len())).unwrap();
    (e, k)
}

#[test]
fn homothets_have_constant_radii() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let e = GaugeBody::ellipsoid_axes(&[1.0, 0.7, 0.4]).unwrap();
    let k = ConvexBody::from_gauge(&e.scaled(2.5).unwrap(), Vector::from_slice(&[0.1, 0.0, -0.3]))
        .unwrap();
    for _ in 0..50 {
        let (chart, z) = random_point(&mut rng, 3);
        let s = rel_tensors(&k, &e, &chart, &z, None).unwrap();
        for r in &s.radii {
            assert!((r - 2.5).abs() < 1e-10, "{r}");
        }
        assert!((s.s[1] - 2.5).abs() < 1e-10 && (s.s[2] - 6.25).abs() < 1e-9);
        assert_eq!(s.s[0], 1.0);
    }
}

#[test]
fn ball_radii_against_the_unit_ball() {
    let e = GaugeBody::ball(3, 1.0).unwrap();
    let k = ConvexBody::ball(Vector::zeros(3), 1.7).unwrap();
    let chart = Chart::new(3, 2, false).unwrap();
    let s = rel_tensors(&k, &e, &chart, &[0.3, -0.6], None).unwrap();
    assert!(s.radii.iter().all(|r| (r - 1.7).abs() < 1e-12));
}

#[test]
fn radius_matches_difference_hessians() {
    // K = B^2 against the ellipse with semi-axes (2, 1), at u = (1, 0)
    let e = GaugeBody::ellipsoid_axes(&[2.0, 1.0]).unwrap();
    let k = ConvexBody::ball(Vector::zeros(2), 1.0).unwrap();
    let chart = Chart::new(2, 0, true).unwrap();
    let s = rel_tensors(&k, &e, &chart, &[0.0], None).unwrap();
    let h = 1e-4;
    let u = |t: f64| Vector::from_slice(&[t.cos(), t.sin()]);
    // second derivative along the circle plus the value gives the radius
    let radius = |f: &dyn Fn(&Vector) -> f64| {
        (f(&u(h)) - 2.0 * f(&u(0.0)) + f(&u(-h))) / (h * h) + f(&u(0.0))
    };
    let rk = radius(&|v| k.support_value(v));
    let re = radius(&|v| e.support(v));
    assert!((s.radii[0] - rk / re).abs() < 1e-5, "{} vs {}", s.radii[0], rk / re);
    assert!((s.radii[0] - 2.0).abs() < 1e-10);
}

#[test]
fn normalization_identities_at_many_points() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (e, _) = ellipsoid(&[1.5, 0.8]);
    let (_, k) = ellipsoid(&[0.6, 1.1]);
    for _ in 0..1000 {
        let (chart, z) = random_point(&mut rng, 2);
        let r = relative_normalization(&k, &e, &chart, &z).unwrap();
        assert!(r.normalization < 1e-10, "{}", r.normalization);
        assert!(r.orthogonality < 1e-10);
    }
}

#[test]
fn trivial_normalizations() {
    let (e, k) = ellipsoid(&[1.5, 0.8, 1.2]);
    let chart = Chart::new(3, 1, true).unwrap();
    let r = relative_normalization(&k, &e, &chart, &[0.2, -0.4]).unwrap();
    assert!((r.x - r.y).norm() < 1e-12);
    let ball = GaugeBody::ball(3, 1.0).unwrap();
    let r = relative_normalization(&k, &ball, &chart, &[0.2, -0.4]).unwrap();
    assert!((r.xi - chart.normal(&[0.2, -0.4])).norm() < 1e-12);
}

#[test]
fn tensors_are_positive_and_satisfy_the_relation() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let e = GaugeBody::lp_ball(4.0, &[1.0, 1.0, 1.0]).unwrap();
    let (_, k) = ellipsoid(&[1.0, 0.6, 0.8]);
    for _ in 0..200 {
        let (chart, z) = random_point(&mut rng, 3);
        let s = rel_tensors(&k, &e, &chart, &z, None).unwrap();
        assert!(s.relation_residual < 1e-10);
        assert!(s.radii.iter().all(|r| *r > 0.0));
        let fd = rel_tensors(&k, &e, &chart, &z, Some(DEFAULT_FD_STEP)).unwrap();
        for (a, b) in s.radii.iter().zip(&fd.radii) {
            assert!((a - b).abs() < 1e-5 * a.max(1.0), "{a} vs {b}");
        }
    }
}

#[test]
fn jacobian_expansion_on_random_ellipsoid_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let axes = |rng: &mut ChaCha8Rng| (0..3).map(|_| rng.random_range(0.4..2.0)).collect::<Vec<_>>();
        let e = GaugeBody::ellipsoid_axes(&axes(&mut rng)).unwrap();
        let (_, k) = ellipsoid(&axes(&mut rng));
        let (chart, z) = random_point(&mut rng, 3);
        let r = jacobian_expansion_check(&k, &e, &chart, &z, &[0.0, 0.1, 0.5, 1.0, 3.0]).unwrap();
        worst = worst.max(r);
    }
    assert!(worst < 1e-10, "{worst}");
}

#[test]
fn homothet_jacobian_is_a_power() {
    let (e, _) = ellipsoid(&[1.0, 0.5, 0.7]);
    let k = ConvexBody::from_gauge(&e.scaled(2.0).unwrap(), Vector::zeros(3)).unwrap();
    let chart = Chart::new(3, 0, false).unwrap();
    let s = rel_tensors(&k, &e, &chart, &[0.1, 0.2], None).unwrap();
    // (a + rho)^{n-1} sqrt(det h) is the expansion for equal radii a
    for rho in [0.0f64, 0.5, 2.0] {
        let expected = (2.0 + rho) * (2.0 + rho);
        let got: f64 = (0..=2)
            .map(|m| rho.powi(m) * [1.0, 2.0, 1.0][m as usize] * s.s[2 - m as usize])
            .sum();
        assert!((got - expected).abs() < 1e-10);
    }
}

#[test]
fn nonsmooth_inputs_are_rejected() {
    let e = GaugeBody::ball(2, 1.0).unwrap();
    let square = ConvexBody::polytope(vec![
        Vector::from_slice(&[0.0, 0.0]),
        Vector::from_slice(&[1.0, 0.0]),
        Vector::from_slice(&[1.0, 1.0]),
        Vector::from_slice(&[0.0, 1.0]),
    ])
    .unwrap();
    let cells = SphereCells::arcs(8).unwrap();
    assert!(matches!(
        integrate_area_measures_smooth(&square, &e, &cells, 4),
        Err(Error::NotSmooth { .. })
    ));
    // flat point of the l4 ball on the chart axis
    let l4 = GaugeBody::lp_ball(4.0, &[1.0, 1.0]).unwrap();
    let k = ConvexBody::ball(Vector::zeros(2), 1.0).unwrap();
    let chart = Chart::new(2, 0, true).unwrap();
    assert!(matches!(rel_tensors(&k, &l4, &chart, &[0.0], None), Err(Error::NotSmooth { .. })));
}

#[test]
fn circle_measures_are_arc_lengths() {
    let e = GaugeBody::ball(2, 1.0).unwrap();
    let k = ConvexBody::ball(Vector::from_slice(&[0.3, 0.1]), 1.8).unwrap();
    let cells = SphereCells::arcs(64).unwrap();
    let p = integrate_area_measures_smooth(&k, &e, &cells, DEFAULT_ORDER).unwrap();
    let arc = 2.0 * PI / 64.0;
    for c in 0..64 {
        assert!((p.measures[0].masses[c] - arc).abs() < 1e-12);
        assert!((p.measures[1].masses[c] - 1.8 * arc).abs() < 1e-12);
    }
}

/// Perimeter of `x^4 + y^4 = 1` from a fine polyline.
fn l4_perimeter() -> f64 {
    let m = 200_000;
    let pt = |t: f64| {
        let (s, c) = t.sin_cos();
        let r = (c.powi(4) + s.powi(4)).powf(-0.25);
        (r * c, r * s)
    };
    (0..m)
        .map(|i| {
            let (a, b) = (pt(2.0 * PI * i as f64 / m as f64), pt(2.0 * PI * (i + 1) as f64 / m as f64));
            (a.0 - b.0).hypot(a.1 - b.1)
        })
        .sum()
}

#[test]
fn gauge_against_itself_gives_its_surface() {
    let l4 = GaugeBody::lp_ball(4.0, &[1.0, 1.0]).unwrap();
    let k = ConvexBody::from_gauge(&l4, Vector::zeros(2)).unwrap();
    let cells = SphereCells::arcs(36).unwrap();
    let p = integrate_area_measures_smooth(&k, &l4, &cells, DEFAULT_ORDER).unwrap();
    let perimeter = l4_perimeter();
    for m in &p.measures {
        assert!((m.total - perimeter).abs() < 1e-6 * perimeter, "{} vs {perimeter}", m.total);
    }

    // prolate spheroid with semi-axes (2, 1, 1)
    let (e, k) = ellipsoid(&[2.0, 1.0, 1.0]);
    let cells = SphereCells::octahedral(2).unwrap();
    let p = integrate_area_measures_smooth(&k, &e, &cells, DEFAULT_ORDER).unwrap();
    let ecc = (1.0f64 - 0.25).sqrt();
    let area = 2.0 * PI * (1.0 + 2.0 / ecc * ecc.asin());
    for m in &p.measures {
        assert!((m.total - area).abs() < 1e-8 * area, "{} vs {area}", m.total);
    }
    // mixed volumes through the support moments
    let (ve, vk) = p.mixed_volumes();
    let vol = 4.0 * PI / 3.0 * 2.0;
    for est in ve.iter().chain(&vk) {
        assert!((est.value - vol).abs() < 1e-8 * vol);
    }
}
