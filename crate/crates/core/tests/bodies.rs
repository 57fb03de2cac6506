mod common;

use common::{cuboid, unit_square, v};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relconvex::bodies::{make_tangential_body, BodySpec, TangentialSpec};
use relconvex::numeric::sphere_directions;
use relconvex::{ConvexBody, Direction, GaugeBody, Vector};

fn unit(t: f64) -> Vector {
    v(&[t.cos(), t.sin()])
}

fn fd_gradient(f: impl Fn(&Vector) -> f64, u: &Vector, h: f64) -> Vector {
    let n = u.dim();
    Vector::from_fn(n, |i| {
        let mut a = *u;
        let mut b = *u;
        a[i] += h;
        b[i] -= h;
        (f(&a) - f(&b)) / (2.0 * h)
    })
}

fn gauges3() -> Vec<GaugeBody> {
    vec![
        GaugeBody::ball(3, 1.0).unwrap(),
        GaugeBody::ellipsoid(&[vec![2.0, 0.3, 0.0], vec![0.3, 1.0, 0.1], vec![0.0, 0.1, 0.5]]).unwrap(),
        GaugeBody::lp_ball(4.0, &[1.0, 0.8, 1.2]).unwrap(),
        GaugeBody::smoothed_polytope(
            vec![
                v(&[1.0, 0.0, 0.0]),
                v(&[-1.0, 0.0, 0.0]),
                v(&[0.0, 1.0, 0.0]),
                v(&[0.0, -1.0, 0.0]),
                v(&[0.0, 0.0, 1.0]),
                v(&[0.0, 0.0, -1.0]),
            ],
            0.2,
        )
        .unwrap(),
    ]
}

#[test]
fn minkowski_support_against_sampled_sum() {
    let tri = ConvexBody::polytope(vec![v(&[0.0, 0.0]), v(&[1.0, 0.2]), v(&[0.4, 0.9])]).unwrap();
    let disc = ConvexBody::ball(v(&[0.5, -0.5]), 0.7).unwrap();
    let (lambda, mu) = (1.5, 0.4);
    let sum = ConvexBody::minkowski(vec![(lambda, tri.clone()), (mu, disc)]).unwrap();
    // dense sample of the sum: vertex and circle points combined
    let verts = tri.as_polytope().unwrap().vertices().to_vec();
    let circle: Vec<Vector> = (0..4000).map(|i| v(&[0.5, -0.5]) + unit(i as f64 * 1e-3 * std::f64::consts::TAU / 4.0) * 0.7).collect();
    for i in 0..64 {
        let u = unit(0.1 + i as f64 * 0.098);
        let brute = verts
            .iter()
            .flat_map(|a| circle.iter().map(move |b| (*a * lambda + *b * mu).dot(&u)))
            .fold(f64::NEG_INFINITY, f64::max);
        let (h, p) = sum.support(&Direction::from_unit(u));
        assert!((h - brute).abs() < 1e-6, "{h} vs {brute}");
        assert!((p.dot(&u) - h).abs() < 1e-12);
    }
}

#[test]
fn l4_gauge_matches_bisection_on_membership() {
    let e = GaugeBody::lp_ball(4.0, &[1.0, 1.0]).unwrap();
    let w = v(&[1.0, 1.0]);
    assert!((e.gauge(&w) - 2f64.powf(0.25)).abs() < 1e-14);
    // the smallest s with w / s inside: sum |w_i / s|^4 <= 1
    let inside = |s: f64| (w[0] / s).powi(4) + (w[1] / s).powi(4) <= 1.0;
    let (mut lo, mut hi) = (0.5, 2.0);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if inside(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    assert!((e.gauge(&w) - hi).abs() < 1e-12);
}

#[test]
fn reverse_gauss_is_the_support_gradient() {
    for e in gauges3() {
        for u in sphere_directions(3, 50) {
            let x = e.reverse_gauss(&Direction::from_unit(u));
            let fd = fd_gradient(|w| e.support(w), &u, 1e-5);
            assert!((x - fd).norm() < 1e-6, "{:?}: {x:?} vs {fd:?}", e.shape());
            assert!((x.dot(&u) - e.support(&u)).abs() < 1e-12);
            assert!((e.gauge(&x) - 1.0).abs() < 1e-10);
        }
    }
}

#[test]
fn ellipsoid_reverse_gauss_closed_form() {
    let a = [[2.0, 0.3, 0.0], [0.3, 1.0, 0.1], [0.0, 0.1, 0.5]];
    let e = GaugeBody::ellipsoid(&a.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap();
    for u in sphere_directions(3, 20) {
        let au = Vector::from_fn(3, |i| (0..3).map(|j| a[i][j] * u[j]).sum());
        let expected = au * (1.0 / u.dot(&au).sqrt());
        assert!((e.reverse_gauss(&Direction::from_unit(u)) - expected).norm() < 1e-12);
    }
}

#[test]
fn gauss_map_round_trip() {
    let e = GaugeBody::ellipsoid_axes(&[2.0, 1.0]).unwrap();
    let u = v(&[0.6, 0.8]);
    let x = e.reverse_gauss(&Direction::from_unit(u));
    let back = e.gauss_map(&x, 1e-9).unwrap();
    assert!((*back.as_vector() - u).norm() < 1e-8);
    let axis = e.gauss_map(&v(&[2.0, 0.0]), 1e-9).unwrap();
    assert!((*axis.as_vector() - v(&[1.0, 0.0])).norm() < 1e-12);
    assert!(e.gauss_map(&v(&[1.0, 0.0]), 1e-9).is_err());
    for g in gauges3() {
        for u in sphere_directions(3, 30) {
            let x = g.reverse_gauss(&Direction::from_unit(u));
            assert!((*g.gauss_map(&x, 1e-9).unwrap().as_vector() - u).norm() < 1e-7);
        }
    }
}

#[test]
fn membership_examples() {
    let sq = unit_square();
    assert!(sq.contains(&v(&[0.5, 0.5])));
    assert!(!sq.contains(&v(&[1.5, 0.5])));
    let ell = ConvexBody::from_gauge(&GaugeBody::ellipsoid_axes(&[2.0, 1.0]).unwrap(), Vector::zeros(2)).unwrap();
    assert!(ell.contains(&v(&[1.9, 0.2])));
    assert!(!ell.contains(&v(&[1.9, 0.4])));
}

#[test]
fn support_points_lie_in_the_body() {
    let cap = make_tangential_body(&GaugeBody::ball(3, 1.0).unwrap(), &TangentialSpec::Cap { apexes: vec![vec![2.0, 0.0, 0.0]] })
        .unwrap()
        .body;
    let bodies = vec![
        cuboid(&[2.0, 1.0, 1.0]),
        cap,
        ConvexBody::from_gauge(&gauges3()[2], v(&[0.1, 0.2, 0.3])).unwrap(),
        ConvexBody::minkowski(vec![(1.0, cuboid(&[1.0, 1.0, 1.0])), (0.5, ConvexBody::ball(Vector::zeros(3), 1.0).unwrap())]).unwrap(),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for k in &bodies {
        for u in sphere_directions(3, 40) {
            let (h, p) = k.support(&Direction::from_unit(u));
            assert!((p.dot(&u) - h).abs() < 1e-9);
            // nudged slightly inward along a random direction stays inside
            let c = k.center();
            assert!(k.contains(&(p + (c - p) * 1e-6)));
        }
        for _ in 0..200 {
            let x = Vector::from_fn(3, |_| rng.random_range(-2.5..2.5));
            if k.contains(&x) {
                for u in sphere_directions(3, 20) {
                    assert!(x.dot(&u) <= k.support_value(&u) + 1e-9);
                }
            }
        }
    }
}

#[test]
fn spec_round_trip() {
    let text = r#"{"type": "minkowski", "terms": [
        {"coef": 1.0, "body": {"type": "polytope", "vertices": [[0,0],[1,0],[0,1]]}},
        {"coef": 0.5, "body": {"type": "ellipsoid", "matrix": [[4,0],[0,1]]}}
    ]}"#;
    let k = BodySpec::from_json(text).unwrap().to_body().unwrap();
    let u = v(&[1.0, 0.0]);
    assert!((k.support_value(&u) - 2.0).abs() < 1e-12);
    assert!(BodySpec::from_json(r#"{"type": "ball", "center": [0, 0]}"#).is_err());
    assert!(BodySpec::from_json(r#"{"type": "ball", "center": [0, 0], "radius": -1}"#)
        .unwrap()
        .to_body()
        .is_err());
}

fn planar_bodies() -> Vec<ConvexBody> {
    vec![
        ConvexBody::polytope(vec![v(&[0.0, 0.0]), v(&[1.0, 0.2]), v(&[0.4, 0.9])]).unwrap(),
        ConvexBody::ball(v(&[0.3, -0.2]), 0.8).unwrap(),
        ConvexBody::from_gauge(&GaugeBody::lp_ball(4.0, &[1.0, 0.5]).unwrap(), v(&[0.0, 1.0])).unwrap(),
        ConvexBody::hull(ConvexBody::ball(Vector::zeros(2), 1.0).unwrap(), vec![v(&[2.0, 0.5])]).unwrap(),
    ]
}

proptest! {
    #[test]
    fn support_is_homogeneous_and_subadditive(
        a in -10.0..10.0f64, b in -10.0..10.0f64,
        c in -10.0..10.0f64, d in -10.0..10.0f64,
        s in 0.0..20.0f64,
    ) {
        let (x, y) = (v(&[a, b]), v(&[c, d]));
        for k in planar_bodies() {
            let hx = k.support_value(&x);
            prop_assert!((k.support_value(&(x * s)) - s * hx).abs() <= 1e-9 * (1.0 + s * hx.abs()));
            prop_assert!(k.support_value(&(x + y)) <= hx + k.support_value(&y) + 1e-9 * (1.0 + x.norm() + y.norm()));
        }
    }

    #[test]
    fn gauge_is_a_sublinear_function(
        a in -10.0..10.0f64, b in -10.0..10.0f64,
        c in -10.0..10.0f64, d in -10.0..10.0f64,
        s in 0.0..20.0f64,
    ) {
        let (x, y) = (v(&[a, b]), v(&[c, d]));
        for e in common::planar_gauges() {
            let gx = e.gauge(&x);
            prop_assert!(gx >= 0.0);
            prop_assert!((x.norm() > 1e-9) == (gx > 0.0));
            prop_assert!((e.gauge(&(x * s)) - s * gx).abs() <= 1e-9 * (1.0 + s * gx));
            prop_assert!(e.gauge(&(x + y)) <= gx + e.gauge(&y) + 1e-9 * (1.0 + gx + e.gauge(&y)));
            // r_0 B inside E
            if let Some(u) = x.normalized() {
                prop_assert!(e.gauge(&(u * e.inner_radius())) <= 1.0 + 1e-12);
            }
        }
    }
}
