#![allow(dead_code)]

use rand::Rng;
use relconvex::{ConvexBody, GaugeBody, Vector};

pub fn v(xs: &[f64]) -> Vector {
    Vector::from_slice(xs)
}

/// `[0, s_1] x .. x [0, s_n]`.
pub fn cuboid(sides: &[f64]) -> ConvexBody {
    let n = sides.len();
    let corners = (0..1usize << n)
        .map(|m| Vector::from_fn(n, |i| if m >> i & 1 == 1 { sides[i] } else { 0.0 }))
        .collect();
    ConvexBody::polytope(corners).unwrap()
}

pub fn unit_square() -> ConvexBody {
    cuboid(&[1.0, 1.0])
}

/// Convex hull of `count` random points on a jittered circle.
pub fn random_polygon(rng: &mut impl Rng, count: usize) -> Vec<Vector> {
    let mut angles: Vec<f64> = (0..count).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
    angles.sort_by(f64::total_cmp);
    angles
        .iter()
        .map(|t| {
            let r = rng.random_range(0.6..1.0);
            v(&[r * t.cos() + 0.2, r * t.sin() - 0.1])
        })
        .collect()
}

/// Ball, ellipse and l4 gauges in the plane.
pub fn planar_gauges() -> Vec<GaugeBody> {
    vec![
        GaugeBody::ball(2, 1.0).unwrap(),
        GaugeBody::ellipsoid_axes(&[2.0, 1.0]).unwrap(),
        GaugeBody::lp_ball(4.0, &[1.0, 1.0]).unwrap(),
    ]
}

pub fn within(est: f64, exact: f64, sd: f64, k: f64) -> bool {
    (est - exact).abs() <= k * sd
}
