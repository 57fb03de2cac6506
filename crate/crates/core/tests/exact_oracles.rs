mod common;

use std::f64::consts::PI;

use common::{cuboid, v};
use relconvex::bodies::{make_tangential_body, Polytope, TangentialSpec};
use relconvex::exact_oracles::*;
use relconvex::mixed_volumes::volume;
use relconvex::parallel_measures::SamplingOptions;
use relconvex::sphere_cells::SphereCells;
use relconvex::{ConvexBody, GaugeBody, Vector};

fn regular(m: usize, r: f64) -> Polytope {
    Polytope::new((0..m).map(|i| {
        let t = 2.0 * PI * i as f64 / m as f64 + 0.1;
        v(&[r * t.cos(), r * t.sin()])
    }).collect())
    .unwrap()
}

#[test]
fn regular_polygons_have_equal_atoms() {
    let cells = SphereCells::arcs(256).unwrap();
    for m in [3, 5, 12, 40] {
        let p = regular(m, 1.3);
        let s = polygon_area_measure(&p, &cells).unwrap();
        let perimeter = 2.0 * m as f64 * 1.3 * (PI / m as f64).sin();
        assert!((s.total - perimeter).abs() < 1e-12);
        let atoms: Vec<f64> = s.masses.iter().copied().filter(|&x| x > 0.0).collect();
        assert_eq!(atoms.len(), m);
        assert!(atoms.iter().all(|a| (a - perimeter / m as f64).abs() < 1e-12));
    }
}

#[test]
fn parallel_area_examples() {
    let sq = Polytope::axis_box(&[0.0, 0.0], &[1.0, 1.0]).unwrap();
    assert!((planar_parallel_area(&sq, 1.0).unwrap() - (5.0 + PI)).abs() < 1e-12);
    assert!((planar_parallel_area(&sq, 0.0).unwrap() - 1.0).abs() < 1e-15);
    let tri = Polytope::new(vec![v(&[0.0, 0.0]), v(&[1.0, 0.0]), v(&[0.0, 1.0])]).unwrap();
    let expected = 0.5 + (2.0 + 2f64.sqrt()) * 0.5 + PI / 4.0;
    assert!((planar_parallel_area(&tri, 0.5).unwrap() - expected).abs() < 1e-12);
    assert!(planar_parallel_area(&tri, -0.1).is_err());
}

#[test]
fn cap_body_volume_against_sampling() {
    let k = make_tangential_body(&GaugeBody::ball(3, 1.0).unwrap(), &TangentialSpec::Cap { apexes: vec![vec![2.0, 0.0, 0.0]] })
        .unwrap()
        .body;
    let est = volume(&k, &SamplingOptions::new(2_000_000, 1)).unwrap();
    let exact = cap_body_mixed_volumes()[3];
    assert!((exact - 1.5 * PI).abs() < 1e-12);
    assert!((est.value - exact).abs() < 3.0 * est.stderr, "{est:?} vs {exact}");
}

#[test]
fn box_oracles_agree_with_each_other() {
    let sides = [2.0, 1.0, 0.5];
    let v = box_mixed_volumes(&sides).unwrap();
    // vol(box + t B) = sum_j C(3, j) t^(3-j) V_j
    for t in [0.0, 0.3, 1.7] {
        let steiner = v[3] + 3.0 * t * v[2] + 3.0 * t * t * v[1] + t.powi(3) * v[0];
        assert!((box_parallel_volume(&sides, t).unwrap() - steiner).abs() < 1e-12);
    }
    assert!((ellipsoid_volume(&[1.0, 1.0, 1.0]).unwrap() - ball_volume(3, 1.0).unwrap()).abs() < 1e-15);
}

#[test]
fn grid_oracle_is_an_upper_bound_converging_down() {
    let k = ConvexBody::from_polytope(regular(7, 0.8));
    let e = GaugeBody::lp_ball(4.0, &[1.0, 0.6]).unwrap();
    let x = v(&[1.4, 0.9]);
    let exact = relconvex::gauge_metric::e_distance(&k, &e, &x, 1e-12).unwrap().d;
    let coarse = grid_gauge_distance(&k, &e, &x, 200).unwrap();
    let fine = grid_gauge_distance(&k, &e, &x, 2000).unwrap();
    assert!(coarse >= exact - 1e-12 && fine >= exact - 1e-12);
    assert!(fine - exact <= coarse - exact + 1e-12);
    assert!(fine - exact < 1e-4);
    assert_eq!(grid_gauge_distance(&k, &e, &Vector::zeros(2), 500).unwrap(), 0.0);
    assert!(grid_gauge_distance(&cuboid(&[1.0, 1.0, 1.0, 1.0]), &GaugeBody::ball(4, 1.0).unwrap(), &Vector::zeros(4), 10).is_err());
}
