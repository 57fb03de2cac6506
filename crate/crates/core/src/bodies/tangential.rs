//! Bodies that are tangential bodies of a gauge body by construction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::sphere_directions;
use crate::vector::Vector;

use super::{ConvexBody, GaugeBody, Polytope};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TangentialSpec {
    /// `scale * E + shift`.
    Homothet { scale: f64, shift: Option<Vec<f64>> },
    /// `conv(E, apexes)` with apexes outside `E` whose caps do not overlap.
    Cap { apexes: Vec<Vec<f64>> },
    /// Intersection of the supporting halfspaces of `E` with the given normals.
    Circumscribed { normals: Vec<Vec<f64>> },
}

#[derive(Clone, Debug)]
pub struct TangentialBody {
    pub body: ConvexBody,
    /// Nominal tangency order of the construction.
    pub k: usize,
}

pub fn make_tangential_body(e: &GaugeBody, spec: &TangentialSpec) -> Result<TangentialBody> {
    let n = e.dim();
    let vector = |xs: &Vec<f64>| -> Result<Vector> {
        if xs.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: xs.len(),
            });
        }
        Ok(Vector::from_slice(xs))
    };
    match spec {
        TangentialSpec::Homothet { scale, shift } => {
            let shift = match shift {
                Some(s) => vector(s)?,
                None => Vector::zeros(n),
            };
            let body = ConvexBody::from_gauge(&e.scaled(*scale)?, shift)?;
            Ok(TangentialBody { body, k: 0 })
        }
        TangentialSpec::Cap { apexes } => {
            if apexes.is_empty() {
                return Err(Error::InvalidSpec("cap body needs an apex".into()));
            }
            let apexes: Vec<Vector> = apexes.iter().map(vector).collect::<Result<_>>()?;
            for a in &apexes {
                if e.gauge(a) <= 1.0 {
                    return Err(Error::InvalidSpec(format!("apex {a:?} lies in E")));
                }
            }
            // each normal may see at most one apex beyond the support plane
            for u in sphere_directions(n, 4000) {
                let h = e.support(&u);
                if apexes.iter().filter(|a| a.dot(&u) > h).count() > 1 {
                    return Err(Error::InvalidSpec("apex caps overlap".into()));
                }
            }
            let base = ConvexBody::from_gauge(e, Vector::zeros(n))?;
            Ok(TangentialBody {
                body: ConvexBody::hull(base, apexes)?,
                k: 1,
            })
        }
        TangentialSpec::Circumscribed { normals } => {
            let normals: Vec<Vector> = normals
                .iter()
                .map(|u| {
                    vector(u)?
                        .normalized()
                        .ok_or_else(|| Error::InvalidSpec("zero normal".into()))
                })
                .collect::<Result<_>>()?;
            let offsets: Vec<f64> = normals.iter().map(|u| e.support(u)).collect();
            let vertices = vertex_enumeration(&normals, &offsets)?;
            let body = ConvexBody::from_polytope(Polytope::new(vertices)?);
            if (0..n).any(|i| {
                let ei = Vector::basis(n, i);
                body.support_value(&ei) > 1e6 * e.outer_radius()
            }) {
                return Err(Error::InvalidSpec("circumscribed polytope is unbounded".into()));
            }
            Ok(TangentialBody { body, k: n - 1 })
        }
    }
}

/// Vertices of `{x : <x, u_i> <= b_i}` by brute force over n-subsets.
fn vertex_enumeration(normals: &[Vector], offsets: &[f64]) -> Result<Vec<Vector>> {
    let n = normals[0].dim();
    let m = normals.len();
    if m <= n {
        return Err(Error::InvalidSpec("too few halfspaces for a bounded polytope".into()));
    }
    let scale = offsets.iter().fold(0.0f64, |a, b| a.max(b.abs())).max(1.0);
    let mut vertices: Vec<Vector> = Vec::new();
    let mut subset: Vec<usize> = (0..n).collect();
    loop {
        let a = nalgebra::DMatrix::from_fn(n, n, |r, c| normals[subset[r]][c]);
        let b = nalgebra::DVector::from_fn(n, |r, _| offsets[subset[r]]);
        if let Some(sol) = a.lu().solve(&b) {
            let x = Vector::from_fn(n, |i| sol[i]);
            let feasible = x.is_finite()
                && normals
                    .iter()
                    .zip(offsets)
                    .all(|(u, b)| u.dot(&x) <= b + 1e-9 * scale);
            if feasible && !vertices.iter().any(|v| v.distance(&x) < 1e-9 * scale) {
                vertices.push(x);
            }
        }
        // next n-subset in lexicographic order
        let mut i = n;
        while i > 0 && subset[i - 1] == m - n + i - 1 {
            i -= 1;
        }
        if i == 0 {
            break;
        }
        subset[i - 1] += 1;
        for j in i..n {
            subset[j] = subset[j - 1] + 1;
        }
    }
    Ok(vertices)
}
