//! JSON body and gauge descriptions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vector::Vector;

use super::{ConvexBody, GaugeBody};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum BodySpec {
    Polytope {
        vertices: Vec<Vec<f64>>,
    },
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    /// `h(u) = <center, u> + sqrt(u^T A u)`.
    Ellipsoid {
        matrix: Vec<Vec<f64>>,
        #[serde(default)]
        center: Option<Vec<f64>>,
    },
    LpBall {
        p: f64,
        scales: Vec<f64>,
        #[serde(default)]
        center: Option<Vec<f64>>,
    },
    SmoothedPolytope {
        vertices: Vec<Vec<f64>>,
        epsilon: f64,
    },
    Hull {
        base: Box<BodySpec>,
        points: Vec<Vec<f64>>,
    },
    Minkowski {
        terms: Vec<TermSpec>,
    },
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub coef: f64,
    pub body: BodySpec,
}

fn vector(xs: &[f64]) -> Result<Vector> {
    if xs.is_empty() || xs.len() > crate::vector::MAX_DIM {
        return Err(Error::InvalidSpec(format!(
            "coordinate list of length {} unsupported",
            xs.len()
        )));
    }
    Ok(Vector::from_slice(xs))
}

fn vectors(xs: &[Vec<f64>]) -> Result<Vec<Vector>> {
    xs.iter().map(|x| vector(x)).collect()
}

fn center_or_zero(center: &Option<Vec<f64>>, dim: usize) -> Result<Vector> {
    match center {
        Some(c) if c.len() != dim => Err(Error::DimensionMismatch {
            expected: dim,
            got: c.len(),
        }),
        Some(c) => vector(c),
        None => Ok(Vector::zeros(dim)),
    }
}

impl BodySpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidSpec(e.to_string()))
    }

    pub fn to_body(&self) -> Result<ConvexBody> {
        match self {
            BodySpec::Polytope { vertices } => ConvexBody::polytope(vectors(vertices)?),
            BodySpec::Ball { center, radius } => ConvexBody::ball(vector(center)?, *radius),
            BodySpec::Ellipsoid { .. }
            | BodySpec::LpBall { .. }
            | BodySpec::SmoothedPolytope { .. } => {
                let g = self.to_gauge_uncentered()?;
                let center = match self {
                    BodySpec::Ellipsoid { center, .. } | BodySpec::LpBall { center, .. } => {
                        center_or_zero(center, g.dim())?
                    }
                    _ => Vector::zeros(g.dim()),
                };
                ConvexBody::from_gauge(&g, center)
            }
            BodySpec::Hull { base, points } => ConvexBody::hull(base.to_body()?, vectors(points)?),
            BodySpec::Minkowski { terms } => ConvexBody::minkowski(
                terms
                    .iter()
                    .map(|t| Ok((t.coef, t.body.to_body()?)))
                    .collect::<Result<_>>()?,
            ),
        }
    }

    /// Interprets the description as a gauge body: the origin must be its
    /// center (balls, ellipsoids, lp balls) or interior (smoothed polytopes).
    pub fn to_gauge(&self) -> Result<GaugeBody> {
        match self {
            BodySpec::Ball { center, .. }
            | BodySpec::Ellipsoid {
                center: Some(center),
                ..
            }
            | BodySpec::LpBall {
                center: Some(center),
                ..
            } if center.iter().any(|c| *c != 0.0) => Err(Error::InvalidSpec(
                "gauge bodies must be centered at the origin".into(),
            )),
            _ => self.to_gauge_uncentered(),
        }
    }

    fn to_gauge_uncentered(&self) -> Result<GaugeBody> {
        match self {
            BodySpec::Ball { center, radius } => GaugeBody::ball(center.len(), *radius),
            BodySpec::Ellipsoid { matrix, .. } => GaugeBody::ellipsoid(matrix),
            BodySpec::LpBall { p, scales, .. } => GaugeBody::lp_ball(*p, scales),
            BodySpec::SmoothedPolytope { vertices, epsilon } => {
                GaugeBody::smoothed_polytope(vectors(vertices)?, *epsilon)
            }
            _ => Err(Error::InvalidSpec(
                "gauge must be a ball, ellipsoid, lp_ball or smoothed_polytope".into(),
            )),
        }
    }
}
