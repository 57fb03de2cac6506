//! Anisotropic convex geometry relative to a gauge body.
//!
//! Distances, projections and parallel bodies measured with the gauge of a
//! smooth, strictly convex body `E`; area, support and curvature measures of
//! a convex body `K` relative to `E`; mixed volumes `V(K[j], E[n-j])` from
//! Steiner polynomials; and the relative curvature of smooth pairs.

pub mod bodies;
mod dual;
pub mod error;
pub mod exact_oracles;
pub mod fw;
pub mod gauge_metric;
pub mod mixed_volumes;
pub mod numeric;
pub mod parallel_measures;
pub mod sampling;
pub mod smooth_relgeo;
pub mod sphere_cells;
pub mod vector;

pub use bodies::{ConvexBody, Direction, GaugeBody};
pub use error::{Error, Result};
pub use vector::Vector;
