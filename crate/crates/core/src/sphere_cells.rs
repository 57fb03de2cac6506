//! Deterministic partitions of the unit sphere into quasi-uniform cells:
//! equal arcs of the circle, and in space the regular subdivision of the
//! octahedron faces pushed radially onto the sphere.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::vector::Vector;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SphereCells {
    /// `m` arcs; arc `c` spans angles `[offset + c w, offset + (c + 1) w)`,
    /// `w = 2 pi / m`.
    Arcs { m: usize, offset: f64 },
    /// Each octant face split into `4^level` triangles.
    Octahedral { level: u32 },
}

/// Flat triangle on an octahedron face, vertices in `|x|_1 = 1`.
pub type FlatTriangle = [Vector; 3];

impl SphereCells {
    /// `m` arcs centered on the directions at angles `2 pi c / m`.
    pub fn arcs(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidSpec("need at least one arc".into()));
        }
        Ok(SphereCells::Arcs {
            m,
            offset: -PI / m as f64,
        })
    }

    pub fn octahedral(level: u32) -> Result<Self> {
        if level > 8 {
            return Err(Error::InvalidSpec("subdivision level above 8".into()));
        }
        Ok(SphereCells::Octahedral { level })
    }

    /// The default complex: 256 arcs in the plane, 512 triangles in space.
    pub fn default_for(dim: usize) -> Result<Self> {
        match dim {
            2 => SphereCells::arcs(256),
            3 => SphereCells::octahedral(3),
            _ => Err(Error::Unsupported(format!("sphere cells in dimension {dim}"))),
        }
    }

    /// Complex with `count` cells: any count in the plane, `8 * 4^L` in space.
    pub fn with_count(dim: usize, count: usize) -> Result<Self> {
        match dim {
            2 => SphereCells::arcs(count),
            3 => (0..=8u32)
                .find(|l| 8 * 4usize.pow(*l) == count)
                .map(|l| SphereCells::Octahedral { level: l })
                .ok_or_else(|| {
                    Error::InvalidSpec(format!("{count} cells is not 8 * 4^L in dimension 3"))
                }),
            _ => Err(Error::Unsupported(format!("sphere cells in dimension {dim}"))),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            SphereCells::Arcs { .. } => 2,
            SphereCells::Octahedral { .. } => 3,
        }
    }

    pub fn count(&self) -> usize {
        match self {
            SphereCells::Arcs { m, .. } => *m,
            SphereCells::Octahedral { level } => 8 * 4usize.pow(*level),
        }
    }

    /// The next finer complex; its cells nest in ours.
    pub fn refined(&self) -> Self {
        match self {
            SphereCells::Arcs { m, offset } => SphereCells::Arcs {
                m: 2 * m,
                offset: *offset,
            },
            SphereCells::Octahedral { level } => SphereCells::Octahedral { level: level + 1 },
        }
    }

    /// Cell containing the direction of `u` (need not be normalized).
    pub fn locate(&self, u: &Vector) -> usize {
        match self {
            SphereCells::Arcs { m, offset } => {
                let w = 2.0 * PI / *m as f64;
                let t = (u[1].atan2(u[0]) - offset).rem_euclid(2.0 * PI);
                ((t / w).floor() as usize).min(m - 1)
            }
            SphereCells::Octahedral { level } => {
                let s = 1usize << level;
                let l1 = u[0].abs() + u[1].abs() + u[2].abs();
                let face = (u[0] < 0.0) as usize | ((u[1] < 0.0) as usize) << 1 | ((u[2] < 0.0) as usize) << 2;
                let a = u[0].abs() / l1 * s as f64;
                let b = u[1].abs() / l1 * s as f64;
                let i = (a.floor() as usize).min(s - 1);
                let j = (b.floor() as usize).min(s - 1 - i);
                let down = i + j + 1 < s && (a - i as f64) + (b - j as f64) > 1.0;
                face * s * s + i * (2 * s - i) + 2 * j + down as usize
            }
        }
    }

    /// Angular extent `[start, end)` of an arc cell.
    pub fn arc_bounds(&self, c: usize) -> Option<(f64, f64)> {
        match self {
            SphereCells::Arcs { m, offset } => {
                let w = 2.0 * PI / *m as f64;
                Some((offset + c as f64 * w, offset + (c + 1) as f64 * w))
            }
            _ => None,
        }
    }

    /// Flat triangle of an octahedral cell, before radial projection.
    pub fn triangle(&self, c: usize) -> Option<FlatTriangle> {
        let SphereCells::Octahedral { level } = self else {
            return None;
        };
        let s = 1usize << level;
        let face = c / (s * s);
        let mut local = c % (s * s);
        let mut i = 0;
        while local >= 2 * (s - i) - 1 {
            local -= 2 * (s - i) - 1;
            i += 1;
        }
        let (j, down) = (local / 2, local % 2 == 1);
        let sign = |k: usize| if face >> k & 1 == 1 { -1.0 } else { 1.0 };
        let point = |a: usize, b: usize| {
            let (a, b) = (a as f64 / s as f64, b as f64 / s as f64);
            Vector::from_slice(&[sign(0) * a, sign(1) * b, sign(2) * (1.0 - a - b)])
        };
        Some(if down {
            [point(i + 1, j), point(i + 1, j + 1), point(i, j + 1)]
        } else {
            [point(i, j), point(i + 1, j), point(i, j + 1)]
        })
    }

    /// Representative unit direction inside the cell.
    pub fn representative(&self, c: usize) -> Vector {
        match self {
            SphereCells::Arcs { .. } => {
                let (a, b) = self.arc_bounds(c).unwrap();
                let t = 0.5 * (a + b);
                Vector::from_slice(&[t.cos(), t.sin()])
            }
            SphereCells::Octahedral { .. } => {
                let [a, b, d] = self.triangle(c).unwrap();
                ((a + b + d) * (1.0 / 3.0)).normalized().unwrap()
            }
        }
    }

    /// Spherical measure of the cell.
    pub fn area(&self, c: usize) -> f64 {
        match self {
            SphereCells::Arcs { m, .. } => 2.0 * PI / *m as f64,
            SphereCells::Octahedral { .. } => {
                let [a, b, d] = self.triangle(c).unwrap();
                spherical_triangle_area(
                    &a.normalized().unwrap(),
                    &b.normalized().unwrap(),
                    &d.normalized().unwrap(),
                )
            }
        }
    }

    /// For every cell of `fine`, the cell of `self` containing it.
    pub fn parent_map(&self, fine: &SphereCells) -> Vec<usize> {
        (0..fine.count())
            .map(|c| self.locate(&fine.representative(c)))
            .collect()
    }
}

/// Area of the spherical triangle with unit vertices `a, b, c`.
pub fn spherical_triangle_area(a: &Vector, b: &Vector, c: &Vector) -> f64 {
    let triple = a[0] * (b[1] * c[2] - b[2] * c[1]) - a[1] * (b[0] * c[2] - b[2] * c[0])
        + a[2] * (b[0] * c[1] - b[1] * c[0]);
    let denom = 1.0 + a.dot(b) + b.dot(c) + c.dot(a);
    2.0 * triple.abs().atan2(denom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::sphere_directions;

    #[test]
    fn arcs_center_cardinal_directions() {
        let cells = SphereCells::arcs(256).unwrap();
        for (k, u) in [[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]].iter().enumerate() {
            let c = cells.locate(&Vector::from_slice(u));
            assert_eq!(c, 64 * k);
            assert!((cells.representative(c) - Vector::from_slice(u)).norm() < 1e-12);
        }
    }

    #[test]
    fn octahedral_cells_partition_the_sphere() {
        for level in 0..4 {
            let cells = SphereCells::octahedral(level).unwrap();
            let total: f64 = (0..cells.count()).map(|c| cells.area(c)).sum();
            assert!((total - 4.0 * PI).abs() < 1e-10, "level {level}");
            for c in 0..cells.count() {
                assert_eq!(cells.locate(&cells.representative(c)), c);
            }
        }
    }

    #[test]
    fn location_matches_cell_areas() {
        let cells = SphereCells::octahedral(2).unwrap();
        let dirs = sphere_directions(3, 400_000);
        let mut hits = vec![0usize; cells.count()];
        for u in &dirs {
            hits[cells.locate(u)] += 1;
        }
        for c in 0..cells.count() {
            let expected = cells.area(c) / (4.0 * PI) * dirs.len() as f64;
            assert!((hits[c] as f64 - expected).abs() < 0.05 * expected, "cell {c}");
        }
    }

    #[test]
    fn refinement_nests() {
        for coarse in [SphereCells::arcs(16).unwrap(), SphereCells::octahedral(1).unwrap()] {
            let fine = coarse.refined();
            let parents = coarse.parent_map(&fine);
            let mut area = vec![0.0; coarse.count()];
            for (f, p) in parents.iter().enumerate() {
                area[*p] += fine.area(f);
            }
            for c in 0..coarse.count() {
                assert!((area[c] - coarse.area(c)).abs() < 1e-12);
            }
        }
    }
}
