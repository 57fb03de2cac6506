//! Small fixed-capacity vectors for the hot sampling paths.
//!
//! Every body, gauge and sample in this crate lives in a space of dimension
//! at most [`MAX_DIM`]. Keeping coordinates inline avoids allocating in the
//! inner loops of the distance solver.

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Largest ambient dimension supported.
pub const MAX_DIM: usize = 6;

#[derive(Clone, Copy, PartialEq)]
pub struct Vector {
    dim: usize,
    data: [f64; MAX_DIM],
}

impl Vector {
    pub fn zeros(dim: usize) -> Self {
        assert!(
            (1..=MAX_DIM).contains(&dim),
            "dimension {dim} outside 1..={MAX_DIM}"
        );
        Vector {
            dim,
            data: [0.0; MAX_DIM],
        }
    }

    pub fn from_slice(xs: &[f64]) -> Self {
        let mut v = Vector::zeros(xs.len());
        v.data[..xs.len()].copy_from_slice(xs);
        v
    }

    pub fn basis(dim: usize, i: usize) -> Self {
        let mut v = Vector::zeros(dim);
        v.data[i] = 1.0;
        v
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize) -> f64) -> Self {
        let mut v = Vector::zeros(dim);
        for i in 0..dim {
            v.data[i] = f(i);
        }
        v
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data[..self.dim]
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data[..self.dim]
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.as_slice().to_vec()
    }

    #[inline]
    pub fn dot(&self, other: &Vector) -> f64 {
        debug_assert_eq!(self.dim, other.dim);
        let mut s = 0.0;
        for i in 0..self.dim {
            s += self.data[i] * other.data[i];
        }
        s
    }

    #[inline]
    pub fn norm_squared(&self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(&self) -> f64 {
        self.norm_squared().sqrt()
    }

    /// Returns `self / |self|`, or `None` for the zero vector.
    pub fn normalized(&self) -> Option<Vector> {
        let n = self.norm();
        if n > 0.0 && n.is_finite() {
            Some(*self * (1.0 / n))
        } else {
            None
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.as_slice().iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    pub fn distance(&self, other: &Vector) -> f64 {
        (*self - *other).norm()
    }

    /// `self + t * dir`.
    #[inline]
    pub fn axpy(&self, t: f64, dir: &Vector) -> Vector {
        let mut out = *self;
        for i in 0..self.dim {
            out.data[i] += t * dir.data[i];
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.as_slice().iter().all(|x| x.is_finite())
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> Vector {
        let mut out = *self;
        for x in out.as_mut_slice() {
            *x = f(*x);
        }
        out
    }
}

impl fmt::Debug for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.as_slice()).finish()
    }
}

impl Index<usize> for Vector {
    type Output = f64;
    #[inline]
    fn index(&self, i: usize) -> &f64 {
        debug_assert!(i < self.dim);
        &self.data[i]
    }
}

impl IndexMut<usize> for Vector {
    #[inline]
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        debug_assert!(i < self.dim);
        &mut self.data[i]
    }
}

impl Add for Vector {
    type Output = Vector;
    #[inline]
    fn add(mut self, rhs: Vector) -> Vector {
        self += rhs;
        self
    }
}

impl AddAssign for Vector {
    #[inline]
    fn add_assign(&mut self, rhs: Vector) {
        debug_assert_eq!(self.dim, rhs.dim);
        for i in 0..self.dim {
            self.data[i] += rhs.data[i];
        }
    }
}

impl Sub for Vector {
    type Output = Vector;
    #[inline]
    fn sub(mut self, rhs: Vector) -> Vector {
        self -= rhs;
        self
    }
}

impl SubAssign for Vector {
    #[inline]
    fn sub_assign(&mut self, rhs: Vector) {
        debug_assert_eq!(self.dim, rhs.dim);
        for i in 0..self.dim {
            self.data[i] -= rhs.data[i];
        }
    }
}

impl Mul<f64> for Vector {
    type Output = Vector;
    #[inline]
    fn mul(mut self, s: f64) -> Vector {
        for i in 0..self.dim {
            self.data[i] *= s;
        }
        self
    }
}

impl Mul<Vector> for f64 {
    type Output = Vector;
    #[inline]
    fn mul(self, v: Vector) -> Vector {
        v * self
    }
}

impl Neg for Vector {
    type Output = Vector;
    #[inline]
    fn neg(self) -> Vector {
        self * -1.0
    }
}

impl Serialize for Vector {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.as_slice().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Vector {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let xs = Vec::<f64>::deserialize(d)?;
        if xs.is_empty() || xs.len() > MAX_DIM {
            return Err(serde::de::Error::custom(format!(
                "vector length {} outside 1..={MAX_DIM}",
                xs.len()
            )));
        }
        Ok(Vector::from_slice(&xs))
    }
}

/// Dense symmetric `dim x dim` matrix stored inline, used for ellipsoid gauges.
#[derive(Clone, Copy, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    data: [[f64; MAX_DIM]; MAX_DIM],
}

impl SymMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Option<Self> {
        let dim = rows.len();
        if dim == 0 || dim > MAX_DIM || rows.iter().any(|r| r.len() != dim) {
            return None;
        }
        let mut m = SymMatrix {
            dim,
            data: [[0.0; MAX_DIM]; MAX_DIM],
        };
        for i in 0..dim {
            for j in 0..dim {
                m.data[i][j] = 0.5 * (rows[i][j] + rows[j][i]);
            }
        }
        Some(m)
    }

    pub fn zeros(dim: usize) -> Self {
        SymMatrix {
            dim,
            data: [[0.0; MAX_DIM]; MAX_DIM],
        }
    }

    /// Builds the matrix from `f(i, j)`, read on the upper triangle and mirrored.
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = SymMatrix::zeros(dim);
        for i in 0..dim {
            for j in i..dim {
                let v = f(i, j);
                m.data[i][j] = v;
                m.data[j][i] = v;
            }
        }
        m
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let dim = diag.len();
        let mut m = SymMatrix {
            dim,
            data: [[0.0; MAX_DIM]; MAX_DIM],
        };
        for (i, d) in diag.iter().enumerate() {
            m.data[i][i] = *d;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i][j]
    }

    #[inline]
    pub fn mul_vec(&self, v: &Vector) -> Vector {
        let mut out = Vector::zeros(self.dim);
        for i in 0..self.dim {
            let mut s = 0.0;
            for j in 0..self.dim {
                s += self.data[i][j] * v[j];
            }
            out[i] = s;
        }
        out
    }

    /// `v^T M v`.
    #[inline]
    pub fn quad(&self, v: &Vector) -> f64 {
        self.mul_vec(v).dot(v)
    }

    /// `self + s * v v^T`.
    pub fn add_outer(&self, s: f64, v: &Vector) -> Self {
        let mut m = *self;
        for i in 0..self.dim {
            for j in 0..self.dim {
                m.data[i][j] += s * v[i] * v[j];
            }
        }
        m
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut m = *self;
        for i in 0..self.dim {
            for j in 0..self.dim {
                m.data[i][j] *= s;
            }
        }
        m
    }

    pub fn to_nalgebra(&self) -> nalgebra::DMatrix<f64> {
        nalgebra::DMatrix::from_fn(self.dim, self.dim, |i, j| self.data[i][j])
    }

    pub fn from_nalgebra(m: &nalgebra::DMatrix<f64>) -> Self {
        let rows: Vec<Vec<f64>> = (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
            .collect();
        SymMatrix::from_rows(&rows).expect("square matrix")
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim)
            .map(|i| self.data[i][..self.dim].to_vec())
            .collect()
    }
}

impl fmt::Debug for SymMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.rows()).finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic() {
        let a = Vector::from_slice(&[1.0, 2.0, 2.0]);
        let b = Vector::from_slice(&[0.5, 0.0, -1.0]);
        assert_eq!((a + b).to_vec(), vec![1.5, 2.0, 1.0]);
        assert_eq!((a - b).to_vec(), vec![0.5, 2.0, 3.0]);
        assert_eq!(a.norm(), 3.0);
        assert_eq!(a.dot(&b), -1.5);
        assert_eq!(a.axpy(2.0, &b).to_vec(), vec![2.0, 2.0, 0.0]);
        assert!(Vector::zeros(2).normalized().is_none());
    }

    #[test]
    fn sym_matrix_quadratic_form() {
        let m = SymMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 3.0]]).unwrap();
        let v = Vector::from_slice(&[1.0, -1.0]);
        assert_eq!(m.quad(&v), 2.0 - 2.0 + 3.0);
    }
}
