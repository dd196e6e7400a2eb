//! Dense symmetric-matrix helpers sized for a handful of coefficients.

use serde::{Deserialize, Serialize};

use crate::error::{CvmError, Result};
use crate::scalar::Scalar;

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "Vec<Vec<T>>", try_from = "Vec<Vec<T>>")]
#[serde(bound = "T: Scalar")]
pub struct SquareMatrix<T> {
    dim: usize,
    data: Vec<T>,
}

impl<T: Scalar> SquareMatrix<T> {
    pub fn zeros(dim: usize) -> Self {
        SquareMatrix {
            dim,
            data: vec![T::zero(); dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let dim = rows.len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(CvmError::InvalidArgument("matrix rows must be square".into()));
        }
        Ok(SquareMatrix {
            dim,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.dim).map(|i| self[(i, i)]).collect()
    }

    pub fn rows(&self) -> Vec<Vec<T>> {
        self.data
            .chunks(self.dim.max(1))
            .map(<[T]>::to_vec)
            .take(self.dim)
            .collect()
    }

    pub fn scaled(&self, k: T) -> Self {
        SquareMatrix {
            dim: self.dim,
            data: self.data.iter().map(|&x| x * k).collect(),
        }
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self[(i, j)] * v[j]).sum())
            .collect()
    }

    /// `vᵀ M v`.
    pub fn quad_form(&self, v: &[T]) -> T {
        v.iter().zip(self.mul_vec(v)).map(|(&a, b)| a * b).sum()
    }

    pub fn submatrix(&self, idx: &[usize]) -> Self {
        let mut m = Self::zeros(idx.len());
        for (r, &i) in idx.iter().enumerate() {
            for (c, &j) in idx.iter().enumerate() {
                m[(r, c)] = self[(i, j)];
            }
        }
        m
    }

    pub fn max_asymmetry(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.dim {
            for j in 0..i {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }

    pub fn symmetrize(&mut self) {
        let half = T::lit(0.5);
        for i in 0..self.dim {
            for j in 0..i {
                let v = (self[(i, j)] + self[(j, i)]) * half;
                self[(i, j)] = v;
                self[(j, i)] = v;
            }
        }
    }

    /// Lower Cholesky factor; fails unless the matrix is positive definite.
    pub fn cholesky(&self) -> Result<LowerTriangular<T>> {
        let n = self.dim;
        let mut l = Self::zeros(n);
        for j in 0..n {
            let mut d = self[(j, j)];
            for k in 0..j {
                d = d - l[(j, k)] * l[(j, k)];
            }
            if !(d > T::zero()) || !d.is_finite() {
                return Err(CvmError::NotPositiveDefinite(format!(
                    "non-positive pivot {} at column {j}",
                    d.to_f64_lossy()
                )));
            }
            let d = d.sqrt();
            l[(j, j)] = d;
            for i in (j + 1)..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s = s - l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / d;
            }
        }
        Ok(LowerTriangular(l))
    }

    /// Cholesky factor of a positive semi-definite matrix. Pivots within
    /// `tol · max diag` of zero are treated as exact zeros; clearly negative
    /// pivots are an error.
    pub fn psd_cholesky(&self, tol: T) -> Result<LowerTriangular<T>> {
        let n = self.dim;
        let scale = self.diagonal().into_iter().fold(T::zero(), |m, x| m.max(x.abs()));
        let cutoff = tol * scale;
        let mut l = Self::zeros(n);
        for j in 0..n {
            let mut d = self[(j, j)];
            for k in 0..j {
                d = d - l[(j, k)] * l[(j, k)];
            }
            if !d.is_finite() || d < -cutoff {
                return Err(CvmError::NotPositiveDefinite(format!(
                    "negative pivot {} at column {j}",
                    d.to_f64_lossy()
                )));
            }
            if d <= cutoff {
                continue;
            }
            let d = d.sqrt();
            l[(j, j)] = d;
            for i in (j + 1)..n {
                let mut s = self[(i, j)];
                for k in 0..j {
                    s = s - l[(i, k)] * l[(j, k)];
                }
                l[(i, j)] = s / d;
            }
        }
        Ok(LowerTriangular(l))
    }

    pub fn inverse_spd(&self) -> Result<Self> {
        let l = self.cholesky()?;
        let n = self.dim;
        let mut inv = Self::zeros(n);
        let mut e = vec![T::zero(); n];
        for j in 0..n {
            e.iter_mut().for_each(|x| *x = T::zero());
            e[j] = T::one();
            let col = l.solve(&e);
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        inv.symmetrize();
        Ok(inv)
    }
}

impl<T> std::ops::Index<(usize, usize)> for SquareMatrix<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.dim + j]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for SquareMatrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.dim + j]
    }
}

impl<T: Scalar> From<SquareMatrix<T>> for Vec<Vec<T>> {
    fn from(m: SquareMatrix<T>) -> Self {
        m.rows()
    }
}

impl<T: Scalar> TryFrom<Vec<Vec<T>>> for SquareMatrix<T> {
    type Error = CvmError;
    fn try_from(rows: Vec<Vec<T>>) -> Result<Self> {
        SquareMatrix::from_rows(&rows)
    }
}

/// Lower-triangular Cholesky factor `L` with `L Lᵀ = A`.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerTriangular<T>(SquareMatrix<T>);

impl<T: Scalar> LowerTriangular<T> {
    /// `L z`, used to colour a vector of standard normals.
    pub fn mul_vec(&self, z: &[T]) -> Vec<T> {
        let m = &self.0;
        (0..m.dim).map(|i| (0..=i).map(|k| m[(i, k)] * z[k]).sum()).collect()
    }

    /// Solves `L Lᵀ x = b`.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let m = &self.0;
        let n = m.dim;
        let mut y = vec![T::zero(); n];
        for i in 0..n {
            let mut s = b[i];
            for k in 0..i {
                s = s - m[(i, k)] * y[k];
            }
            y[i] = s / m[(i, i)];
        }
        let mut x = vec![T::zero(); n];
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in (i + 1)..n {
                s = s - m[(k, i)] * x[k];
            }
            x[i] = s / m[(i, i)];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd3() -> SquareMatrix<f64> {
        SquareMatrix::from_rows(&[vec![4.0, 2.0, 0.4], vec![2.0, 3.0, 0.5], vec![0.4, 0.5, 2.0]]).unwrap()
    }

    #[test]
    fn inverse_times_matrix_is_identity() {
        let a = spd3();
        let inv = a.inverse_spd().unwrap();
        for j in 0..3 {
            let col: Vec<f64> = (0..3).map(|i| inv[(i, j)]).collect();
            let e = a.mul_vec(&col);
            for (i, v) in e.iter().enumerate() {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((v - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let m = SquareMatrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert!(m.cholesky().is_err());
        assert!(m.psd_cholesky(1e-12).is_err());
    }

    #[test]
    fn psd_cholesky_accepts_zero_matrix() {
        let z = SquareMatrix::<f64>::zeros(2);
        let l = z.psd_cholesky(1e-12).unwrap();
        assert_eq!(l.mul_vec(&[1.0, -3.0]), vec![0.0, 0.0]);
    }

    #[test]
    fn factor_reproduces_matrix() {
        let a = spd3();
        let l = a.cholesky().unwrap();
        // columns of L Lᵀ via unit vectors
        for j in 0..3 {
            let mut e = vec![0.0; 3];
            e[j] = 1.0;
            let x = l.solve(&a.mul_vec(&e));
            for (i, v) in x.iter().enumerate() {
                assert!((v - e[i]).abs() < 1e-12);
            }
        }
    }
}
