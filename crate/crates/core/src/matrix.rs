//! Minimal dense row-major matrix with an LU solver.
//!
//! The chains handled here have a few dozen states at most, so a direct
//! dense factorization with partial pivoting is the right tool; no sparse
//! machinery, no BLAS.

use std::ops::{Index, IndexMut};

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, PartialEq)]
pub enum MatrixError {
    #[error("matrix is numerically singular (reciprocal condition estimate {rcond:.3e})")]
    Singular { rcond: f64 },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    /// Builds a matrix from equally long rows. Panics on ragged input;
    /// callers validate shapes before handing data over.
    pub fn from_rows(rows: Vec<Vec<T>>) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        assert!(
            rows.iter().all(|r| r.len() == ncols),
            "all rows must have the same length"
        );
        Matrix {
            rows: nrows,
            cols: ncols,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn n_cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn rows_iter(&self) -> impl Iterator<Item = &[T]> {
        self.data.chunks_exact(self.cols)
    }

    pub fn mul(&self, rhs: &Matrix<T>) -> Matrix<T> {
        assert_eq!(self.cols, rhs.rows, "inner dimensions must agree");
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == T::zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    out[(i, j)] = out[(i, j)] + a * rhs[(k, j)];
                }
            }
        }
        out
    }

    pub fn sub(&self, rhs: &Matrix<T>) -> Matrix<T> {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        let data = self
            .data
            .iter()
            .zip(&rhs.data)
            .map(|(&a, &b)| a - b)
            .collect();
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }

    /// Largest absolute entry.
    pub fn max_norm(&self) -> T {
        self.data
            .iter()
            .map(|v| v.abs())
            .fold(T::zero(), |a, b| a.max(b))
    }

    /// Maximum absolute row sum (operator infinity norm).
    pub fn inf_norm(&self) -> T {
        self.rows_iter()
            .map(|r| r.iter().map(|v| v.abs()).sum::<T>())
            .fold(T::zero(), |a, b| a.max(b))
    }

    /// LU factorization with partial pivoting (Doolittle, packed storage).
    ///
    /// Returns the packed factors and the row permutation, or `Singular`
    /// when a pivot column vanishes entirely.
    fn lu_factor(&self) -> Result<(Matrix<T>, Vec<usize>), MatrixError> {
        if self.rows != self.cols {
            return Err(MatrixError::Dimension(format!(
                "LU factorization requires a square matrix, got {}x{}",
                self.rows, self.cols
            )));
        }
        let n = self.rows;
        let mut lu = self.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            // pivot: largest magnitude in column k at or below the diagonal
            let mut pivot_row = k;
            let mut pivot_mag = lu[(k, k)].abs();
            for i in k + 1..n {
                let mag = lu[(i, k)].abs();
                if mag > pivot_mag {
                    pivot_mag = mag;
                    pivot_row = i;
                }
            }
            if pivot_mag == T::zero() {
                return Err(MatrixError::Singular { rcond: 0.0 });
            }
            if pivot_row != k {
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(pivot_row, j)];
                    lu[(pivot_row, j)] = tmp;
                }
                perm.swap(k, pivot_row);
            }
            let pivot = lu[(k, k)];
            for i in k + 1..n {
                let factor = lu[(i, k)] / pivot;
                lu[(i, k)] = factor;
                for j in k + 1..n {
                    lu[(i, j)] = lu[(i, j)] - factor * lu[(k, j)];
                }
            }
        }
        Ok((lu, perm))
    }

    /// Inverse via the LU factors, solving one unit column at a time.
    ///
    /// `rcond_floor` rejects matrices whose reciprocal condition estimate
    /// `1 / (‖A‖∞ · ‖A⁻¹‖∞)` falls below it.
    pub fn inverse(&self, rcond_floor: f64) -> Result<Matrix<T>, MatrixError> {
        let n = self.rows;
        let (lu, perm) = self.lu_factor()?;
        let mut inv = Matrix::zeros(n, n);
        let mut col = vec![T::zero(); n];
        for j in 0..n {
            for v in col.iter_mut() {
                *v = T::zero();
            }
            // permuted unit vector e_j
            for (i, &p) in perm.iter().enumerate() {
                if p == j {
                    col[i] = T::one();
                }
            }
            // forward substitution (L has implicit unit diagonal)
            for i in 1..n {
                let mut sum = col[i];
                for k in 0..i {
                    sum = sum - lu[(i, k)] * col[k];
                }
                col[i] = sum;
            }
            // back substitution
            for i in (0..n).rev() {
                let mut sum = col[i];
                for k in i + 1..n {
                    sum = sum - lu[(i, k)] * col[k];
                }
                col[i] = sum / lu[(i, i)];
            }
            for i in 0..n {
                inv[(i, j)] = col[i];
            }
        }
        let rcond = (T::one() / (self.inf_norm() * inv.inf_norm())).to_f64_lossy();
        if !rcond.is_finite() || rcond < rcond_floor {
            return Err(MatrixError::Singular { rcond });
        }
        Ok(inv)
    }
}

/// Row vector times matrix.
pub fn vec_mul<T: Scalar>(v: &[T], m: &Matrix<T>) -> Vec<T> {
    assert_eq!(v.len(), m.n_rows(), "vector length must match row count");
    let mut out = vec![T::zero(); m.n_cols()];
    for (i, &vi) in v.iter().enumerate() {
        if vi == T::zero() {
            continue;
        }
        for (j, o) in out.iter_mut().enumerate() {
            *o = *o + vi * m[(i, j)];
        }
    }
    out
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;

    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn identity_inverse_is_identity() {
        let id = Matrix::<f64>::identity(5);
        let inv = id.inverse(1e-12).unwrap();
        assert_eq!(inv, id);
    }

    #[test]
    fn inverse_of_known_2x2() {
        // [[4, 7], [2, 6]] has inverse [[0.6, -0.7], [-0.2, 0.4]]
        let m = Matrix::from_rows(vec![vec![4.0, 7.0], vec![2.0, 6.0]]);
        let inv = m.inverse(1e-12).unwrap();
        assert_abs_diff_eq!(inv[(0, 0)], 0.6, epsilon = 1e-14);
        assert_abs_diff_eq!(inv[(0, 1)], -0.7, epsilon = 1e-14);
        assert_abs_diff_eq!(inv[(1, 0)], -0.2, epsilon = 1e-14);
        assert_abs_diff_eq!(inv[(1, 1)], 0.4, epsilon = 1e-14);
    }

    #[test]
    fn inverse_residual_is_tiny() {
        // deterministic pseudo-random diagonally dominant matrix
        let n = 12;
        let mut m = Matrix::<f64>::zeros(n, n);
        let mut state = 0x9e3779b97f4a7c15u64;
        for i in 0..n {
            for j in 0..n {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let r = (state >> 11) as f64 / (1u64 << 53) as f64;
                m[(i, j)] = r - 0.5;
            }
            m[(i, i)] = m[(i, i)] + n as f64;
        }
        let inv = m.inverse(1e-12).unwrap();
        let residual = m.mul(&inv).sub(&Matrix::identity(n)).max_norm();
        assert!(residual < 1e-12, "residual {residual}");
    }

    #[test]
    fn singular_matrix_is_rejected() {
        let m = Matrix::from_rows(vec![vec![1.0, 2.0], vec![2.0, 4.0]]);
        assert!(matches!(m.inverse(1e-12), Err(MatrixError::Singular { .. })));
    }

    #[test]
    fn near_singular_fails_rcond_floor() {
        let eps = 1e-14;
        let m = Matrix::from_rows(vec![vec![1.0, 1.0], vec![1.0, 1.0 + eps]]);
        assert!(matches!(m.inverse(1e-12), Err(MatrixError::Singular { .. })));
    }

    #[test]
    fn vec_mul_matches_manual_product() {
        let m = Matrix::from_rows(vec![vec![1.0, 2.0], vec![3.0, 4.0]]);
        let out = vec_mul(&[0.5, 0.25], &m);
        assert_eq!(out, vec![0.5 + 0.75, 1.0 + 1.0]);
    }

    #[test]
    fn mul_shapes() {
        let a = Matrix::from_rows(vec![vec![1.0, 0.0, 2.0], vec![0.0, 1.0, -1.0]]);
        let b = Matrix::from_rows(vec![vec![1.0, 1.0], vec![2.0, 0.0], vec![0.0, 3.0]]);
        let c = a.mul(&b);
        assert_eq!(c.n_rows(), 2);
        assert_eq!(c.n_cols(), 2);
        assert_eq!(c[(0, 0)], 1.0);
        assert_eq!(c[(0, 1)], 7.0);
        assert_eq!(c[(1, 0)], 2.0);
        assert_eq!(c[(1, 1)], -3.0);
    }
}
