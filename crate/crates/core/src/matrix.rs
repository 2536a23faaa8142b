//! Dense row-major `f64` matrices.

use alloc::vec;
use alloc::vec::Vec;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MatrixError {
    #[error("matrix dim must be positive")]
    ZeroDim,
    #[error("expected {expected} values for a {rows}x{dim} matrix, got {got}")]
    BadLength {
        rows: usize,
        dim: usize,
        expected: usize,
        got: usize,
    },
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
}

/// A `rows x dim` matrix of finite `f64` values stored row-major.
///
/// `rows` may be zero; `dim` may not.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    dim: usize,
    values: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, dim: usize, values: Vec<f64>) -> Result<Self, MatrixError> {
        if dim == 0 {
            return Err(MatrixError::ZeroDim);
        }
        if values.len() != rows * dim {
            return Err(MatrixError::BadLength {
                rows,
                dim,
                expected: rows * dim,
                got: values.len(),
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(MatrixError::NonFinite {
                row: i / dim,
                col: i % dim,
            });
        }
        Ok(Self { rows, dim, values })
    }

    /// # Panics
    /// If `dim == 0`.
    pub fn zeros(rows: usize, dim: usize) -> Self {
        assert!(dim > 0, "matrix dim must be positive");
        Self {
            rows,
            dim,
            values: vec![0.0; rows * dim],
        }
    }

    /// Builds a matrix from a closure over `(row, col)`.
    pub fn from_fn(rows: usize, dim: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(rows, dim);
        for r in 0..rows {
            for c in 0..dim {
                m.values[r * dim + c] = f(r, c);
            }
        }
        m
    }

    // Used by internal kernels whose arithmetic cannot produce NaN from finite input
    // except by overflow; `is_finite` is available to check.
    pub(crate) fn from_raw(rows: usize, dim: usize, values: Vec<f64>) -> Self {
        debug_assert!(dim > 0 && values.len() == rows * dim);
        Self { rows, dim, values }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.dim)
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    #[inline]
    pub(crate) fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[f64] {
        &self.values[r * self.dim..(r + 1) * self.dim]
    }

    #[inline]
    pub(crate) fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.values[r * self.dim..(r + 1) * self.dim]
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.dim + c]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Frobenius inner product. Shapes must agree.
    pub fn dot(&self, other: &Matrix) -> f64 {
        assert_eq!(self.shape(), other.shape());
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a * b)
            .sum()
    }

    pub fn scaled(&self, k: f64) -> Matrix {
        Matrix::from_raw(
            self.rows,
            self.dim,
            self.values.iter().map(|v| v * k).collect(),
        )
    }

    /// `self * rhs` where `rhs` is `dim x n`.
    pub fn matmul(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.dim, rhs.rows, "inner dimensions differ");
        let mut out = Matrix::zeros(self.rows, rhs.dim);
        for r in 0..self.rows {
            let dst = &mut out.values[r * rhs.dim..(r + 1) * rhs.dim];
            for (k, &a) in self.row(r).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (d, &b) in dst.iter_mut().zip(rhs.row(k)) {
                    *d += a * b;
                }
            }
        }
        out
    }

    pub(crate) fn add_assign(&mut self, other: &Matrix) {
        assert_eq!(self.shape(), other.shape());
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += b;
        }
    }
}
