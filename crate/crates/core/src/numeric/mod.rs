//! Dense row-major matrices, validated feature batches and the batch
//! statistics every loss is built on.

mod gradcheck;
mod rng;
pub(crate) mod stats;

pub use gradcheck::{finite_diff_grad, max_relative_error, relative_error, DEFAULT_FD_STEP};
pub use rng::{seeded_standard_normal, stream_rng, Stream};
pub use stats::{column_stats, corr_mat, ColumnStats, CorrMatrix, STD_FLOOR};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major `rows × cols` matrix of `f64`.
///
/// Unlike [`FeatureBatch`] this carries no finiteness guarantee; it is used
/// for gradients, Jacobians and network parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "expected {rows}x{cols} = {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn add_at(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] += v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn scale(&mut self, k: f64) {
        self.data.iter_mut().for_each(|v| *v *= k);
    }

    /// `self += k * other`; shapes must agree.
    pub fn axpy(&mut self, k: f64, other: &Matrix) {
        assert_eq!(self.shape(), other.shape(), "axpy shape mismatch");
        self.data
            .iter_mut()
            .zip(&other.data)
            .for_each(|(a, b)| *a += k * b);
    }

    /// `self · otherᵀ`, the layout used for `inputs · weightsᵀ`.
    pub fn matmul_t(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.cols, "matmul_t inner dimension mismatch");
        let mut out = Matrix::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            let a = self.row(i);
            for j in 0..other.rows {
                let b = other.row(j);
                out.data[i * other.rows + j] = a.iter().zip(b).map(|(x, y)| x * y).sum();
            }
        }
        out
    }

    /// `self · other`.
    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matmul inner dimension mismatch");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, b) in dst.iter_mut().zip(other.row(k)) {
                    *d += a * b;
                }
            }
        }
        out
    }

    /// `selfᵀ · other`.
    pub fn t_matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.rows, other.rows, "t_matmul row mismatch");
        let mut out = Matrix::zeros(self.cols, other.cols);
        for r in 0..self.rows {
            let a = self.row(r);
            let b = other.row(r);
            for (i, &ai) in a.iter().enumerate() {
                if ai == 0.0 {
                    continue;
                }
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, &bj) in dst.iter_mut().zip(b) {
                    *d += ai * bj;
                }
            }
        }
        out
    }
}

/// An `N × D` batch of encoded features, one sample per row.
///
/// Every entry is finite and the shape is non-empty; statistics operations
/// additionally require `N ≥ 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBatch(Matrix);

impl FeatureBatch {
    pub fn new(n: usize, d: usize, data: Vec<f64>) -> Result<Self> {
        Self::from_matrix(Matrix::from_vec(n, d, data)?)
    }

    pub fn from_matrix(m: Matrix) -> Result<Self> {
        if m.rows == 0 || m.cols == 0 {
            return Err(Error::Shape(format!(
                "feature batch must be non-empty, got {}x{}",
                m.rows, m.cols
            )));
        }
        if let Some(idx) = m.data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                row: idx / m.cols,
                col: idx % m.cols,
            });
        }
        Ok(Self(m))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != d) {
            return Err(Error::Shape(format!(
                "row {bad} has {} values, expected {d}",
                rows[bad].len()
            )));
        }
        Self::new(rows.len(), d, rows.concat())
    }

    /// Builds a batch from column vectors of equal length.
    pub fn from_columns(cols: &[Vec<f64>]) -> Result<Self> {
        let n = cols.first().map_or(0, Vec::len);
        if cols.iter().any(|c| c.len() != n) {
            return Err(Error::Shape("columns differ in length".into()));
        }
        let d = cols.len();
        let mut data = vec![0.0; n * d];
        for (j, col) in cols.iter().enumerate() {
            for (i, &v) in col.iter().enumerate() {
                data[i * d + j] = v;
            }
        }
        Self::new(n, d, data)
    }

    pub fn n(&self) -> usize {
        self.0.rows
    }

    pub fn d(&self) -> usize {
        self.0.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.0.get(i, j)
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.0.row(i)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.0.column(j)
    }

    pub fn as_matrix(&self) -> &Matrix {
        &self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        self.0.as_slice()
    }

    pub fn into_matrix(self) -> Matrix {
        self.0
    }

    /// Copy of the batch with entry `(i, j)` shifted by `delta`.
    pub fn perturbed(&self, i: usize, j: usize, delta: f64) -> Result<Self> {
        let mut m = self.0.clone();
        m.add_at(i, j, delta);
        Self::from_matrix(m)
    }

    /// Applies `f(column, value)` to every entry.
    pub fn map_columns(&self, f: impl Fn(usize, f64) -> f64) -> Result<Self> {
        let mut m = self.0.clone();
        let d = m.cols;
        for (idx, v) in m.data.iter_mut().enumerate() {
            *v = f(idx % d, *v);
        }
        Self::from_matrix(m)
    }

    pub(crate) fn require_rows(&self, min: usize, what: &str) -> Result<()> {
        if self.n() < min {
            return Err(Error::Shape(format!(
                "{what} needs at least {min} samples, got {}",
                self.n()
            )));
        }
        Ok(())
    }
}

impl TryFrom<Matrix> for FeatureBatch {
    type Error = Error;

    fn try_from(m: Matrix) -> Result<Self> {
        Self::from_matrix(m)
    }
}

impl AsRef<Matrix> for FeatureBatch {
    fn as_ref(&self) -> &Matrix {
        &self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_finite_and_empty() {
        assert!(matches!(
            FeatureBatch::new(2, 1, vec![0.0, f64::NAN]),
            Err(Error::NonFinite { row: 1, col: 0 })
        ));
        assert!(FeatureBatch::new(0, 3, vec![]).is_err());
        assert!(FeatureBatch::new(2, 2, vec![1.0; 3]).is_err());
    }

    #[test]
    fn from_columns_layout() {
        let b = FeatureBatch::from_columns(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(b.row(0), &[1.0, 3.0]);
        assert_eq!(b.row(1), &[2.0, 4.0]);
    }

    #[test]
    fn matmul_variants_agree() {
        let a = Matrix::from_vec(2, 3, vec![1., 2., 3., 4., 5., 6.]).unwrap();
        let b = Matrix::from_vec(3, 2, vec![7., 8., 9., 10., 11., 12.]).unwrap();
        let ab = a.matmul(&b);
        assert_eq!(ab.as_slice(), &[58., 64., 139., 154.]);
        // bᵀ stored row-major is (2x3); a · (bᵀ)ᵀ == a · b
        let bt = Matrix::from_vec(2, 3, vec![7., 9., 11., 8., 10., 12.]).unwrap();
        assert_eq!(a.matmul_t(&bt), ab);
        let at = Matrix::from_vec(3, 2, vec![1., 4., 2., 5., 3., 6.]).unwrap();
        assert_eq!(at.t_matmul(&b), ab);
    }
}
