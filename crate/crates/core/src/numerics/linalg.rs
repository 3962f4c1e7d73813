//! Dense row-major matrices, Cholesky factorization and triangular solves.

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds from row-major data. Panics if the length does not match.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "row-major data length");
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows");
            data.extend_from_slice(r);
        }
        Self { rows: rows.len(), cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).collect()
    }

    pub fn trace(&self) -> f64 {
        self.diagonal().iter().sum()
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "matrix-vector dimension");
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// `self * other`, skipping zero entries of `self` (smoother matrices are sparse).
    pub fn matmul(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows, "matmul dimension");
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// `self * other^T`, skipping zero entries of `other`.
    pub fn matmul_transpose(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.cols, "matmul_transpose dimension");
        let mut out = Matrix::zeros(self.rows, other.rows);
        for j in 0..other.rows {
            let b_row = other.row(j);
            let nz: Vec<(usize, f64)> =
                b_row.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(k, v)| (k, *v)).collect();
            for i in 0..self.rows {
                let a_row = self.row(i);
                out[(i, j)] = nz.iter().map(|&(k, v)| a_row[k] * v).sum();
            }
        }
        out
    }

    pub fn sub(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Matrix { rows: self.rows, cols: self.cols, data }
    }

    pub fn add(&self, other: &Matrix) -> Matrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Matrix { rows: self.rows, cols: self.cols, data }
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| v * s).collect() }
    }

    pub fn frobenius_norm(&self) -> f64 {
        libm::sqrt(self.data.iter().map(|v| v * v).sum())
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest `|a_ij - a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.rows {
            for j in i + 1..self.cols.min(self.rows) {
                worst = worst.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        worst
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// What to do when a matrix fails to factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum RidgePolicy {
    /// Fail on the first non-positive pivot.
    None,
    /// Retry with jitter `delta * mean(diag)`, `delta` = 1e-10, 1e-9, ..., 1e-6.
    #[default]
    Auto,
}

const RIDGE_START: f64 = 1e-10;
const RIDGE_RETRIES: usize = 5;

/// Lower-triangular factor `L` with `L L^T = A + ridge * mean(diag(A)) * I`.
#[derive(Debug, Clone, PartialEq)]
pub struct Cholesky {
    l: Matrix,
    ridge: f64,
}

impl Cholesky {
    pub fn factor(&self) -> &Matrix {
        &self.l
    }

    /// Relative jitter `delta` that was needed (0 when none).
    pub fn ridge(&self) -> f64 {
        self.ridge
    }

    pub fn dim(&self) -> usize {
        self.l.rows()
    }

    /// `L L^T`.
    pub fn reconstruct(&self) -> Matrix {
        self.l.matmul_transpose(&self.l)
    }

    /// `L x`.
    pub fn mul_lower(&self, x: &[f64]) -> Vec<f64> {
        let n = self.dim();
        assert_eq!(x.len(), n);
        (0..n).map(|i| dot(&self.l.row(i)[..=i], &x[..=i])).collect()
    }

    /// Solves `A x = b` with two triangular solves.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let y = solve_lower(self, b);
        solve_upper_transpose(self, &y)
    }

    /// Identity factor scaled by `s` (the factor of `s^2 I`).
    pub fn scaled_identity(n: usize, s: f64) -> Self {
        Self { l: Matrix::identity(n).scale(s), ridge: 0.0 }
    }
}

/// Cholesky factorization of a symmetric matrix.
pub fn cholesky(a: &Matrix, policy: RidgePolicy) -> Result<Cholesky> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch(alloc::format!("cholesky of {}x{} matrix", a.rows(), a.cols())));
    }
    let asym = a.asymmetry();
    if asym > 1e-10 * a.max_abs().max(f64::MIN_POSITIVE) {
        return Err(Error::NotSymmetric { asymmetry: asym });
    }
    let n = a.rows();
    let mean_diag = if n == 0 { 0.0 } else { a.trace() / n as f64 };
    let mut failure = match factor_with_jitter(a, 0.0) {
        Ok(l) => return Ok(Cholesky { l, ridge: 0.0 }),
        Err(pivot) => pivot,
    };
    if policy == RidgePolicy::Auto && mean_diag > 0.0 {
        let mut delta = RIDGE_START;
        for _ in 0..RIDGE_RETRIES {
            match factor_with_jitter(a, delta * mean_diag) {
                Ok(l) => {
                    log::debug!("cholesky needed ridge delta = {delta:e} (n = {n})");
                    return Ok(Cholesky { l, ridge: delta });
                }
                Err(pivot) => failure = pivot,
            }
            delta *= 10.0;
        }
        return Err(Error::NotPositiveDefinite { pivot: failure, ridge: delta / 10.0 });
    }
    Err(Error::NotPositiveDefinite { pivot: failure, ridge: 0.0 })
}

fn factor_with_jitter(a: &Matrix, jitter: f64) -> core::result::Result<Matrix, usize> {
    let n = a.rows();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let d = a[(j, j)] + jitter - dot(&l.row(j)[..j], &l.row(j)[..j]);
        if !(d > 0.0) || !d.is_finite() {
            return Err(j);
        }
        let d = libm::sqrt(d);
        l[(j, j)] = d;
        for i in j + 1..n {
            let s = a[(i, j)] - dot(&l.row(i)[..j], &l.row(j)[..j]);
            l[(i, j)] = s / d;
        }
    }
    Ok(l)
}

/// Forward substitution `L x = b`.
pub fn solve_lower(chol: &Cholesky, b: &[f64]) -> Vec<f64> {
    let l = &chol.l;
    let n = l.rows();
    assert_eq!(b.len(), n, "solve_lower dimension");
    let mut x = vec![0.0; n];
    for i in 0..n {
        let row = l.row(i);
        x[i] = (b[i] - dot(&row[..i], &x[..i])) / row[i];
    }
    x
}

/// Back substitution `L^T x = b`.
pub fn solve_upper_transpose(chol: &Cholesky, b: &[f64]) -> Vec<f64> {
    let l = &chol.l;
    let n = l.rows();
    assert_eq!(b.len(), n, "solve_upper_transpose dimension");
    let mut x = b.to_vec();
    for i in (0..n).rev() {
        x[i] /= l[(i, i)];
        let xi = x[i];
        let row = l.row(i);
        for k in 0..i {
            x[k] -= row[k] * xi;
        }
    }
    x
}

/// Dense solve of a small symmetric system by Gaussian elimination with partial
/// pivoting. Returns `None` when a pivot underflows relative to the trace.
pub(crate) fn solve_small<const N: usize>(mut a: [[f64; N]; N], mut b: [f64; N]) -> Option<[f64; N]> {
    let scale: f64 = (0..N).map(|i| a[i][i].abs()).sum::<f64>().max(f64::MIN_POSITIVE);
    for col in 0..N {
        let mut piv = col;
        for r in col + 1..N {
            if a[r][col].abs() > a[piv][col].abs() {
                piv = r;
            }
        }
        if a[piv][col].abs() <= 1e-13 * scale {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..N {
            let f = a[r][col] / a[col][col];
            if f == 0.0 {
                continue;
            }
            for c in col..N {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = [0.0; N];
    for i in (0..N).rev() {
        let s: f64 = (i + 1..N).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    Some(x)
}
