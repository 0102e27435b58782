//! Minimal dense row-major matrix and the orthonormal-basis routine the
//! CCA metric needs.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows * cols != data.len() {
            return Err(Error::shape(format!(
                "{rows}x{cols} matrix needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
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

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::shape("ragged rows"));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.iter().flat_map(|r| r.iter().copied()).collect(),
        })
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn column_means(&self) -> Vec<f64> {
        let mut means = vec![0.0; self.cols];
        for i in 0..self.rows {
            for (m, v) in means.iter_mut().zip(self.row(i)) {
                *m += v;
            }
        }
        let n = self.rows as f64;
        means.iter_mut().for_each(|m| *m /= n);
        means
    }

    /// Copy with every column shifted to zero mean.
    pub fn column_centered(&self) -> Matrix {
        let means = self.column_means();
        let mut out = self.clone();
        for i in 0..self.rows {
            let row = &mut out.data[i * self.cols..(i + 1) * self.cols];
            for (v, m) in row.iter_mut().zip(&means) {
                *v -= m;
            }
        }
        out
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::shape(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                let src = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += a * s;
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ · other` without materialising the transpose.
    pub fn transpose_mul(&self, other: &Matrix) -> Result<Matrix> {
        if self.rows != other.rows {
            return Err(Error::shape(format!(
                "row counts differ: {} vs {}",
                self.rows, other.rows
            )));
        }
        let mut out = Matrix::zeros(self.cols, other.cols);
        for n in 0..self.rows {
            let a = self.row(n);
            let b = other.row(n);
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
        Ok(out)
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn scale(&self, a: f64) -> Matrix {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| v * a).collect(),
        }
    }

    /// Widen to `width` columns with trailing zero columns.
    pub fn pad_columns(&self, width: usize) -> Result<Matrix> {
        if width < self.cols {
            return Err(Error::shape(format!(
                "cannot pad {} columns down to {width}",
                self.cols
            )));
        }
        if width == self.cols {
            return Ok(self.clone());
        }
        let mut out = Matrix::zeros(self.rows, width);
        for i in 0..self.rows {
            out.data[i * width..i * width + self.cols].copy_from_slice(self.row(i));
        }
        Ok(out)
    }

    /// Keep the first `n` rows.
    pub fn truncate_rows(&self, n: usize) -> Matrix {
        let n = n.min(self.rows);
        Matrix {
            rows: n,
            cols: self.cols,
            data: self.data[..n * self.cols].to_vec(),
        }
    }

    pub(crate) fn add_assign(&mut self, other: &Matrix) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub(crate) fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

/// Orthonormal basis of a column space, one vector per retained direction.
#[derive(Debug, Clone)]
pub struct ColumnBasis {
    vectors: Vec<Vec<f64>>,
    singular_values: Vec<f64>,
}

impl ColumnBasis {
    /// Numerical rank: number of retained directions.
    pub fn rank(&self) -> usize {
        self.vectors.len()
    }

    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.vectors
    }

    /// Singular values of the retained directions, descending.
    pub fn singular_values(&self) -> &[f64] {
        &self.singular_values
    }

    /// `‖Aᵀ B‖_F²` for two bases over the same row space.
    pub fn overlap_sq(&self, other: &ColumnBasis) -> f64 {
        let mut total = 0.0;
        for a in &self.vectors {
            for b in &other.vectors {
                let d = dot(a, b);
                total += d * d;
            }
        }
        total
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

const JACOBI_MAX_SWEEPS: usize = 80;
const JACOBI_TOL: f64 = 1e-15;

/// Orthonormal basis for the column space of `m` by one-sided Jacobi
/// rotations. Directions whose singular value is at most
/// `rel_tol * largest` are dropped, so zero padding columns and
/// rank-deficient inputs come out truncated to their numerical rank.
pub fn orthonormal_basis(m: &Matrix, rel_tol: f64) -> ColumnBasis {
    let mut cols: Vec<Vec<f64>> = (0..m.cols()).map(|j| m.column(j)).collect();
    let mut norms: Vec<f64> = cols.iter().map(|c| dot(c, c)).collect();
    let k = cols.len();

    for _ in 0..JACOBI_MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..k {
            for q in p + 1..k {
                let alpha = norms[p];
                let beta = norms[q];
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                let gamma = dot(&cols[p], &cols[q]);
                if libm::fabs(gamma) <= JACOBI_TOL * libm::sqrt(alpha * beta) {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = libm::copysign(1.0, zeta) / (libm::fabs(zeta) + libm::sqrt(1.0 + zeta * zeta));
                let c = 1.0 / libm::sqrt(1.0 + t * t);
                let s = c * t;
                let (left, right) = cols.split_at_mut(q);
                let (cp, cq) = (&mut left[p], &mut right[0]);
                for (x, y) in cp.iter_mut().zip(cq.iter_mut()) {
                    let (a, b) = (*x, *y);
                    *x = c * a - s * b;
                    *y = s * a + c * b;
                }
                norms[p] = dot(cp, cp);
                norms[q] = dot(cq, cq);
            }
        }
        if !rotated {
            break;
        }
    }

    let sigmas: Vec<f64> = norms.iter().map(|n| libm::sqrt(*n)).collect();
    let largest = sigmas.iter().copied().fold(0.0, f64::max);
    let mut kept: Vec<(f64, Vec<f64>)> = cols
        .into_iter()
        .zip(sigmas)
        .filter(|(_, s)| largest > 0.0 && *s > rel_tol * largest)
        .map(|(mut c, s)| {
            c.iter_mut().for_each(|v| *v /= s);
            (s, c)
        })
        .collect();
    kept.sort_by(|a, b| b.0.total_cmp(&a.0));
    let (singular_values, vectors) = kept.into_iter().unzip();
    ColumnBasis {
        vectors,
        singular_values,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_of_rank_deficient_matrix() {
        // third column = first + second, fourth column zero
        let m = Matrix::from_fn(6, 4, |i, j| {
            let a = (i as f64 * 0.7).sin();
            let b = (i as f64 * 1.3).cos();
            match j {
                0 => a,
                1 => b,
                2 => a + b,
                _ => 0.0,
            }
        });
        let basis = orthonormal_basis(&m, 1e-10);
        assert_eq!(basis.rank(), 2);
        for (i, u) in basis.vectors().iter().enumerate() {
            for (j, v) in basis.vectors().iter().enumerate() {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((dot(u, v) - expect).abs() < 1e-12);
            }
        }
        assert!((basis.overlap_sq(&basis) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn zero_matrix_has_empty_basis() {
        assert_eq!(orthonormal_basis(&Matrix::zeros(5, 3), 1e-10).rank(), 0);
    }

    #[test]
    fn transpose_mul_matches_explicit() {
        let a = Matrix::from_fn(4, 3, |i, j| (i * 3 + j) as f64 - 2.0);
        let b = Matrix::from_fn(4, 2, |i, j| (i as f64) * 0.5 - j as f64);
        assert_eq!(a.transpose_mul(&b).unwrap(), a.transpose().matmul(&b).unwrap());
    }

    #[test]
    fn pad_then_truncate() {
        let a = Matrix::from_fn(3, 2, |i, j| (i + j) as f64);
        let p = a.pad_columns(5).unwrap();
        assert_eq!(p.cols(), 5);
        assert_eq!(p.get(2, 1), 3.0);
        assert_eq!(p.get(2, 4), 0.0);
        assert!(a.pad_columns(1).is_err());
        assert_eq!(p.truncate_rows(1).rows(), 1);
    }
}
