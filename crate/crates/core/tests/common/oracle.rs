//! Independent reference computations used by the test suites.
//!
//! Everything here is evaluated the slow, literal way with nalgebra: dense
//! kernels, an explicit centering matrix, SVD for the column bases and the
//! canonical correlations. None of it calls into the crate's metric code.
#![allow(dead_code)]

use hintscout_core::Matrix;
use nalgebra::DMatrix;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::StandardNormal;

pub fn to_na(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.data())
}

pub fn from_na(m: &DMatrix<f64>) -> Matrix {
    Matrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

pub fn centering(n: usize) -> DMatrix<f64> {
    DMatrix::identity(n, n) - DMatrix::from_element(n, n, 1.0 / n as f64)
}

pub fn hsic_dense(k: &DMatrix<f64>, l: &DMatrix<f64>) -> f64 {
    let n = k.nrows();
    let h = centering(n);
    (k * &h * l * &h).trace() / ((n - 1) as f64).powi(2)
}

pub fn cka_from_kernels(k: &DMatrix<f64>, l: &DMatrix<f64>) -> f64 {
    hsic_dense(k, l) / (hsic_dense(k, k) * hsic_dense(l, l)).sqrt()
}

pub fn linear_kernel(x: &DMatrix<f64>) -> DMatrix<f64> {
    x * x.transpose()
}

/// Median of all unordered-pair row distances by full sort.
pub fn median_distance_sorted(x: &DMatrix<f64>) -> f64 {
    let n = x.nrows();
    let mut d = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            d.push((x.row(i) - x.row(j)).norm());
        }
    }
    d.sort_by(|a, b| a.total_cmp(b));
    let m = d.len();
    if m % 2 == 1 {
        d[m / 2]
    } else {
        0.5 * (d[m / 2 - 1] + d[m / 2])
    }
}

pub fn rbf_kernel_dense(x: &DMatrix<f64>, fraction: f64) -> DMatrix<f64> {
    let sigma = fraction * median_distance_sorted(x);
    let n = x.nrows();
    DMatrix::from_fn(n, n, |i, j| {
        let d2 = (x.row(i) - x.row(j)).norm_squared();
        (-d2 / (2.0 * sigma * sigma)).exp()
    })
}

pub fn cka_linear_dense(x: &Matrix, y: &Matrix) -> f64 {
    cka_from_kernels(&linear_kernel(&to_na(x)), &linear_kernel(&to_na(y)))
}

pub fn cka_rbf_dense(x: &Matrix, y: &Matrix, fraction: f64) -> f64 {
    cka_from_kernels(
        &rbf_kernel_dense(&to_na(x), fraction),
        &rbf_kernel_dense(&to_na(y), fraction),
    )
}

/// Column basis of the centered matrix from its SVD.
fn svd_basis(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    let centered = centering(n) * x;
    let svd = centered.svd(true, false);
    let u = svd.u.unwrap();
    let smax = svd.singular_values.max();
    let keep: Vec<usize> = (0..svd.singular_values.len())
        .filter(|&i| svd.singular_values[i] > 1e-10 * smax)
        .collect();
    DMatrix::from_fn(n, keep.len(), |i, j| u[(i, keep[j])])
}

/// Canonical correlations as the singular values of `Q_Yᵀ Q_X`.
pub fn canonical_correlations(x: &Matrix, y: &Matrix) -> Vec<f64> {
    let qx = svd_basis(&to_na(x));
    let qy = svd_basis(&to_na(y));
    let m = qy.transpose() * qx;
    m.singular_values().iter().copied().collect()
}

pub fn r2_cca_svd(x: &Matrix, y: &Matrix, p1: usize) -> f64 {
    canonical_correlations(x, y).iter().map(|r| r * r).sum::<f64>() / p1 as f64
}

pub fn rng(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

pub fn gaussian(rng: &mut StdRng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

/// Random orthogonal matrix from the QR factor of a Gaussian matrix.
pub fn random_orthogonal(rng: &mut StdRng, n: usize) -> Matrix {
    let g = to_na(&gaussian(rng, n, n));
    from_na(&g.qr().q())
}

/// Random well-conditioned invertible matrix.
pub fn random_invertible(rng: &mut StdRng, n: usize) -> Matrix {
    loop {
        let m = to_na(&gaussian(rng, n, n)) + DMatrix::identity(n, n) * 2.0;
        let sv = m.singular_values();
        if sv.min() > 0.2 {
            return from_na(&m);
        }
    }
}

pub fn matmul(a: &Matrix, b: &Matrix) -> Matrix {
    from_na(&(to_na(a) * to_na(b)))
}

/// Every surjective labelling of `l` items into `k` clusters, labels 1..=k.
pub fn surjective_labelings(l: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut labels = vec![1usize; l];
    loop {
        let mut seen = vec![false; k];
        labels.iter().for_each(|&x| seen[x - 1] = true);
        if seen.iter().all(|&s| s) {
            out.push(labels.clone());
        }
        let mut i = 0;
        loop {
            if i == l {
                return out;
            }
            if labels[i] < k {
                labels[i] += 1;
                break;
            }
            labels[i] = 1;
            i += 1;
        }
    }
}

/// Entrywise mean by explicit summation.
pub fn mean_of(members: &[&Matrix]) -> Matrix {
    let (r, c) = (members[0].rows(), members[0].cols());
    Matrix::from_fn(r, c, |i, j| {
        let mut s = 0.0;
        for m in members {
            s += m.get(i, j);
        }
        s / members.len() as f64
    })
}
