//! Representation-similarity metrics between layers.
//!
//! * HSIC, the empirical estimator `tr(K H L H) / (n - 1)^2` on two kernel
//!   matrices, `H` being the centering matrix.
//! * CKA, `HSIC(K, L) / sqrt(HSIC(K, K) HSIC(L, L))`, with a linear or a
//!   Gaussian (RBF) kernel.
//! * Mean squared CCA, `‖Q_Yᵀ Q_X‖_F² / p1`, where `Q_X`, `Q_Y` are
//!   orthonormal bases of the column-centered inputs and `p1` is the smaller
//!   channel count.
//!
//! Linear CKA never forms the `N x N` kernels: with column-centered `X` and
//! `Y`, `tr(K H L H) = ‖Xᵀ Y‖_F²`. RBF CKA streams kernel entries so memory
//! stays `O(N)`, at `O(N² C)` time per pair.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::matrix::{orthonormal_basis, ColumnBasis, Matrix};
use crate::par::map_indexed;
use crate::repr::LayerRepresentation;

pub const DEFAULT_RBF_FRACTION: f64 = 0.5;
/// `HSIC(K, K)` at or below this is a degenerate layer.
pub const CKA_DEGENERACY_TOL: f64 = 1e-12;
/// Singular values at or below this fraction of the largest are dropped
/// from the CCA bases.
pub const CCA_RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MetricKind {
    CkaLinear,
    CkaRbf,
    R2Cca,
}

impl MetricKind {
    /// Identifier used in JSON exports.
    pub fn as_str(self) -> &'static str {
        match self {
            MetricKind::CkaLinear => "cka_linear",
            MetricKind::CkaRbf => "cka_rbf",
            MetricKind::R2Cca => "r2_cca",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "cka_linear" => Some(MetricKind::CkaLinear),
            "cka_rbf" => Some(MetricKind::CkaRbf),
            "r2_cca" => Some(MetricKind::R2Cca),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricSpec {
    pub kind: MetricKind,
    /// RBF bandwidth as a fraction of the median pairwise row distance.
    pub rbf_bandwidth_fraction: f64,
}

impl MetricSpec {
    pub fn cka_linear() -> Self {
        Self {
            kind: MetricKind::CkaLinear,
            rbf_bandwidth_fraction: DEFAULT_RBF_FRACTION,
        }
    }

    pub fn cka_rbf(fraction: f64) -> Result<Self> {
        let spec = Self {
            kind: MetricKind::CkaRbf,
            rbf_bandwidth_fraction: fraction,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn r2_cca() -> Self {
        Self {
            kind: MetricKind::R2Cca,
            rbf_bandwidth_fraction: DEFAULT_RBF_FRACTION,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let f = self.rbf_bandwidth_fraction;
        if !(f.is_finite() && f > 0.0) {
            return Err(Error::invalid(format!(
                "rbf bandwidth fraction must be positive, got {f}"
            )));
        }
        Ok(())
    }

    /// Precompute everything about one operand that does not depend on the
    /// other side. `channels` is the declared channel count used for `p1` in
    /// R²_CCA; pass `None` for centroids, which have none.
    pub fn prepare(&self, m: &Matrix, channels: Option<usize>) -> Result<Prepared> {
        self.validate()?;
        if m.rows() < 2 {
            return Err(Error::shape(format!("need at least 2 samples, got {}", m.rows())));
        }
        let n = m.rows();
        let inner = match self.kind {
            MetricKind::CkaLinear => {
                let centered = m.column_centered();
                let gram = centered.transpose_mul(&centered)?;
                let self_hsic = gram.frobenius_sq() / sq(n as f64 - 1.0);
                check_self_hsic(self_hsic)?;
                PreparedInner::Linear { centered, self_hsic }
            }
            MetricKind::CkaRbf => {
                let median = median_pairwise_distance(m);
                let sigma = self.rbf_bandwidth_fraction * median;
                if sigma.is_nan() || sigma <= 0.0 {
                    return Err(Error::degenerate("all samples identical, RBF bandwidth is zero"));
                }
                let kernel = RbfKernel::new(m.clone(), sigma);
                let self_hsic = kernel.centered_dot(&kernel) / sq(n as f64 - 1.0);
                check_self_hsic(self_hsic)?;
                PreparedInner::Rbf { kernel, self_hsic }
            }
            MetricKind::R2Cca => {
                let basis = orthonormal_basis(&m.column_centered(), CCA_RANK_TOL);
                if basis.rank() == 0 {
                    return Err(Error::degenerate("rank 0 after centering"));
                }
                PreparedInner::Cca { basis, channels }
            }
        };
        Ok(Prepared {
            kind: self.kind,
            samples: n,
            inner,
        })
    }

    /// Similarity between two prepared operands.
    pub fn compare(&self, a: &Prepared, b: &Prepared) -> Result<f64> {
        if a.kind != self.kind || b.kind != self.kind {
            return Err(Error::invalid("operand prepared for a different metric"));
        }
        if a.samples != b.samples {
            return Err(Error::shape(format!(
                "sample counts differ: {} vs {}",
                a.samples, b.samples
            )));
        }
        let n = a.samples as f64;
        match (&a.inner, &b.inner) {
            (
                PreparedInner::Linear {
                    centered: x,
                    self_hsic: hx,
                },
                PreparedInner::Linear {
                    centered: y,
                    self_hsic: hy,
                },
            ) => {
                let cross = x.transpose_mul(y)?.frobenius_sq() / sq(n - 1.0);
                Ok(cross / libm::sqrt(hx * hy))
            }
            (
                PreparedInner::Rbf {
                    kernel: kx,
                    self_hsic: hx,
                },
                PreparedInner::Rbf {
                    kernel: ky,
                    self_hsic: hy,
                },
            ) => {
                let cross = kx.centered_dot(ky) / sq(n - 1.0);
                Ok(cross / libm::sqrt(hx * hy))
            }
            (
                PreparedInner::Cca {
                    basis: qx,
                    channels: cx,
                },
                PreparedInner::Cca {
                    basis: qy,
                    channels: cy,
                },
            ) => {
                let p1 = match (cx, cy) {
                    (Some(a), Some(b)) => (*a).min(*b),
                    (Some(a), None) | (None, Some(a)) => *a,
                    (None, None) => qx.rank().min(qy.rank()),
                };
                Ok(qx.overlap_sq(qy) / p1 as f64)
            }
            _ => unreachable!("kinds checked above"),
        }
    }

    /// Metric between two matrices; `p1` for R²_CCA is the smaller column
    /// count.
    pub fn between(&self, x: &Matrix, y: &Matrix) -> Result<f64> {
        let a = self.prepare(x, Some(x.cols()))?;
        let b = self.prepare(y, Some(y.cols()))?;
        self.compare(&a, &b)
    }

    pub fn between_layers(&self, a: &LayerRepresentation, b: &LayerRepresentation) -> Result<f64> {
        let pa = self.prepare(&a.matrix, Some(a.original_channels))?;
        let pb = self.prepare(&b.matrix, Some(b.original_channels))?;
        self.compare(&pa, &pb)
    }
}

fn check_self_hsic(h: f64) -> Result<()> {
    if h.is_nan() || h <= CKA_DEGENERACY_TOL {
        return Err(Error::degenerate(format!(
            "HSIC(K, K) = {h:e} at or below {CKA_DEGENERACY_TOL:e}"
        )));
    }
    Ok(())
}

#[inline]
fn sq(x: f64) -> f64 {
    x * x
}

/// One operand with its metric-specific precomputation.
#[derive(Debug, Clone)]
pub struct Prepared {
    kind: MetricKind,
    samples: usize,
    inner: PreparedInner,
}

impl Prepared {
    /// Numerical rank of the centered matrix, for R²_CCA operands.
    pub fn rank(&self) -> Option<usize> {
        match &self.inner {
            PreparedInner::Cca { basis, .. } => Some(basis.rank()),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
enum PreparedInner {
    Linear {
        centered: Matrix,
        self_hsic: f64,
    },
    Rbf {
        kernel: RbfKernel,
        self_hsic: f64,
    },
    Cca {
        basis: ColumnBasis,
        channels: Option<usize>,
    },
}

/// Gaussian kernel evaluated on demand, with the row and grand means needed
/// to double-center it.
#[derive(Debug, Clone)]
struct RbfKernel {
    x: Matrix,
    gamma: f64,
    row_means: Vec<f64>,
    grand_mean: f64,
}

impl RbfKernel {
    fn new(x: Matrix, sigma: f64) -> Self {
        let n = x.rows();
        let gamma = 1.0 / (2.0 * sigma * sigma);
        let mut row_sums = vec![0.0; n];
        for i in 0..n {
            row_sums[i] += 1.0;
            for j in i + 1..n {
                let k = libm::exp(-gamma * sq_dist(x.row(i), x.row(j)));
                row_sums[i] += k;
                row_sums[j] += k;
            }
        }
        let row_means: Vec<f64> = row_sums.iter().map(|s| s / n as f64).collect();
        let grand_mean = row_means.iter().sum::<f64>() / n as f64;
        Self {
            x,
            gamma,
            row_means,
            grand_mean,
        }
    }

    #[inline]
    fn entry(&self, i: usize, j: usize) -> f64 {
        if i == j {
            1.0
        } else {
            libm::exp(-self.gamma * sq_dist(self.x.row(i), self.x.row(j)))
        }
    }

    /// `Σ_ij (H K H)_ij L_ij`, which equals `tr(K H L H)`.
    fn centered_dot(&self, other: &RbfKernel) -> f64 {
        let n = self.x.rows();
        let mut total = 0.0;
        for i in 0..n {
            let mut row = (1.0 - 2.0 * self.row_means[i] + self.grand_mean) * other.entry(i, i);
            let mut off = 0.0;
            for j in i + 1..n {
                let kc = self.entry(i, j) - self.row_means[i] - self.row_means[j] + self.grand_mean;
                off += kc * other.entry(i, j);
            }
            row += 2.0 * off;
            total += row;
        }
        total
    }
}

#[inline]
fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| sq(x - y)).sum()
}

/// Median Euclidean distance over all unordered row pairs. For an even
/// number of pairs the two middle distances are averaged.
pub fn median_pairwise_distance(x: &Matrix) -> f64 {
    let n = x.rows();
    let mut d = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            d.push(sq_dist(x.row(i), x.row(j)));
        }
    }
    if d.is_empty() {
        return 0.0;
    }
    let mid = d.len() / 2;
    let odd = d.len() % 2 == 1;
    let (lower, upper, _) = d.select_nth_unstable_by(mid, |a, b| a.total_cmp(b));
    let upper = libm::sqrt(*upper);
    if odd {
        upper
    } else {
        let below = lower.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (libm::sqrt(below) + upper)
    }
}

/// Dense Gaussian kernel matrix `exp(-‖x_i - x_j‖² / (2σ²))`.
pub fn rbf_kernel(x: &Matrix, sigma: f64) -> Matrix {
    let gamma = 1.0 / (2.0 * sigma * sigma);
    Matrix::from_fn(x.rows(), x.rows(), |i, j| {
        libm::exp(-gamma * sq_dist(x.row(i), x.row(j)))
    })
}

/// Empirical HSIC of two kernel matrices.
pub fn hsic(k: &Matrix, l: &Matrix) -> Result<f64> {
    let n = k.rows();
    if k.cols() != n || l.rows() != n || l.cols() != n {
        return Err(Error::shape(format!(
            "kernels must be square and equal-sized, got {}x{} and {}x{}",
            k.rows(),
            k.cols(),
            l.rows(),
            l.cols()
        )));
    }
    if n < 2 {
        return Err(Error::shape("HSIC needs at least 2 samples"));
    }
    let row_means: Vec<f64> = (0..n).map(|i| k.row(i).iter().sum::<f64>() / n as f64).collect();
    let col_means: Vec<f64> = (0..n)
        .map(|j| (0..n).map(|i| k.get(i, j)).sum::<f64>() / n as f64)
        .collect();
    let grand = row_means.iter().sum::<f64>() / n as f64;
    // tr(K H L H) = Σ_ij (H K H)_ij L_ji
    let mut total = 0.0;
    #[allow(clippy::needless_range_loop)]
    for i in 0..n {
        for j in 0..n {
            let kc = k.get(i, j) - row_means[i] - col_means[j] + grand;
            total += kc * l.get(j, i);
        }
    }
    Ok(total / sq(n as f64 - 1.0))
}

/// CKA between two representation matrices.
pub fn cka(x: &Matrix, y: &Matrix, spec: &MetricSpec) -> Result<f64> {
    match spec.kind {
        MetricKind::CkaLinear | MetricKind::CkaRbf => spec.between(x, y),
        MetricKind::R2Cca => Err(Error::invalid("cka called with r2_cca metric")),
    }
}

/// Mean squared canonical correlation; `p1` is the smaller column count.
pub fn r2_cca(x: &Matrix, y: &Matrix) -> Result<f64> {
    MetricSpec::r2_cca().between(x, y)
}

/// Mean squared canonical correlation with explicit channel counts for `p1`.
pub fn r2_cca_with_channels(x: &Matrix, cx: usize, y: &Matrix, cy: usize) -> Result<f64> {
    let spec = MetricSpec::r2_cca();
    let a = spec.prepare(x, Some(cx))?;
    let b = spec.prepare(y, Some(cy))?;
    spec.compare(&a, &b)
}

/// Pairwise similarities of an ordered list of layers.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    pub values: Matrix,
    pub metric: MetricSpec,
    pub layer_indices: Vec<usize>,
}

impl SimilarityMatrix {
    pub fn len(&self) -> usize {
        self.layer_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.layer_indices.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values.get(i, j)
    }

    pub fn check_invariants(&self) -> Result<()> {
        let l = self.len();
        for i in 0..l {
            if libm::fabs(self.get(i, i) - 1.0) > 1e-6 {
                return Err(Error::invariant(format!("diagonal entry {i} is not 1")));
            }
            for j in 0..l {
                let v = self.get(i, j);
                if !(-1e-9..=1.0 + 1e-6).contains(&v) {
                    return Err(Error::invariant(format!("entry ({i}, {j}) = {v} out of range")));
                }
                if libm::fabs(v - self.get(j, i)) > 1e-9 {
                    return Err(Error::invariant(format!("entry ({i}, {j}) not symmetric")));
                }
            }
        }
        Ok(())
    }
}

/// Evaluate the metric on every layer pair. The diagonal is exactly 1 and
/// each off-diagonal pair is computed once and mirrored.
pub fn similarity_matrix(reps: &[LayerRepresentation], spec: &MetricSpec) -> Result<SimilarityMatrix> {
    if reps.len() < 2 {
        return Err(Error::invalid("similarity matrix needs at least 2 layers"));
    }
    spec.validate()?;
    let prepared: Vec<Result<Prepared>> = map_indexed(reps.len(), |i| {
        spec.prepare(&reps[i].matrix, Some(reps[i].original_channels))
            .map_err(|e| e.context(&format!("layer {}", reps[i].layer_index)))
    });
    let prepared = prepared.into_iter().collect::<Result<Vec<_>>>()?;

    let l = reps.len();
    let pairs: Vec<(usize, usize)> = (0..l).flat_map(|i| (i + 1..l).map(move |j| (i, j))).collect();
    let values: Vec<Result<f64>> = map_indexed(pairs.len(), |p| {
        let (i, j) = pairs[p];
        spec.compare(&prepared[i], &prepared[j]).map_err(|e| {
            e.context(&format!(
                "layers {} and {}",
                reps[i].layer_index, reps[j].layer_index
            ))
        })
    });

    let mut out = Matrix::identity(l);
    for (&(i, j), v) in pairs.iter().zip(values) {
        let v = v?;
        out.set(i, j, v);
        out.set(j, i, v);
    }
    Ok(SimilarityMatrix {
        values: out,
        metric: *spec,
        layer_indices: reps.iter().map(|r| r.layer_index).collect(),
    })
}
