//! Per-layer representation matrices.
//!
//! A rank-4 activation `N x C x H x W` is averaged over `H` and `W` to give
//! an `N x C` matrix. Layers of different widths are zero-padded to a
//! common width so k-means can average them; the original channel count is
//! kept because the CCA metric needs it.

use alloc::format;
use alloc::vec::Vec;

use crate::blob::TensorBlob;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Samples used per layer when a dump holds more.
pub const DEFAULT_SAMPLE_BUDGET: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct LayerRepresentation {
    /// 1-based position of the layer in the model.
    pub layer_index: usize,
    pub matrix: Matrix,
    pub original_channels: usize,
    pub normalized: bool,
}

impl LayerRepresentation {
    pub fn new(layer_index: usize, matrix: Matrix) -> Result<Self> {
        if matrix.rows() < 2 {
            return Err(Error::shape(format!(
                "layer {layer_index}: need at least 2 samples, got {}",
                matrix.rows()
            )));
        }
        if matrix.cols() == 0 {
            return Err(Error::shape(format!("layer {layer_index}: no channels")));
        }
        if !matrix.is_finite() {
            return Err(Error::invalid(format!("layer {layer_index}: non-finite entries")));
        }
        Ok(Self {
            layer_index,
            original_channels: matrix.cols(),
            matrix,
            normalized: false,
        })
    }

    pub fn samples(&self) -> usize {
        self.matrix.rows()
    }

    /// Padded width.
    pub fn width(&self) -> usize {
        self.matrix.cols()
    }

    pub fn normalized(self) -> Self {
        Self {
            matrix: normalize(&self.matrix),
            normalized: true,
            ..self
        }
    }

    /// Keep at most `budget` leading samples.
    pub fn subsample(self, budget: usize) -> Result<Self> {
        if self.samples() <= budget {
            return Ok(self);
        }
        if budget < 2 {
            return Err(Error::invalid("sample budget must be at least 2"));
        }
        Ok(Self {
            matrix: self.matrix.truncate_rows(budget),
            ..self
        })
    }
}

/// Spatially average a rank-4 blob into `N x C`; rank-2 blobs pass through.
pub fn represent(blob: &TensorBlob) -> Result<Matrix> {
    let shape = blob.shape();
    let data = blob.data();
    match shape.len() {
        2 => Matrix::new(shape[0], shape[1], data.iter().map(|&v| v as f64).collect()),
        4 => {
            let (n, c) = (shape[0], shape[1]);
            let hw = shape[2] * shape[3];
            let mut out = Vec::with_capacity(n * c);
            for plane in data.chunks_exact(hw) {
                let sum: f64 = plane.iter().map(|&v| v as f64).sum();
                out.push(sum / hw as f64);
            }
            Matrix::new(n, c, out)
        }
        r => Err(Error::shape(format!("rank {r} not supported"))),
    }
}

/// Column-wise z-score over the samples using the `N - 1` standard
/// deviation. Constant columns become zero.
pub fn normalize(m: &Matrix) -> Matrix {
    let n = m.rows();
    let means = m.column_means();
    let mut scale = alloc::vec![0.0; m.cols()];
    let mut magnitude = alloc::vec![0.0f64; m.cols()];
    for i in 0..n {
        for (j, v) in m.row(i).iter().enumerate() {
            let d = v - means[j];
            scale[j] += d * d;
            magnitude[j] = magnitude[j].max(libm::fabs(*v));
        }
    }
    let denom = (n.max(2) - 1) as f64;
    for (s, mag) in scale.iter_mut().zip(&magnitude) {
        let sd = libm::sqrt(*s / denom);
        *s = if sd <= 1e-12 * mag.max(1.0) { 0.0 } else { 1.0 / sd };
    }
    Matrix::from_fn(n, m.cols(), |i, j| (m.get(i, j) - means[j]) * scale[j])
}

/// Zero-pad every layer to the widest channel count.
pub fn pad_channels(reps: Vec<LayerRepresentation>) -> Result<Vec<LayerRepresentation>> {
    let Some(first) = reps.first() else {
        return Ok(reps);
    };
    let n = first.samples();
    if let Some(bad) = reps.iter().find(|r| r.samples() != n) {
        return Err(Error::shape(format!(
            "sample count mismatch: layer {} has {n}, layer {} has {}",
            first.layer_index,
            bad.layer_index,
            bad.samples()
        )));
    }
    let width = reps.iter().map(|r| r.width()).max().unwrap_or(0);
    reps.into_iter()
        .map(|r| {
            Ok(LayerRepresentation {
                matrix: r.matrix.pad_columns(width)?,
                ..r
            })
        })
        .collect()
}
