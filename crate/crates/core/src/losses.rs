//! Reference distillation losses.
//!
//! ```text
//! p_i      = exp(z_i / T) / Σ_j exp(z_j / T)
//! L_total  = γ L_cls + α L_logit + β L_hint
//! L_logit  = T² KL(p^T ‖ p^S)
//! L_hint   = Σ_i L(F(S_i), F(T_i))
//! ```
//!
//! Every reduction sums in a fixed order so repeated evaluations are
//! bit-identical.

use alloc::format;
use alloc::vec::Vec;

use crate::blob::TensorBlob;
use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Weights of the combined objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub gamma: f64,
    pub alpha: f64,
    pub beta: f64,
    /// Trade-off of the two-term KD objective; see [`LossWeights::from_tradeoff`].
    pub lambda: f64,
    pub temperature: f64,
    /// Multiply the KL term by `T²`.
    pub scale_logit_by_t_squared: bool,
}

impl LossWeights {
    pub fn new(gamma: f64, alpha: f64, beta: f64, temperature: f64) -> Result<Self> {
        let w = Self {
            gamma,
            alpha,
            beta,
            lambda: 0.0,
            temperature,
            scale_logit_by_t_squared: true,
        };
        w.validate()?;
        Ok(w)
    }

    /// `(1 - λ) L_cls + λ L_logit`, no hint term.
    pub fn from_tradeoff(lambda: f64, temperature: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::invalid(format!("lambda {lambda} outside [0, 1]")));
        }
        let w = Self {
            gamma: 1.0 - lambda,
            alpha: lambda,
            beta: 0.0,
            lambda,
            temperature,
            scale_logit_by_t_squared: true,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("gamma", self.gamma), ("alpha", self.alpha), ("beta", self.beta)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if self.gamma == 0.0 && self.alpha == 0.0 && self.beta == 0.0 {
            return Err(Error::invalid("at least one loss weight must be positive"));
        }
        check_temperature(self.temperature)
    }
}

fn check_temperature(t: f64) -> Result<()> {
    if !(t.is_finite() && t >= 1.0) {
        return Err(Error::invalid(format!("temperature must be >= 1, got {t}")));
    }
    Ok(())
}

fn check_logits(z: &[f64]) -> Result<()> {
    if z.is_empty() {
        return Err(Error::invalid("empty logit vector"));
    }
    if let Some(index) = z.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index });
    }
    Ok(())
}

fn log_softmax(z: &[f64], t: f64) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let shifted: Vec<f64> = z.iter().map(|v| (v - max) / t).collect();
    let lse = libm::log(shifted.iter().map(|v| libm::exp(*v)).sum::<f64>());
    shifted.into_iter().map(|v| v - lse).collect()
}

/// Temperature-softened class probabilities.
pub fn soften(z: &[f64], t: f64) -> Result<Vec<f64>> {
    check_logits(z)?;
    check_temperature(t)?;
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| libm::exp((v - max) / t)).collect();
    let sum: f64 = e.iter().sum();
    Ok(e.into_iter().map(|v| v / sum).collect())
}

/// `KL(soften(zt) ‖ soften(zs))`, unscaled.
pub fn softened_kl(zs: &[f64], zt: &[f64], t: f64) -> Result<f64> {
    check_logits(zs)?;
    check_logits(zt)?;
    check_temperature(t)?;
    if zs.len() != zt.len() {
        return Err(Error::shape(format!(
            "logit lengths differ: student {}, teacher {}",
            zs.len(),
            zt.len()
        )));
    }
    let ls = log_softmax(zs, t);
    let lt = log_softmax(zt, t);
    let kl: f64 = lt
        .iter()
        .zip(&ls)
        .map(|(&a, &b)| {
            let p = libm::exp(a);
            if p == 0.0 {
                0.0
            } else {
                p * (a - b)
            }
        })
        .sum();
    Ok(kl.max(0.0))
}

/// Logit distillation loss, `T² KL(p^T ‖ p^S)`.
pub fn logit_loss(zs: &[f64], zt: &[f64], t: f64) -> Result<f64> {
    Ok(softened_kl(zs, zt, t)? * t * t)
}

/// Cross-entropy of the student's `T = 1` softmax against a class label.
pub fn classification_loss(zs: &[f64], label: usize) -> Result<f64> {
    check_logits(zs)?;
    if label >= zs.len() {
        return Err(Error::invalid(format!(
            "label {label} out of range for {} classes",
            zs.len()
        )));
    }
    Ok(-log_softmax(zs, 1.0)[label])
}

/// Per-sample `Σ_c |A_c|^p`, flattened over `H x W` and scaled to unit
/// Euclidean norm.
pub fn attention_map(feature: &TensorBlob, p: f64) -> Result<Matrix> {
    if feature.rank() != 4 {
        return Err(Error::shape(format!(
            "attention maps need N x C x H x W, got rank {}",
            feature.rank()
        )));
    }
    if !(p.is_finite() && p > 0.0) {
        return Err(Error::invalid(format!("p must be positive, got {p}")));
    }
    let (n, c, hw) = (feature.samples(), feature.channels(), feature.spatial());
    let data = feature.data();
    let mut out = Matrix::zeros(n, hw);
    for s in 0..n {
        let mut map = alloc::vec![0.0f64; hw];
        for ch in 0..c {
            let plane = &data[(s * c + ch) * hw..(s * c + ch + 1) * hw];
            for (m, &v) in map.iter_mut().zip(plane) {
                let a = libm::fabs(v as f64);
                *m += if p == 1.0 { a } else { libm::pow(a, p) };
            }
        }
        let norm = libm::sqrt(map.iter().map(|v| v * v).sum::<f64>());
        if norm == 0.0 {
            return Err(Error::degenerate(format!("all-zero feature map for sample {s}")));
        }
        for (k, v) in map.into_iter().enumerate() {
            out.set(s, k, v / norm);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HintTransform {
    /// Attention transfer with `p = 1`: mean over samples of the Euclidean
    /// distance between unit-norm attention maps.
    AttentionMapP1,
    /// Mean squared error on features already aligned upstream.
    IdentityMse,
}

#[derive(Debug, Clone, Copy)]
pub struct HintPair<'a> {
    pub teacher: &'a TensorBlob,
    pub student: &'a TensorBlob,
    pub transform: HintTransform,
}

fn pair_loss(pair: &HintPair<'_>) -> Result<f64> {
    let (t, s) = (pair.teacher, pair.student);
    if t.samples() != s.samples() {
        return Err(Error::shape(format!(
            "teacher has {} samples, student {}",
            t.samples(),
            s.samples()
        )));
    }
    match pair.transform {
        HintTransform::AttentionMapP1 => {
            let at = attention_map(t, 1.0)?;
            let as_ = attention_map(s, 1.0)?;
            if at.cols() != as_.cols() {
                return Err(Error::shape(format!(
                    "attention maps differ in size: teacher {}, student {}",
                    at.cols(),
                    as_.cols()
                )));
            }
            let n = at.rows();
            let total: f64 = (0..n)
                .map(|i| {
                    let d: f64 = at
                        .row(i)
                        .iter()
                        .zip(as_.row(i))
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum();
                    libm::sqrt(d)
                })
                .sum();
            Ok(total / n as f64)
        }
        HintTransform::IdentityMse => {
            if t.shape() != s.shape() {
                return Err(Error::shape(format!(
                    "feature shapes differ: teacher {:?}, student {:?}",
                    t.shape(),
                    s.shape()
                )));
            }
            let sum: f64 = t
                .data()
                .iter()
                .zip(s.data())
                .map(|(&a, &b)| {
                    let d = a as f64 - b as f64;
                    d * d
                })
                .sum();
            Ok(sum / t.data().len() as f64)
        }
    }
}

/// Sum of per-pair hint losses.
pub fn hint_loss(pairs: &[HintPair<'_>]) -> Result<f64> {
    let mut total = 0.0;
    for (i, pair) in pairs.iter().enumerate() {
        total += pair_loss(pair).map_err(|e| e.context(&format!("hint pair {i}")))?;
    }
    Ok(total)
}

/// `γ L_cls + α L_logit + β L_hint`. Terms with zero weight are skipped.
pub fn total_loss(
    zs: &[f64],
    zt: &[f64],
    label: usize,
    pairs: &[HintPair<'_>],
    w: &LossWeights,
) -> Result<f64> {
    w.validate()?;
    let mut total = 0.0;
    if w.gamma != 0.0 {
        total += w.gamma * classification_loss(zs, label)?;
    }
    if w.alpha != 0.0 {
        let kl = softened_kl(zs, zt, w.temperature)?;
        let scale = if w.scale_logit_by_t_squared {
            w.temperature * w.temperature
        } else {
            1.0
        };
        total += w.alpha * kl * scale;
    }
    if w.beta != 0.0 {
        total += w.beta * hint_loss(pairs)?;
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompressionReport {
    /// `100 (1 - student / teacher)`.
    pub compression_ratio_percent: f64,
    /// `teacher_ms / student_ms`.
    pub speed_up: f64,
}

pub fn compression_report(
    teacher_params: f64,
    student_params: f64,
    teacher_ms: f64,
    student_ms: f64,
) -> Result<CompressionReport> {
    for (name, v) in [
        ("teacher_params", teacher_params),
        ("student_params", student_params),
        ("teacher_ms", teacher_ms),
        ("student_ms", student_ms),
    ] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::invalid(format!("{name} must be positive, got {v}")));
        }
    }
    Ok(CompressionReport {
        compression_ratio_percent: 100.0 * (1.0 - student_params / teacher_params),
        speed_up: teacher_ms / student_ms,
    })
}

/// Round to `digits` significant figures.
pub fn round_significant(x: f64, digits: u32) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let magnitude = libm::floor(libm::log10(libm::fabs(x))) as i32;
    let scale = libm::pow(10.0, (digits as i32 - 1 - magnitude) as f64);
    libm::round(x * scale) / scale
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn soften_examples() {
        assert_eq!(soften(&[0.0, 0.0], 3.0).unwrap(), vec![0.5, 0.5]);
        let e = core::f64::consts::E;
        let p = soften(&[2.0, 0.0], 2.0).unwrap();
        assert!((p[0] - e / (e + 1.0)).abs() < 1e-15);
        assert!((p[1] - 1.0 / (e + 1.0)).abs() < 1e-15);
        let p = soften(&[1000.0, 0.0], 1.0).unwrap();
        assert!(p.iter().all(|v| v.is_finite()));
        assert!((p[0] - 1.0).abs() < 1e-15 && p[1] < 1e-300);
        assert!(soften(&[], 1.0).is_err());
        assert!(soften(&[1.0], 0.5).is_err());
    }

    #[test]
    fn kl_closed_form() {
        // p = [e², 1]/(e² + 1), q = [.5, .5]
        let e2 = libm::exp(2.0);
        let p = [e2 / (e2 + 1.0), 1.0 / (e2 + 1.0)];
        let expect: f64 = p.iter().map(|pi| pi * libm::log(pi / 0.5)).sum();
        let got = logit_loss(&[0.0, 0.0], &[2.0, 0.0], 1.0).unwrap();
        assert!((got - expect).abs() < 1e-14);
        assert_eq!(logit_loss(&[1.0, 2.0], &[1.0, 2.0], 4.0).unwrap(), 0.0);
        assert!(logit_loss(&[1.0], &[1.0, 2.0], 1.0).is_err());
    }

    #[test]
    fn cross_entropy_examples() {
        let ln2 = core::f64::consts::LN_2;
        assert!((classification_loss(&[0.0, 0.0], 0).unwrap() - ln2).abs() < 1e-15);
        assert!(classification_loss(&[50.0, 0.0, 0.0], 0).unwrap() < 1e-20);
        assert!(classification_loss(&[0.0, 0.0], 2).is_err());
    }

    #[test]
    fn single_channel_attention() {
        let f = TensorBlob::new(vec![1, 1, 2, 2], vec![1.0, 0.0, 0.0, -1.0]).unwrap();
        let m = attention_map(&f, 1.0).unwrap();
        let h = core::f64::consts::FRAC_1_SQRT_2;
        for (got, want) in m.row(0).iter().zip([h, 0.0, 0.0, h]) {
            assert!((got - want).abs() < 1e-15);
        }
        let zero = TensorBlob::new(vec![1, 2, 1, 2], vec![0.0; 4]).unwrap();
        assert!(matches!(attention_map(&zero, 1.0), Err(Error::Degenerate(_))));
    }

    #[test]
    fn mse_pair() {
        let a = TensorBlob::new(vec![1, 2], vec![1.0, 2.0]).unwrap();
        let b = TensorBlob::new(vec![1, 2], vec![2.0, 4.0]).unwrap();
        let pair = HintPair {
            teacher: &a,
            student: &b,
            transform: HintTransform::IdentityMse,
        };
        assert_eq!(hint_loss(&[pair]).unwrap(), 2.5);
    }

    #[test]
    fn tradeoff_weights() {
        let w = LossWeights::from_tradeoff(0.9, 4.0).unwrap();
        assert!((w.gamma - 0.1).abs() < 1e-15 && w.alpha == 0.9 && w.beta == 0.0);
        assert!(LossWeights::from_tradeoff(1.5, 4.0).is_err());
        assert!(LossWeights::new(0.0, 0.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn compression_rows() {
        let r = compression_report(1.74e6, 278.32e3, 24.66, 5.84).unwrap();
        assert_eq!(round_significant(r.compression_ratio_percent, 3), 84.0);
        assert_eq!(round_significant(r.speed_up, 3), 4.22);
        let same = compression_report(5.0, 5.0, 2.0, 2.0).unwrap();
        assert_eq!((same.compression_ratio_percent, same.speed_up), (0.0, 1.0));
        assert!(compression_report(0.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn significant_rounding() {
        assert_eq!(round_significant(4.2226, 3), 4.22);
        assert_eq!(round_significant(0.0012345, 2), 0.0012);
        assert_eq!(round_significant(2138.0, 3), 2140.0);
    }
}
