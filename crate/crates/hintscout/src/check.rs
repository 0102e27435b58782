//! Built-in self-test for the distillation kernels.

use std::f64::consts::{E, LN_2, SQRT_2};

use hintscout_core::losses::{
    attention_map, classification_loss, compression_report, hint_loss, logit_loss, round_significant, soften,
    total_loss, HintPair, HintTransform, LossWeights,
};
use hintscout_core::TensorBlob;

/// Deliberate corruption used to prove that the self-test can fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Fault {
    #[default]
    None,
    /// `soften` stops normalizing.
    Soften,
}

impl Fault {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "none" => Some(Fault::None),
            "soften" => Some(Fault::Soften),
            _ => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub error: Option<String>,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.error.is_none()
    }
}

type CheckResult = Result<(), String>;

fn close(what: &str, got: f64, want: f64, tol: f64) -> CheckResult {
    if (got - want).abs() <= tol {
        Ok(())
    } else {
        Err(format!("{what}: got {got}, expected {want} (tolerance {tol:e})"))
    }
}

fn ok<T>(r: hintscout_core::Result<T>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn blob(shape: &[usize], data: Vec<f32>) -> TensorBlob {
    TensorBlob::new(shape.to_vec(), data).expect("fixture blob is valid")
}

fn feature(seed: u32) -> TensorBlob {
    // small deterministic pattern, never all zero per sample
    let data = (0..24u32)
        .map(|i| (((i * 7 + seed * 13) % 11) as f32 - 4.5) / 3.0)
        .collect();
    blob(&[2, 3, 2, 2], data)
}

fn run_checks(fault: Fault) -> Vec<(&'static str, CheckResult)> {
    let soft = |z: &[f64], t: f64| -> Result<Vec<f64>, String> {
        let mut p = ok(soften(z, t))?;
        if fault == Fault::Soften {
            p.iter_mut().for_each(|v| *v *= 1.5);
        }
        Ok(p)
    };
    let mut out: Vec<(&'static str, CheckResult)> = Vec::new();

    out.push((
        "soften sums to 1",
        (|| {
            for (z, t) in [
                (vec![3.0, -1.0, 0.5, 8.0], 1.0),
                (vec![1e3, -1e3, 0.0], 4.0),
                (vec![0.2], 2.0),
            ] {
                close("sum", soft(&z, t)?.iter().sum(), 1.0, 1e-9)?;
            }
            Ok(())
        })(),
    ));
    out.push((
        "soften of equal logits is uniform",
        (|| {
            let p = soft(&[0.0, 0.0], 3.0)?;
            close("p[0]", p[0], 0.5, 1e-15)?;
            close("p[1]", p[1], 0.5, 1e-15)
        })(),
    ));
    out.push((
        "soften divides logits by T",
        (|| {
            let p = soft(&[2.0, 0.0], 2.0)?;
            close("p[0]", p[0], E / (E + 1.0), 1e-12)?;
            close("p[1]", p[1], 1.0 / (E + 1.0), 1e-12)
        })(),
    ));
    out.push((
        "soften survives large logits",
        (|| {
            let p = soft(&[1000.0, 0.0], 1.0)?;
            if p.iter().any(|v| !v.is_finite()) {
                return Err(format!("non-finite output {p:?}"));
            }
            close("p[0]", p[0], 1.0, 1e-12)
        })(),
    ));
    out.push((
        "logit loss of identical logits is 0",
        (|| {
            close(
                "loss",
                ok(logit_loss(&[1.0, -2.0, 0.5], &[1.0, -2.0, 0.5], 4.0))?,
                0.0,
                0.0,
            )
        })(),
    ));
    out.push((
        "logit loss matches closed-form KL",
        (|| {
            let pt = [E * E / (E * E + 1.0), 1.0 / (E * E + 1.0)];
            let want: f64 = pt.iter().map(|p| p * (p / 0.5).ln()).sum();
            close(
                "loss",
                ok(logit_loss(&[0.0, 0.0], &[2.0, 0.0], 1.0))?,
                want,
                1e-12,
            )
        })(),
    ));
    out.push((
        "logit loss ignores constant shifts",
        (|| {
            let base = ok(logit_loss(&[0.3, 1.2, -0.4], &[1.0, 0.0, 2.0], 3.0))?;
            close(
                "shifted",
                ok(logit_loss(&[5.3, 6.2, 4.6], &[1.0, 0.0, 2.0], 3.0))?,
                base,
                1e-12,
            )?;
            close(
                "shifted teacher",
                ok(logit_loss(&[0.3, 1.2, -0.4], &[-9.0, -10.0, -8.0], 3.0))?,
                base,
                1e-12,
            )
        })(),
    ));
    out.push((
        "cross-entropy of equal logits is ln 2",
        (|| close("loss", ok(classification_loss(&[0.0, 0.0], 0))?, LN_2, 1e-15))(),
    ));
    out.push((
        "cross-entropy of a confident correct guess is ~0",
        (|| {
            close(
                "loss",
                ok(classification_loss(&[100.0, 0.0, 0.0], 0))?,
                0.0,
                1e-12,
            )
        })(),
    ));
    out.push((
        "cross-entropy is positive",
        (|| {
            let l = ok(classification_loss(&[3.0, 1.0, 0.2], 0))?;
            if l > 0.0 {
                Ok(())
            } else {
                Err(format!("got {l}"))
            }
        })(),
    ));
    out.push((
        "attention map of a single channel",
        (|| {
            let m = ok(attention_map(&blob(&[1, 1, 2, 2], vec![1.0, 0.0, 0.0, 1.0]), 1.0))?;
            let want = [1.0 / SQRT_2, 0.0, 0.0, 1.0 / SQRT_2];
            for (g, w) in m.row(0).iter().zip(want) {
                close("entry", *g, w, 1e-12)?;
            }
            Ok(())
        })(),
    ));
    out.push((
        "attention map of a constant is uniform",
        (|| {
            let m = ok(attention_map(&blob(&[1, 2, 3, 3], vec![0.7; 18]), 1.0))?;
            m.row(0)
                .iter()
                .try_for_each(|v| close("entry", *v, 1.0 / 3.0, 1e-12))
        })(),
    ));
    out.push((
        "hint loss of identical features is 0",
        (|| {
            let f = feature(1);
            for transform in [HintTransform::AttentionMapP1, HintTransform::IdentityMse] {
                close(
                    "loss",
                    ok(hint_loss(&[HintPair {
                        teacher: &f,
                        student: &f,
                        transform,
                    }]))?,
                    0.0,
                    1e-12,
                )?;
            }
            Ok(())
        })(),
    ));
    out.push((
        "attention hint loss ignores scale",
        (|| {
            let f = feature(2);
            let scaled = blob(f.shape(), f.data().iter().map(|v| v * 3.0).collect());
            let pair = HintPair {
                teacher: &f,
                student: &scaled,
                transform: HintTransform::AttentionMapP1,
            };
            close("loss", ok(hint_loss(&[pair]))?, 0.0, 1e-7)
        })(),
    ));
    out.push((
        "hint loss adds over pairs",
        (|| {
            let (a, b, c) = (feature(3), feature(4), feature(5));
            let p1 = HintPair {
                teacher: &a,
                student: &b,
                transform: HintTransform::AttentionMapP1,
            };
            let p2 = HintPair {
                teacher: &b,
                student: &c,
                transform: HintTransform::IdentityMse,
            };
            let sum = ok(hint_loss(&[p1]))? + ok(hint_loss(&[p2]))?;
            close("loss", ok(hint_loss(&[p1, p2]))?, sum, 1e-9)
        })(),
    ));
    out.push((
        "total loss with only gamma is cross-entropy",
        (|| {
            let (zs, zt) = ([0.4, -0.3, 1.1], [1.0, 0.2, 0.0]);
            let w = ok(LossWeights::new(1.0, 0.0, 0.0, 4.0))?;
            close(
                "loss",
                ok(total_loss(&zs, &zt, 2, &[], &w))?,
                ok(classification_loss(&zs, 2))?,
                0.0,
            )
        })(),
    ));
    out.push((
        "total loss keeps only cross-entropy when student matches",
        (|| {
            let z = [0.4, -0.3, 1.1];
            let f = feature(6);
            let pair = HintPair {
                teacher: &f,
                student: &f,
                transform: HintTransform::AttentionMapP1,
            };
            let w = ok(LossWeights::new(0.5, 0.5, 0.5, 4.0))?;
            close(
                "loss",
                ok(total_loss(&z, &z, 1, &[pair], &w))?,
                0.5 * ok(classification_loss(&z, 1))?,
                1e-12,
            )
        })(),
    ));
    out.push((
        "total loss is linear in beta",
        (|| {
            let (zs, zt) = ([0.4, -0.3, 1.1], [1.0, 0.2, 0.0]);
            let (a, b) = (feature(7), feature(8));
            let pair = [HintPair {
                teacher: &a,
                student: &b,
                transform: HintTransform::AttentionMapP1,
            }];
            let w = ok(LossWeights::new(1.0, 0.9, 1.0, 4.0))?;
            let w2 = LossWeights { beta: 2.0, ..w };
            let gain = ok(total_loss(&zs, &zt, 0, &pair, &w2))? - ok(total_loss(&zs, &zt, 0, &pair, &w))?;
            close("doubled beta adds", gain, ok(hint_loss(&pair))?, 1e-9)
        })(),
    ));
    out.push((
        "compression report of identical models",
        (|| {
            let r = ok(compression_report(1e6, 1e6, 10.0, 10.0))?;
            close(
                "ratio",
                round_significant(r.compression_ratio_percent, 3),
                0.0,
                0.0,
            )?;
            close("speed-up", round_significant(r.speed_up, 3), 1.0, 0.0)
        })(),
    ));
    out
}

/// Run every check; the caller decides how to report failures.
pub fn check_losses(fault: Fault) -> Vec<CheckOutcome> {
    run_checks(fault)
        .into_iter()
        .map(|(name, r)| CheckOutcome { name, error: r.err() })
        .collect()
}
