mod common;

use common::oracle::*;
use hintscout_core::blob::{decode, encode, TensorBlob};
use hintscout_core::cluster::{assign, kmeans, ClusterConfig, StopReason};
use hintscout_core::losses::{
    attention_map, hint_loss, logit_loss, soften, total_loss, HintPair, HintTransform, LossWeights,
};
use hintscout_core::repr::{normalize, pad_channels};
use hintscout_core::similarity::hsic;
use hintscout_core::{LayerRepresentation, Matrix, MetricSpec};
use proptest::prelude::*;
use rand::Rng;

fn blob_strategy() -> impl Strategy<Value = TensorBlob> {
    prop_oneof![
        (1usize..5, 1usize..5).prop_map(|(a, b)| vec![a, b]),
        (1usize..4, 1usize..4, 1usize..3, 1usize..3).prop_map(|(a, b, c, d)| vec![a, b, c, d]),
    ]
    .prop_flat_map(|shape| {
        let n: usize = shape.iter().product();
        (
            Just(shape),
            prop::collection::vec(any::<f32>().prop_filter("finite", |v| v.is_finite()), n),
        )
    })
    .prop_map(|(shape, data)| TensorBlob::new(shape, data).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn blob_round_trip_is_bit_exact(blob in blob_strategy()) {
        let bytes = encode(&blob).unwrap();
        prop_assert_eq!(bytes.len(), blob.encoded_len());
        let back = decode(&bytes).unwrap();
        let a: Vec<u32> = blob.data().iter().map(|v| v.to_bits()).collect();
        let b: Vec<u32> = back.data().iter().map(|v| v.to_bits()).collect();
        prop_assert_eq!(a, b);
        prop_assert_eq!(back.shape(), blob.shape());
        prop_assert_eq!(encode(&back).unwrap(), bytes);
    }

    #[test]
    fn linear_cka_rotation_and_scale_invariant(seed in any::<u64>(), a in 0.1f64..10.0) {
        let mut rng = rng(seed);
        let x = gaussian(&mut rng, 12, 3);
        let y = gaussian(&mut rng, 12, 4);
        let q = random_orthogonal(&mut rng, 3);
        let spec = MetricSpec::cka_linear();
        let base = spec.between(&x, &y).unwrap();
        let moved = spec.between(&matmul(&x, &q).scale(a), &y).unwrap();
        prop_assert!((base - moved).abs() < 1e-8);
        let swapped = spec.between(&y, &x).unwrap();
        prop_assert!((base - swapped).abs() < 1e-12);
        prop_assert!((-1e-12..=1.0 + 1e-6).contains(&base));
    }

    #[test]
    fn r2_cca_invertible_invariant(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let x = gaussian(&mut rng, 15, 3);
        let y = gaussian(&mut rng, 15, 3);
        let m = random_invertible(&mut rng, 3);
        let spec = MetricSpec::r2_cca();
        let base = spec.between(&x, &y).unwrap();
        let moved = spec.between(&matmul(&x, &m), &y).unwrap();
        prop_assert!((base - moved).abs() < 1e-8);
        prop_assert!((spec.between(&x, &matmul(&x, &m)).unwrap() - 1.0).abs() < 1e-8);
        prop_assert!((base - spec.between(&y, &x).unwrap()).abs() < 1e-12);
        prop_assert!((-1e-12..=1.0 + 1e-6).contains(&base));
    }

    #[test]
    fn hsic_of_psd_kernel_is_nonnegative(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let x = gaussian(&mut rng, 7, 3);
        let k = matmul(&x, &from_na(&to_na(&x).transpose()));
        prop_assert!(hsic(&k, &k).unwrap() >= -1e-12);
    }

    #[test]
    fn normalize_is_idempotent(seed in any::<u64>()) {
        let mut rng = rng(seed);
        let m = gaussian(&mut rng, 9, 4).scale(rng.random_range(0.1..50.0));
        let once = normalize(&m);
        let twice = normalize(&once);
        for (a, b) in once.data().iter().zip(twice.data()) {
            prop_assert!((a - b).abs() < 1e-9);
        }
        for mean in once.column_means() {
            prop_assert!(mean.abs() < 1e-9);
        }
    }

    #[test]
    fn soften_is_a_distribution(z in prop::collection::vec(-1e4f64..1e4, 1..20), t in 1.0f64..20.0) {
        let p = soften(&z, t).unwrap();
        prop_assert!(p.iter().all(|v| *v >= 0.0));
        prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn higher_temperature_is_softer(z in prop::collection::vec(-50f64..50.0, 2..10), t in 1.0f64..10.0, dt in 0.0f64..10.0) {
        prop_assume!(z.iter().any(|v| *v != z[0]));
        let max = |p: Vec<f64>| p.into_iter().fold(0.0, f64::max);
        prop_assert!(max(soften(&z, t + dt).unwrap()) <= max(soften(&z, t).unwrap()) + 1e-12);
    }

    #[test]
    fn logit_loss_nonnegative_and_shift_invariant(
        zs in prop::collection::vec(-20f64..20.0, 5),
        zt in prop::collection::vec(-20f64..20.0, 5),
        c in -100f64..100.0,
        t in 1.0f64..8.0,
    ) {
        let base = logit_loss(&zs, &zt, t).unwrap();
        prop_assert!(base >= 0.0);
        let shifted: Vec<f64> = zs.iter().map(|v| v + c).collect();
        prop_assert!((logit_loss(&shifted, &zt, t).unwrap() - base).abs() < 1e-9);
        prop_assert_eq!(logit_loss(&zt, &zt, t).unwrap(), 0.0);
    }

    #[test]
    fn total_loss_is_linear_in_each_weight(seed in any::<u64>(), g in 0.0f64..3.0, a in 0.0f64..3.0, b in 0.1f64..3.0) {
        let mut rng = rng(seed);
        let zs: Vec<f64> = (0..4).map(|_| rng.random_range(-3.0..3.0)).collect();
        let zt: Vec<f64> = (0..4).map(|_| rng.random_range(-3.0..3.0)).collect();
        let feat = |rng: &mut rand::rngs::StdRng| {
            TensorBlob::new(vec![2, 3, 2, 2], (0..24).map(|_| rng.random_range(-1.0f32..1.0)).collect()).unwrap()
        };
        let (ft, fs) = (feat(&mut rng), feat(&mut rng));
        let pairs = [HintPair { teacher: &ft, student: &fs, transform: HintTransform::AttentionMapP1 }];
        let w = LossWeights::new(g, a, b, 4.0).unwrap();
        let doubled = LossWeights { beta: 2.0 * b, ..w };
        let hint = hint_loss(&pairs).unwrap();
        let base = total_loss(&zs, &zt, 1, &pairs, &w).unwrap();
        let more = total_loss(&zs, &zt, 1, &pairs, &doubled).unwrap();
        prop_assert!((more - base - b * hint).abs() < 1e-9);
    }

    #[test]
    fn attention_maps_unit_norm_and_scale_invariant(seed in any::<u64>(), s in 0.1f32..10.0) {
        let mut rng = rng(seed);
        let data: Vec<f32> = (0..3 * 2 * 3 * 3).map(|_| rng.random_range(-1.0f32..1.0)).collect();
        let f = TensorBlob::new(vec![3, 2, 3, 3], data.clone()).unwrap();
        let scaled = TensorBlob::new(vec![3, 2, 3, 3], data.iter().map(|v| v * s).collect()).unwrap();
        let m = attention_map(&f, 1.0).unwrap();
        for i in 0..3 {
            let n: f64 = m.row(i).iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!((n - 1.0).abs() < 1e-7);
        }
        let pair = HintPair { teacher: &f, student: &scaled, transform: HintTransform::AttentionMapP1 };
        prop_assert!(hint_loss(&[pair]).unwrap() < 1e-6);
    }
}

fn random_reps(rng: &mut rand::rngs::StdRng, l: usize) -> Vec<LayerRepresentation> {
    let reps = (0..l)
        .map(|i| {
            let c = rng.random_range(2..5);
            LayerRepresentation::new(i + 1, gaussian(rng, 14, c)).unwrap()
        })
        .collect();
    pad_channels(reps).unwrap()
}

#[test]
fn converged_labels_are_a_fixed_point() {
    let mut rng = rng(31);
    for spec in [MetricSpec::cka_linear(), MetricSpec::r2_cca()] {
        for _ in 0..20 {
            let reps = random_reps(&mut rng, 7);
            let a = kmeans(&reps, &ClusterConfig::new(3, spec)).unwrap();
            if a.converged {
                assert_eq!(assign(&reps, &a.centroids, &spec).unwrap(), a.labels);
            }
            assert!(a.cost.is_finite() && a.cost >= -1e-12);
            assert_eq!(*a.cost_history.last().unwrap(), a.cost);
            for id in 1..=3 {
                assert!(!a.members(id).is_empty());
            }
        }
    }
}

#[test]
fn result_ignores_layer_numbering() {
    let mut rng = rng(32);
    let reps = random_reps(&mut rng, 6);
    let renamed: Vec<_> = reps
        .iter()
        .cloned()
        .map(|mut r| {
            r.layer_index += 100;
            r
        })
        .collect();
    let cfg = ClusterConfig::new(2, MetricSpec::cka_linear());
    let a = kmeans(&reps, &cfg).unwrap();
    let b = kmeans(&renamed, &cfg).unwrap();
    assert_eq!(a.labels, b.labels);
    assert_eq!(a.cost, b.cost);
}

#[test]
fn guard_and_iteration_cap() {
    let mut rng = rng(33);
    let mut saw_guard = false;
    for _ in 0..200 {
        let reps = random_reps(&mut rng, 8);
        let mut cfg = ClusterConfig::new(3, MetricSpec::r2_cca());
        let guarded = kmeans(&reps, &cfg).unwrap();
        for w in guarded.cost_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-9);
        }
        if guarded.stop_reason == StopReason::CostIncrease {
            saw_guard = true;
            assert!(!guarded.converged);
            cfg.cost_guard = false;
            let plain = kmeans(&reps, &cfg).unwrap();
            assert!(plain.cost_history.windows(2).any(|w| w[1] > w[0]));
        }
        cfg.max_iterations = 1;
        cfg.cost_guard = false;
        let capped = kmeans(&reps, &cfg).unwrap();
        assert!(capped.iterations_run <= 1);
        if !capped.converged {
            assert_eq!(capped.stop_reason, StopReason::MaxIterations);
        }
    }
    assert!(saw_guard, "no instance exercised the cost guard");
}

#[test]
fn kmeans_rejects_bad_k() {
    let mut rng = rng(34);
    let reps = random_reps(&mut rng, 3);
    assert!(kmeans(&reps, &ClusterConfig::new(4, MetricSpec::cka_linear())).is_err());
    assert!(kmeans(&reps, &ClusterConfig::new(1, MetricSpec::cka_linear())).is_err());
}

#[test]
fn constant_matrix_degenerates_cleanly() {
    let m = Matrix::from_fn(6, 2, |_, j| j as f64);
    let rep = LayerRepresentation::new(1, m).unwrap();
    let other = LayerRepresentation::new(2, Matrix::from_fn(6, 2, |i, j| (i * j) as f64 + i as f64)).unwrap();
    let err = kmeans(&[rep, other], &ClusterConfig::new(2, MetricSpec::cka_linear())).unwrap_err();
    assert!(matches!(err, hintscout_core::Error::Degenerate(_)));
}
