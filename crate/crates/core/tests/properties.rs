//! Property tests for the algebraic invariants.

use pcav::clarc::{aclarc_map, pclarc_map};
use pcav::concepts::{fit_pattern_cav, nearest_neighbors, HookPoint, LabelSource};
use pcav::datasets::{
    gen_pattern_classes, poison_clever_hans, ArtifactSpec, PatternClassesConfig, Split,
};
use pcav::numerics::{cosine_similarity, dot, norm, Rng, Tensor};
use proptest::prelude::*;

fn finite_vec(len: usize) -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(-100.0f64..100.0, len)
}

fn nonzero_vec(len: usize) -> impl Strategy<Value = Vec<f64>> {
    finite_vec(len).prop_filter("nonzero", |v| norm(v) > 1e-6)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cosine_symmetric_and_scale_invariant(
        a in nonzero_vec(6),
        b in nonzero_vec(6),
        alpha in 0.001f64..1000.0,
        beta in 0.001f64..1000.0,
    ) {
        let ab = cosine_similarity(&a, &b).unwrap();
        let ba = cosine_similarity(&b, &a).unwrap();
        prop_assert!((ab - ba).abs() < 1e-12);
        let a_scaled: Vec<f64> = a.iter().map(|x| x * alpha).collect();
        let b_scaled: Vec<f64> = b.iter().map(|x| x * beta).collect();
        let scaled = cosine_similarity(&a_scaled, &b_scaled).unwrap();
        prop_assert!((ab - scaled).abs() < 1e-12, "{ab} vs {scaled}");
    }

    #[test]
    fn pattern_direction_scale_invariant(
        seed in 0u64..1000,
        alpha in 0.01f64..100.0,
        n in 4usize..40,
    ) {
        let mut rng = Rng::from_seed(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let y = if i % 2 == 0 { 1.0 } else { -1.0 };
                (0..5).map(|_| rng.gaussian(y, 1.0)).collect()
            })
            .collect();
        let y: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let x = Tensor::from_rows(&rows).unwrap();
        let scaled_rows: Vec<Vec<f64>> =
            rows.iter().map(|r| r.iter().map(|v| v * alpha).collect()).collect();
        let xs = Tensor::from_rows(&scaled_rows).unwrap();
        let cv = fit_pattern_cav(&x, &y, HookPoint::Input, LabelSource::GroundTruth, 1e-12);
        let cvs = fit_pattern_cav(&xs, &y, HookPoint::Input, LabelSource::GroundTruth, 1e-12);
        if let (Ok(cv), Ok(cvs)) = (cv, cvs) {
            for (a, b) in cv.v.iter().zip(&cvs.v) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn pattern_raw_is_half_mean_gap_for_balanced_labels(
        seed in 0u64..1000,
        half in 2usize..20,
    ) {
        let mut rng = Rng::from_seed(seed);
        let n = 2 * half;
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let y = if i < half { 1.0 } else { -1.0 };
                (0..4).map(|_| rng.gaussian(0.3 * y, 2.0)).collect()
            })
            .collect();
        let y: Vec<f64> = (0..n).map(|i| if i < half { 1.0 } else { -1.0 }).collect();
        let x = Tensor::from_rows(&rows).unwrap();
        if let Ok(cv) = fit_pattern_cav(&x, &y, HookPoint::Input, LabelSource::GroundTruth, 1e-12) {
            for j in 0..4 {
                let half_gap = (cv.z_plus[j] - cv.z_minus[j]) / 2.0;
                prop_assert!((cv.raw[j] - half_gap).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn correction_maps_idempotent_and_pinned(
        x in finite_vec(12),
        z in finite_vec(12),
        raw_v in nonzero_vec(12),
        projective in proptest::bool::ANY,
    ) {
        let len = norm(&raw_v);
        let v: Vec<f64> = raw_v.iter().map(|a| a / len).collect();
        let map = if projective { pclarc_map } else { aclarc_map };
        let once = map(&x, &v, &z).unwrap();
        let twice = map(&once, &v, &z).unwrap();
        for (a, b) in once.iter().zip(&twice) {
            prop_assert!((a - b).abs() < 1e-9);
        }
        prop_assert!((dot(&v, &once) - dot(&v, &z)).abs() < 1e-9);
    }

    #[test]
    fn neighbors_invariant_to_positive_row_rescaling(
        seed in 0u64..500,
        scales in proptest::collection::vec(0.01f64..100.0, 8),
    ) {
        let mut rng = Rng::from_seed(seed);
        let v: Vec<f64> = (0..4).map(|_| rng.gaussian(0.0, 1.0)).collect();
        let len = norm(&v);
        if len < 1e-9 {
            return Ok(());
        }
        let cv = fit_pattern_cav(
            &Tensor::from_rows(&[
                v.iter().map(|x| x + 1.0).collect::<Vec<f64>>(),
                v.iter().map(|x| x - 1.0).collect(),
            ])
            .unwrap(),
            &[1.0, -1.0],
            HookPoint::Input,
            LabelSource::GroundTruth,
            1e-12,
        )
        .unwrap();
        let rows: Vec<Vec<f64>> = (0..8)
            .map(|_| (0..4).map(|_| rng.gaussian(0.0, 1.0)).collect())
            .collect();
        let x = Tensor::from_rows(&rows).unwrap();
        let base = nearest_neighbors(&cv, &x, 8).unwrap();
        let scaled_rows: Vec<Vec<f64>> = rows
            .iter()
            .zip(&scales)
            .map(|(r, s)| r.iter().map(|v| v * s).collect())
            .collect();
        let xs = Tensor::from_rows(&scaled_rows).unwrap();
        let scaled = nearest_neighbors(&cv, &xs, 8).unwrap();
        prop_assert_eq!(base.indices, scaled.indices);
    }

    #[test]
    fn clever_hans_poisoning_preserves_structure(
        seed in 0u64..200,
        rate_milli in 1usize..1000,
        target in 0i32..3,
    ) {
        let cfg = PatternClassesConfig {
            k: 3,
            shape: (1, 8, 8),
            n_per_class: 12,
            noise_sigma: 0.1,
        };
        let ds = gen_pattern_classes(&cfg, Split::Train, &mut Rng::from_seed(seed)).unwrap();
        let rate = rate_milli as f64 / 1000.0;
        let spec = ArtifactSpec::white_box(2);
        let out = poison_clever_hans(&ds, target, rate, &spec, &mut Rng::from_seed(seed + 1)).unwrap();
        // n, shape, split, label histogram unchanged
        prop_assert_eq!(out.n(), ds.n());
        prop_assert_eq!(out.channel_shape(), ds.channel_shape());
        prop_assert_eq!(out.split(), ds.split());
        prop_assert_eq!(out.labels(), ds.labels());
        let expected = (12.0 * rate).floor() as usize;
        let flagged = out.artifact_flags().iter().filter(|&&s| s == 1).count();
        prop_assert_eq!(flagged, expected);
        // only flagged samples differ
        for i in 0..out.n() {
            if out.artifact_flags()[i] == -1 {
                prop_assert_eq!(out.sample(i), ds.sample(i));
            }
        }
    }
}
