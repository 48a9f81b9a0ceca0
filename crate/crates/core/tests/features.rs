mod common;

use gaze_ident::features::{
    extract_features, feature_names, forward_diff, m3s2k, zscore_apply, zscore_fit,
    FEATURES_PER_ORDER, N_POSITION_FEATURES,
};
use gaze_ident::segmentation::ivt_segment;
use gaze_ident::{DerivativeLevel, FeatureMatrix, IvtConfig, SegmentKind, Trajectory};
use proptest::prelude::*;
use rand::Rng;

#[test]
fn column_counts_per_level() {
    let expected = [15, 33, 51, 69, 87, 105];
    for (level, want) in DerivativeLevel::all().zip(expected) {
        assert_eq!(level.n_features(), want);
        assert_eq!(feature_names(level).len(), want);
    }
    assert!(DerivativeLevel::new(6).is_err());
    assert_eq!(N_POSITION_FEATURES + 5 * FEATURES_PER_ORDER, 105);
}

#[test]
fn extracted_rows_have_level_width() {
    let mut r = common::rng(5);
    let traj = common::random_trajectory(&mut r, 2000, 200.0);
    let seg = ivt_segment(&traj, &IvtConfig::default()).unwrap();
    for level in DerivativeLevel::all() {
        let (fix, sac) = extract_features(&seg, level, "u");
        assert_eq!(fix.n_cols(), level.n_features());
        assert_eq!(sac.n_cols(), level.n_features());
        assert_eq!(fix.n_rows(), seg.count(SegmentKind::Fixation));
        assert_eq!(sac.n_rows(), seg.count(SegmentKind::Saccade));
        assert!(fix
            .values()
            .iter()
            .chain(sac.values())
            .all(|v| v.is_finite()));
    }
}

#[test]
fn forward_differences_recover_monomial_derivatives() {
    // The k-th forward difference of t^k is exactly k!; a short window near
    // t = 0 keeps floating-point cancellation far below the tolerance.
    let rate = 200.0;
    let t: Vec<f64> = (0..21).map(|i| i as f64 / rate).collect();
    let mut factorial = 1.0;
    for k in 1..=5 {
        factorial *= k as f64;
        let mut signal: Vec<f64> = t.iter().map(|v| v.powi(k)).collect();
        for _ in 0..k {
            signal = forward_diff(&signal, rate).unwrap();
        }
        assert_eq!(signal.len(), t.len() - k as usize);
        for v in &signal {
            assert!(
                (v - factorial).abs() <= 1e-6 * factorial,
                "order {k}: {v} vs {factorial}"
            );
        }
    }
}

#[test]
fn forward_differences_of_linear_and_quadratic() {
    let rate = 200.0;
    let t: Vec<f64> = (0..400).map(|i| i as f64 / rate).collect();
    // Analytic derivative of a line is its slope at every sample.
    let line: Vec<f64> = t.iter().map(|v| 3.0 * v - 1.0).collect();
    assert!(forward_diff(&line, rate)
        .unwrap()
        .iter()
        .all(|d| (d - 3.0).abs() < 1e-6));
    // For t^2 the forward difference equals the derivative at the interval midpoint.
    let sq: Vec<f64> = t.iter().map(|v| v * v).collect();
    for (i, d) in forward_diff(&sq, rate).unwrap().iter().enumerate() {
        let mid = (t[i] + t[i + 1]) / 2.0;
        assert!((d - 2.0 * mid).abs() < 1e-6);
    }
    assert!(forward_diff(&[1.0], rate).is_err());
}

#[test]
fn m3s2k_matches_reference() {
    let mut r = common::rng(77);
    for case in 0..1000 {
        let n = r.random_range(1..200);
        let scale = 10f64.powi(r.random_range(-3..4));
        let v: Vec<f64> = if case % 10 == 0 {
            // Heavily tied values.
            (0..n).map(|_| r.random_range(0..4) as f64).collect()
        } else {
            (0..n)
                .map(|_| scale * r.random_range(-1.0..1.0f64).powi(3))
                .collect()
        };
        let got = m3s2k(&v).unwrap().to_array();
        let want = common::brute_m3s2k(&v);
        for (g, w) in got.iter().zip(want) {
            let tol = 1e-9 * 1f64.max(w.abs());
            assert!(
                (g - w).abs() <= tol,
                "case {case} n {n}: {got:?} vs {want:?}"
            );
        }
    }
}

#[test]
fn zscore_uses_training_statistics_only() {
    let train = FeatureMatrix::from_rows(
        SegmentKind::Fixation,
        DerivativeLevel::POSITION,
        vec![vec![1.0; 15], vec![3.0; 15], vec![5.0; 15]],
        vec!["a".into(), "b".into(), "c".into()],
    )
    .unwrap();
    let params = zscore_fit(&train).unwrap();
    assert!(params.means.iter().all(|m| *m == 3.0));
    assert!(params.stds.iter().all(|s| (s - 2.0).abs() < 1e-12));
    let test = FeatureMatrix::from_rows(
        SegmentKind::Fixation,
        DerivativeLevel::POSITION,
        vec![vec![7.0; 15]],
        vec!["a".into()],
    )
    .unwrap();
    let z = zscore_apply(&params, &test).unwrap();
    assert!(z.row(0).iter().all(|v| (v - 2.0).abs() < 1e-12));
}

/// Random trajectory snapped to a dyadic grid so translation is exact.
fn dyadic_trajectory(seed: u64) -> Trajectory {
    let mut r = common::rng(seed);
    let t = common::random_trajectory(&mut r, 1500, 200.0);
    let snap = |v: &f64| (v * 1048576.0).round() / 1048576.0;
    t.with_positions(
        t.x().iter().map(snap).collect(),
        t.y().iter().map(snap).collect(),
    )
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn translation_invariance(seed in 0u64..10_000, dx in -64i32..64, dy in -64i32..64) {
        let base = dyadic_trajectory(seed);
        let (ox, oy) = (dx as f64 / 16.0, dy as f64 / 16.0);
        let moved = base
            .with_positions(
                base.x().iter().map(|v| v + ox).collect(),
                base.y().iter().map(|v| v + oy).collect(),
            )
            .unwrap();
        let cfg = IvtConfig::default();
        let a = ivt_segment(&base, &cfg).unwrap();
        let b = ivt_segment(&moved, &cfg).unwrap();
        prop_assert_eq!(&a.segments, &b.segments);
        let (fa, sa) = extract_features(&a, DerivativeLevel::MAX, "u");
        let (fb, sb) = extract_features(&b, DerivativeLevel::MAX, "u");
        for (p, q) in fa.values().iter().chain(sa.values()).zip(fb.values().iter().chain(sb.values())) {
            prop_assert!(common::close(*p, *q, 1e-6), "{} vs {}", p, q);
        }
    }

    #[test]
    fn extraction_is_deterministic_and_prefix_consistent(seed in 0u64..10_000, level in 0u8..=5) {
        let base = dyadic_trajectory(seed);
        let seg = ivt_segment(&base, &IvtConfig::default()).unwrap();
        let level = DerivativeLevel::new(level).unwrap();
        let (f1, s1) = extract_features(&seg, level, "u");
        let (f2, s2) = extract_features(&seg, level, "u");
        prop_assert_eq!(&f1, &f2);
        prop_assert_eq!(&s1, &s2);
        let (fmax, smax) = extract_features(&seg, DerivativeLevel::MAX, "u");
        prop_assert_eq!(fmax.truncate_level(level).unwrap(), f1);
        prop_assert_eq!(smax.truncate_level(level).unwrap(), s1);
    }

    #[test]
    fn m3s2k_shift_invariance(seed in 0u64..10_000, shift in -100.0f64..100.0) {
        let mut r = common::rng(seed);
        let v: Vec<f64> = (0..50).map(|_| r.random_range(-1.0..1.0)).collect();
        let a = m3s2k(&v).unwrap();
        let b = m3s2k(&v.iter().map(|x| x + shift).collect::<Vec<_>>()).unwrap();
        prop_assert!((b.mean - a.mean - shift).abs() < 1e-9);
        prop_assert!((b.std - a.std).abs() < 1e-9);
        prop_assert!((b.skewness - a.skewness).abs() < 1e-6);
        prop_assert!((b.kurtosis - a.kurtosis).abs() < 1e-6);
    }
}
