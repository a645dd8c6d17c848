mod common;

use common::*;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use rssinav::dataset::{FingerprintDataset, FingerprintRow};
use rssinav::features::{pearson, select_features, split, split_count, NormalizationParams};
use rssinav::geometry::Point;
use rssinav::scan::{aggregate_resamples, ScanEntry, ScanSnapshot};

/// Columns: 0 = a*x + b plus 1% noise, 1 = all-zero sentinel, 2 = constant, 3 = random.
fn labeled_dataset(seed: u64, n: usize) -> FingerprintDataset<f64> {
    let mut r = rng(seed);
    let slope: f64 = if r.random_bool(0.5) { 1.0 } else { -1.0 } * r.random_range(0.5..4.0);
    let offset = r.random_range(-90.0..-40.0);
    let rows: Vec<FingerprintRow<f64>> = (0..n)
        .map(|_| {
            let x = r.random_range(0.0..20.0);
            let y = r.random_range(0.0..20.0);
            let clean = slope * x + offset;
            let noise = Normal::new(0.0, 0.01 * (slope * 20.0).abs()).unwrap().sample(&mut r);
            FingerprintRow {
                rssi: vec![clean + noise, 0.0, -55.0, r.random_range(-90.0..-30.0)],
                x,
                y,
            }
        })
        .collect();
    let names = ["AP:LINEAR", "AP:ZERO", "AP:CONST", "AP:RANDOM"].map(String::from).to_vec();
    FingerprintDataset::new(names, rows).unwrap()
}

#[test]
fn pearson_matches_least_squares_oracle() {
    let mut r = rng(4);
    for _ in 0..50 {
        let n = r.random_range(3..40);
        let a: Vec<f64> = (0..n).map(|_| r.random_range(-10.0..10.0)).collect();
        let b: Vec<f64> = a.iter().map(|v| 0.3 * v + r.random_range(-5.0..5.0)).collect();
        let got = pearson(&a, &b).unwrap();
        let want = correlation_via_regression(&a, &b);
        assert!((got - want).abs() < 1e-9, "{got} vs {want}");
    }
}

#[test]
fn error_conversion_uses_shared_extent() {
    let rows = vec![
        FingerprintRow { rssi: vec![-40.0], x: 0.0, y: 0.0 },
        FingerprintRow { rssi: vec![-60.0], x: 12.0, y: 5.0 },
    ];
    let ds = FingerprintDataset::new(vec!["AP".into()], rows).unwrap();
    let norm: NormalizationParams<f64> = NormalizationParams::fit(&ds).unwrap();
    assert_eq!(norm.extent, 12.0);
    assert_eq!(norm.error_to_feet(0.14), 0.14 * 12.0);
    assert!((norm.error_to_feet(0.14) - 1.68).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn threshold_zero_keeps_every_non_constant_column(seed in any::<u64>(), n in 4usize..40) {
        let ds = labeled_dataset(seed, n);
        let sel = select_features(&ds, 0.0).unwrap();
        prop_assert!(sel.is_kept("AP:LINEAR"));
        prop_assert!(sel.is_kept("AP:RANDOM"));
        prop_assert!(!sel.is_kept("AP:ZERO"));
        prop_assert!(!sel.is_kept("AP:CONST"));
    }

    #[test]
    fn linear_column_survives_default_threshold(seed in any::<u64>(), n in 4usize..60) {
        let ds = labeled_dataset(seed, n);
        let sel = select_features(&ds, 0.24).unwrap();
        prop_assert!(sel.is_kept("AP:LINEAR"), "pcc_x {}", sel.pcc_x["AP:LINEAR"]);
        prop_assert!(!sel.is_kept("AP:ZERO"));
    }

    #[test]
    fn pearson_is_bounded_and_symmetric(a in proptest::collection::vec(-100.0f64..0.0, 2..30), shift in -5.0f64..5.0) {
        let b: Vec<f64> = a.iter().enumerate().map(|(i, v)| v * 0.5 + shift * i as f64).collect();
        let r1 = pearson(&a, &b).unwrap();
        let r2 = pearson(&b, &a).unwrap();
        prop_assert!((-1.0..=1.0).contains(&r1));
        prop_assert!((r1 - r2).abs() < 1e-12);
    }

    #[test]
    fn split_partitions_rows(seed in any::<u64>(), n in 1usize..80, ratio in 0.05f64..0.95) {
        let ds = labeled_dataset(seed, n);
        let parts = split(&ds, ratio, seed).unwrap();
        prop_assert_eq!(parts.train.len(), split_count(n, ratio));
        prop_assert_eq!(parts.train.len() + parts.test.len(), n);
        let mut all: Vec<usize> = parts.train_indices.iter().chain(&parts.test_indices).copied().collect();
        all.sort();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
        prop_assert_eq!(split(&ds, ratio, seed).unwrap(), parts);
    }

    #[test]
    fn normalization_round_trips_points(seed in any::<u64>(), n in 2usize..30, px in -10.0f64..30.0, py in -10.0f64..30.0) {
        let ds = labeled_dataset(seed, n);
        let norm: NormalizationParams<f64> = NormalizationParams::fit(&ds).unwrap();
        let p = Point::new(px, py);
        let back = norm.denormalize_point(norm.normalize_point(p));
        prop_assert!((back.x - px).abs() < 1e-9 && (back.y - py).abs() < 1e-9);
        for row in ds.rows() {
            let f = norm.normalize_features(&row.rssi).unwrap();
            prop_assert!(f.iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn aggregation_is_order_independent_median(levels in proptest::collection::vec(-95i32..=-20, 1..7), rot in 0usize..7) {
        let loc = Some(Point::new(1.0, 2.0));
        let snaps: Vec<ScanSnapshot<f64>> = levels
            .iter()
            .map(|&l| ScanSnapshot::new(vec![ScanEntry::new("02:00:00:00:00:01", "net", l).unwrap()], loc))
            .collect();
        let mut rotated = snaps.clone();
        rotated.rotate_left(rot % snaps.len());
        let a = aggregate_resamples(&snaps).unwrap();
        prop_assert_eq!(&a, &aggregate_resamples(&rotated).unwrap());
        let mut sorted = levels.clone();
        sorted.sort();
        prop_assert_eq!(a.entries[0].rssi, sorted[(sorted.len() - 1) / 2]);
    }
}
