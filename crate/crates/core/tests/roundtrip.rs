mod common;

use std::path::Path;

use common::*;
use proptest::prelude::*;
use rand::Rng;
use rssinav::dataset::{FingerprintDataset, FingerprintRow};
use rssinav::features::{FeatureSelection, NormalizationParams, Sidecar};
use rssinav::geometry::Point;
use rssinav::model::{decode_model, encode_model, load_model, save_model, MlpRegressor, ModelBundle, PersistError};
use rssinav::rfsim::{reference_world, SimWorld};
use rssinav::scan::{parse_scan_text, render_scan_text, ScanEntry, ScanError};

fn fixture(name: &str) -> String {
    let p = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name);
    std::fs::read_to_string(p).unwrap()
}

fn e(mac: &str, ssid: &str, rssi: i32) -> ScanEntry {
    ScanEntry::new(mac, ssid, rssi).unwrap()
}

#[test]
fn scan_fixtures_parse_to_expected_entries() {
    const A: &str = "00:1A:2B:3C:4D:5E";
    const B: &str = "00:1A:2B:3C:4D:6F";
    const C: &str = "F0:9F:C2:11:22:33";
    let expected: [(&str, Vec<ScanEntry>); 6] = [
        ("0_0_1", vec![e(A, "CSU Net", -48), e(B, "CSU Net", -71), e(C, "eduroam", -80)]),
        ("0_0_2", vec![e(A, "CSU Net", -50), e(B, "CSU Net", -69)]),
        ("0_0_3", vec![e(B, "CSU Net", -70), e(A, "CSU Net", -47), e(C, "eduroam", -82)]),
        ("3_4_1", vec![e(A, "CSU Net", -66), e(B, "CSU Net", -52)]),
        ("3_4_2", vec![e(A, "CSU Net", -64), e(B, "CSU Net", -55), e(C, "eduroam", -77)]),
        ("3_4_3", vec![e(A, "CSU Net", -65), e(B, "CSU Net", -53)]),
    ];
    for (name, want) in expected {
        let got = parse_scan_text(&fixture(&format!("scans/{name}.txt"))).unwrap();
        assert_eq!(got, want, "{name}");
    }
}

#[test]
fn duplicate_mac_fixture_is_rejected() {
    let err = parse_scan_text(&fixture("bad_scans/1_1_2.txt")).unwrap_err();
    assert!(matches!(err, ScanError::DuplicateMac { ref mac, .. } if mac == "00:1A:2B:3C:4D:5E"), "{err:?}");
}

fn random_dataset(r: &mut impl Rng) -> FingerprintDataset<f64> {
    let cols = r.random_range(1..6);
    let names: Vec<String> = (0..cols).map(|i| format!("02:00:00:00:00:{i:02X}")).collect();
    let rows = (0..r.random_range(0..12))
        .map(|_| FingerprintRow {
            rssi: (0..cols).map(|_| f64::from(r.random_range(-95i32..=0))).collect(),
            x: r.random_range(-50.0..50.0),
            y: r.random_range(-50.0..50.0),
        })
        .collect();
    FingerprintDataset::new(names, rows).unwrap()
}

fn random_bundle(r: &mut impl Rng, seed: u64) -> ModelBundle<f64> {
    let (input, mut spec) = random_architecture(r);
    *spec.last_mut().unwrap() = rssinav::model::LayerSpec::Dense {
        width: 2,
        activation: rssinav::model::Activation::Identity,
    };
    let mut model = MlpRegressor::<f64>::new(input, &spec, seed).unwrap();
    let x = random_matrix(r, 3, input);
    let cache = model.forward_train(&x).unwrap();
    model.update_running_stats(&cache);
    let columns: Vec<String> = (0..input).map(|i| format!("AA:BB:CC:00:00:{i:02X}")).collect();
    let mut pcc = std::collections::BTreeMap::new();
    for c in &columns {
        pcc.insert(c.clone(), r.random_range(-1.0..1.0));
    }
    let selection = FeatureSelection {
        kept_columns: columns.clone(),
        pcc_x: pcc.clone(),
        pcc_y: pcc,
        threshold: 0.24,
        source_columns: columns,
    };
    let normalization = NormalizationParams {
        feature_min: (0..input).map(|_| r.random_range(-90.0..-60.0)).collect(),
        feature_max: (0..input).map(|_| r.random_range(-59.0..-20.0)).collect(),
        origin: Point::new(r.random_range(-5.0..5.0), r.random_range(-5.0..5.0)),
        extent: r.random_range(1.0..30.0),
    };
    let mut sidecar = Sidecar::new(selection, normalization);
    sidecar.meta.insert("train.seed".into(), seed.to_string());
    ModelBundle::new(model, sidecar).unwrap()
}

#[test]
fn dataset_csv_round_trip_on_100_instances() {
    let mut r = rng(1);
    for _ in 0..100 {
        let ds = random_dataset(&mut r);
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        assert_eq!(FingerprintDataset::<f64>::read_csv(buf.as_slice()).unwrap(), ds);
    }
}

#[test]
fn model_file_round_trip_on_100_instances() {
    let mut r = rng(2);
    for seed in 0..100 {
        let bundle = random_bundle(&mut r, seed);
        let mut buf = Vec::new();
        save_model(&bundle, &mut buf).unwrap();
        let back: ModelBundle<f64> = load_model(buf.as_slice()).unwrap();
        assert_eq!(back, bundle);
        assert_eq!(encode_model(&back), buf);
    }
}

#[test]
fn corrupted_model_files_are_rejected() {
    let bundle = random_bundle(&mut rng(3), 3);
    let bytes = encode_model(&bundle);
    let mut flipped = bytes.clone();
    let mid = bytes.len() / 2;
    flipped[mid] ^= 0x40;
    assert!(matches!(decode_model::<f64>(&flipped), Err(PersistError::ChecksumFailure | PersistError::CorruptFile(_))));
    assert!(matches!(decode_model::<f64>(&bytes[..bytes.len() - 5]), Err(PersistError::CorruptFile(_))));
    let mut version = bytes.clone();
    version[8] = 99;
    assert!(matches!(decode_model::<f64>(&version), Err(PersistError::VersionMismatch { .. })));
}

#[test]
fn world_file_round_trip() {
    let world = reference_world::<f64>();
    assert_eq!(SimWorld::<f64>::parse(&world.to_text()).unwrap(), world);
}

fn mac_strategy() -> impl Strategy<Value = String> {
    proptest::collection::vec(any::<u8>(), 6).prop_map(|b| {
        b.iter().map(|v| format!("{v:02X}")).collect::<Vec<_>>().join(":")
    })
}

proptest! {
    #[test]
    fn rendered_scans_parse_back(
        cells in proptest::collection::btree_map(mac_strategy(), ("[A-Za-z0-9 _-]{0,16}", -100i32..=0), 0..8)
    ) {
        let entries: Vec<ScanEntry> = cells.iter().map(|(m, (s, r))| e(m, s, *r)).collect();
        let text = render_scan_text("wlan0", &entries);
        prop_assert_eq!(parse_scan_text(&text).unwrap(), entries);
    }

    #[test]
    fn sidecar_text_round_trips(seed in 0u64..500) {
        let bundle = random_bundle(&mut rng(seed), seed);
        let text = bundle.sidecar.to_text();
        prop_assert_eq!(Sidecar::<f64>::from_text(&text).unwrap(), bundle.sidecar);
    }
}
