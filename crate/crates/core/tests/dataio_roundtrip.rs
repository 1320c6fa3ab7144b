mod common;

use std::collections::BTreeMap;

use adasel::dataio::*;
use adasel::harness::{generate_synthetic, SyntheticConfig, SYNTHETIC_PLATFORM};
use adasel::profile::two_platform_catalog;
use adasel::runtime::run_selection;
use adasel::Error;
use common::*;
use nalgebra::DMatrix;

#[test]
fn matrix_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.mat");
    let m = DMatrix::from_row_slice(
        3,
        4,
        &[
            1.0,
            -2.5,
            3.25,
            0.0,
            1e-300,
            7.0,
            -0.0,
            f64::MAX,
            9.5,
            10.0,
            11.0,
            12.0,
        ],
    );
    write_matrix(&path, &m).unwrap();
    let bytes = std::fs::read(&path).unwrap();
    assert_eq!(&bytes[..8], MATRIX_MAGIC);
    assert_eq!(bytes.len(), 24 + 12 * 8);
    // Row-major: the second value on disk is m[(0, 1)].
    assert_eq!(f64::from_le_bytes(bytes[32..40].try_into().unwrap()), -2.5);
    let back = read_matrix(&path).unwrap();
    assert_eq!(back.shape(), (3, 4));
    for (x, y) in back.iter().zip(m.iter()) {
        assert_eq!(x.to_bits(), y.to_bits());
    }
}

#[test]
fn truncated_matrix_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("short.mat");
    let mut bytes = MATRIX_MAGIC.to_vec();
    bytes.extend_from_slice(&10u64.to_le_bytes());
    bytes.extend_from_slice(&10u64.to_le_bytes());
    bytes.extend(std::iter::repeat_n(0u8, 799));
    std::fs::write(&path, bytes).unwrap();
    assert!(matches!(
        read_matrix(&path),
        Err(Error::TruncatedPayload {
            expected: 800,
            found: 799,
            ..
        })
    ));
    assert!(matches!(
        read_matrix(dir.path().join("absent.mat")),
        Err(Error::Io { .. })
    ));
}

#[test]
fn feature_stream_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = rng(1);
    let frames: Vec<_> = (0..12).map(|_| random_feature(&mut rng, 5)).collect();
    let labels: Vec<String> = (0..12).map(|i| format!("s{}", i / 4)).collect();
    let metadata = BTreeMap::from([("pipeline".to_string(), "hog+lbp".to_string())]);
    let path = dir.path().join("train.json");
    let manifest =
        write_feature_stream(&path, &frames, Some(labels.clone()), "camera-3", metadata).unwrap();
    assert_eq!(manifest.matrices, vec!["train.frames.mat"]);
    let stream = read_feature_stream(&path).unwrap();
    assert_eq!(stream.manifest, manifest);
    assert_eq!(stream.frames, frames);
    assert_eq!(stream.manifest.labels, Some(labels));
}

#[test]
fn manifest_consistency_checks() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = rng(2);
    let frames: Vec<_> = (0..4).map(|_| random_feature(&mut rng, 3)).collect();
    let path = dir.path().join("s.json");
    let mut manifest = write_feature_stream(&path, &frames, None, "x", BTreeMap::new()).unwrap();

    manifest.frame_count = 5;
    write_json(&path, &manifest).unwrap();
    assert!(matches!(
        read_feature_stream(&path),
        Err(Error::InvalidInput(_))
    ));

    manifest.frame_count = 4;
    manifest.feature_dim = 7;
    write_json(&path, &manifest).unwrap();
    assert!(matches!(
        read_feature_stream(&path),
        Err(Error::DimensionMismatch {
            expected: 7,
            found: 3
        })
    ));

    manifest.feature_dim = 3;
    manifest.version = 2;
    write_json(&path, &manifest).unwrap();
    assert!(matches!(
        read_feature_stream(&path),
        Err(Error::UnsupportedVersion {
            found: 2,
            supported: 1
        })
    ));
}

#[test]
fn performance_table_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("perf.csv");
    let text = "scenario_id,combo_id,platform_id,error,MT,IDS\n\
                s0,ACF-480x640,platform-2,3.5,12,\n\
                s1,HOG-240x320,platform-1,0,4,2\n";
    std::fs::write(&path, text).unwrap();
    let records = read_performance_table(&path).unwrap();
    assert_eq!(records.len(), 2);
    assert_eq!(
        records[0].extras,
        BTreeMap::from([("MT".to_string(), 12.0)])
    );
    let copy = dir.path().join("copy.csv");
    write_performance_table(&copy, &records).unwrap();
    assert_eq!(read_performance_table(&copy).unwrap(), records);
}

#[test]
fn performance_table_rejections() {
    let negative = "scenario_id,combo_id,platform_id,error\ns0,c,p,-1\n";
    assert!(matches!(
        parse_performance_table(negative.as_bytes()),
        Err(Error::NegativeError { line: 2, value }) if value == -1.0
    ));
    let dup = "scenario_id,combo_id,platform_id,error\ns0,c,p,1\ns0,c,p,1\n";
    assert!(matches!(
        parse_performance_table(dup.as_bytes()),
        Err(Error::DuplicateKey {
            first_line: 2,
            second_line: 3,
            ..
        })
    ));
    let header = "scenario,combo,platform,error\ns0,c,p,1\n";
    assert!(matches!(
        parse_performance_table(header.as_bytes()),
        Err(Error::MalformedRow { line: 1, .. })
    ));
    let word = "scenario_id,combo_id,platform_id,error\ns0,c,p,many\n";
    assert!(matches!(
        parse_performance_table(word.as_bytes()),
        Err(Error::MalformedRow { line: 2, .. })
    ));
}

#[test]
fn catalog_and_truth_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (combos, platforms) = two_platform_catalog(1.0, 2.5);
    let catalog = PlatformCatalog { combos, platforms };
    write_catalog(dir.path().join("platforms.json"), &catalog).unwrap();
    assert_eq!(
        read_catalog(dir.path().join("platforms.json")).unwrap(),
        catalog
    );

    let data = generate_synthetic(&SyntheticConfig {
        windows: 15,
        ..SyntheticConfig::default()
    })
    .unwrap();
    let path = dir.path().join("truth.csv");
    write_ground_truth(&path, &data.truth).unwrap();
    assert_eq!(read_ground_truth(&path).unwrap(), data.truth);
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("window_id,scenario_id,combo_id,error\n"));
}

#[test]
fn trace_file_round_trip() {
    let cfg = SyntheticConfig {
        windows: 12,
        ..SyntheticConfig::default()
    };
    let data = generate_synthetic(&cfg).unwrap();
    let profile = synthetic_profile(&cfg, &data).unwrap();
    let trace = run_selection(&data.test_frames, &profile, SYNTHETIC_PLATFORM, 20).unwrap();
    assert_eq!(trace.profile_reference, profile_hash(&profile).unwrap());
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trace.jsonl");
    write_trace(&path, &trace).unwrap();
    assert_eq!(read_trace(&path).unwrap(), trace);
    let csv = trace_csv(&trace);
    assert_eq!(csv.lines().count(), 13);
    assert!(csv.starts_with("window_id,combo_id,similarity\n"));

    // A header announcing more windows than present is rejected.
    let text = std::fs::read_to_string(&path).unwrap();
    let cut: String = text.lines().take(5).map(|l| format!("{l}\n")).collect();
    assert!(decode_trace(cut.as_bytes()).is_err());
}

#[test]
fn profile_hash_ignores_location() {
    let cfg = SyntheticConfig {
        windows: 5,
        ..SyntheticConfig::default()
    };
    let data = generate_synthetic(&cfg).unwrap();
    let profile = synthetic_profile(&cfg, &data).unwrap();
    let dir = tempfile::tempdir().unwrap();
    save_profile(dir.path().join("elsewhere.json"), &profile).unwrap();
    let loaded = load_profile(dir.path().join("elsewhere.json")).unwrap();
    assert_eq!(
        profile_hash(&loaded).unwrap(),
        profile_hash(&profile).unwrap()
    );

    let mut changed = profile.clone();
    changed.selected_platform = "other".into();
    assert_ne!(
        profile_hash(&changed).unwrap(),
        profile_hash(&profile).unwrap()
    );
}
