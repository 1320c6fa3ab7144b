use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use adasel::dataio::{write_catalog, write_performance_table, PlatformCatalog};
use adasel::profile::{two_platform_catalog, PerformanceRecord};

fn adasel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_adasel"))
        .args(args)
        .env_remove("ADASEL_THREADS")
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn assert_success(o: &Output) {
    assert!(
        o.status.success(),
        "exit {:?}\n{}",
        o.status.code(),
        stderr(o)
    );
}

fn synth(dir: &Path, config: Option<&str>) -> Output {
    let mut args = vec!["synth", "--out-dir", path(dir)];
    let config_path = dir.with_extension("config.json");
    if let Some(text) = config {
        std::fs::write(&config_path, text).unwrap();
        args.extend(["--config", path(&config_path)]);
    }
    adasel(&args)
}

fn profile_args<'a>(dir: &'a Path, out: &'a Path, max_error: &'a str) -> Vec<String> {
    [
        "profile",
        "--train",
        path(&dir.join("train.json")),
        "--perf",
        path(&dir.join("performance.csv")),
        "--platforms",
        path(&dir.join("platforms.json")),
        "--scenarios",
        "5",
        "--subspace-dim",
        "5",
        "--max-error",
        max_error,
        "--required-fps",
        "10",
        "--max-cost",
        "10",
        "--window-length",
        "20",
        "--out",
        path(out),
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

fn run(args: &[String]) -> Output {
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    adasel(&refs)
}

/// synth → profile → select → eval inside `dir`.
fn full_pipeline(dir: &Path) {
    assert_success(&synth(dir, None));
    let profile = dir.join("profile.json");
    assert_success(&run(&profile_args(dir, &profile, "100")));
    let select = adasel(&[
        "select",
        "--profile",
        path(&profile),
        "--stream",
        path(&dir.join("test.json")),
        "--out",
        path(&dir.join("trace.jsonl")),
        "--no-timing",
    ]);
    assert_success(&select);
    assert!(stdout(&select).contains("switches: "));
    for out in ["report.csv", "report.json"] {
        let eval = adasel(&[
            "eval",
            "--trace",
            path(&dir.join("trace.jsonl")),
            "--truth",
            path(&dir.join("truth.csv")),
            "--out",
            path(&dir.join(out)),
        ]);
        assert_success(&eval);
    }
}

fn golden() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/report.csv")
}

#[test]
fn pipeline_matches_golden_report() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("run");
    full_pipeline(&dir);
    let report = std::fs::read_to_string(dir.join("report.csv")).unwrap();
    if std::env::var_os("ADASEL_BLESS").is_some() {
        std::fs::create_dir_all(golden().parent().unwrap()).unwrap();
        std::fs::write(golden(), &report).unwrap();
    }
    assert_eq!(report, std::fs::read_to_string(golden()).unwrap());
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap();
    assert_eq!(json["scenario_match_accuracy"], 1.0);
    assert!(dir.join("trace.csv").exists());
}

#[test]
fn pipeline_is_byte_identical_across_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    full_pipeline(&a);
    full_pipeline(&b);
    let mut compared = 0;
    for entry in std::fs::read_dir(&a).unwrap() {
        let name = entry.unwrap().file_name();
        assert_eq!(
            std::fs::read(a.join(&name)).unwrap(),
            std::fs::read(b.join(&name)).unwrap(),
            "{name:?} differs"
        );
        compared += 1;
    }
    assert!(compared >= 15, "only {compared} artifacts");
}

#[test]
fn infeasible_constraints_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("d");
    assert_success(&synth(&dir, None));
    let out = run(&profile_args(&dir, &dir.join("p.json"), "0.5"));
    assert_eq!(out.status.code(), Some(2));
    let err = stderr(&out);
    assert!(err.contains("no platform satisfies"), "{err}");
    assert!(err.contains("synthetic"), "{err}");
    assert!(!dir.join("p.json").exists());
}

#[test]
fn input_errors_exit_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("d");
    assert_success(&synth(&dir, None));

    let mut args = profile_args(&dir, &dir.join("p.json"), "100");
    let m = args.iter().position(|a| a == "--scenarios").unwrap();
    args[m + 1] = "1000".into();
    let out = run(&args);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("1000"), "{}", stderr(&out));

    let out = adasel(&[
        "select",
        "--profile",
        path(&dir.join("missing.json")),
        "--stream",
        path(&dir.join("test.json")),
    ]);
    assert_eq!(out.status.code(), Some(1));

    let out = adasel(&[
        "eval",
        "--trace",
        path(&dir.join("missing.jsonl")),
        "--truth",
        path(&dir.join("truth.csv")),
        "--out",
        path(&dir.join("r.csv")),
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn stream_dimension_must_match_profile() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("d");
    let other = tmp.path().join("narrow");
    assert_success(&synth(&dir, None));
    assert_success(&synth(&other, Some(r#"{"feature_dim": 32}"#)));
    let profile = dir.join("p.json");
    assert_success(&run(&profile_args(&dir, &profile, "100")));
    let out = adasel(&[
        "select",
        "--profile",
        path(&profile),
        "--stream",
        path(&other.join("test.json")),
        "--out",
        path(&dir.join("t.jsonl")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("dimension"), "{}", stderr(&out));
}

#[test]
fn misaligned_truth_exits_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("d");
    let short = tmp.path().join("short");
    full_pipeline(&dir);
    assert_success(&synth(&short, Some(r#"{"windows": 10}"#)));
    let out = adasel(&[
        "eval",
        "--trace",
        path(&dir.join("trace.jsonl")),
        "--truth",
        path(&short.join("truth.csv")),
        "--out",
        path(&dir.join("r.csv")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("200"), "{}", stderr(&out));
}

#[test]
fn synth_config_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let out = synth(&tmp.path().join("a"), Some(r#"{"frames_per_scenario": 5}"#));
    assert_eq!(out.status.code(), Some(1));
    let out = synth(&tmp.path().join("b"), Some(r#"{"unknown_field": 1}"#));
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn seed_flag_changes_synthetic_data() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_success(&adasel(&["synth", "--out-dir", path(&a), "--seed", "1"]));
    assert_success(&adasel(&["synth", "--out-dir", path(&b), "--seed", "2"]));
    assert_ne!(
        std::fs::read(a.join("test.frames.mat")).unwrap(),
        std::fs::read(b.join("test.frames.mat")).unwrap()
    );
}

#[test]
fn thread_count_must_be_positive() {
    let tmp = tempfile::tempdir().unwrap();
    let run_with = |threads: &str, dir: &str| {
        Command::new(env!("CARGO_BIN_EXE_adasel"))
            .args(["synth", "--out-dir", path(&tmp.path().join(dir))])
            .env("ADASEL_THREADS", threads)
            .output()
            .unwrap()
    };
    assert_eq!(run_with("0", "a").status.code(), Some(1));
    assert_eq!(run_with("many", "b").status.code(), Some(1));
    assert_success(&run_with("2", "c"));
}

/// Capability file shaped like the two-platform HOG/ACF table, with errors
/// that favour high resolution. Only platform 2 reaches 10 fps at 480x640.
#[test]
fn strict_error_bound_selects_the_faster_platform() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("d");
    assert_success(&synth(&dir, None));
    let (combos, platforms) = two_platform_catalog(1.0, 3.0);
    let base = [
        ("HOG-240x320", 14.0),
        ("HOG-480x640", 9.0),
        ("ACF-240x320", 11.0),
        ("ACF-480x640", 6.0),
    ];
    let mut records = Vec::new();
    for s in 0..5 {
        for (i, (combo, mean)) in base.iter().enumerate() {
            for p in &platforms {
                records.push(PerformanceRecord {
                    scenario_id: format!("s{s}"),
                    combo_id: combo.to_string(),
                    platform_id: p.id.clone(),
                    error: mean + ((s * 7 + i * 3) % 5) as f64 * 0.5,
                    extras: BTreeMap::new(),
                });
            }
        }
    }
    write_performance_table(dir.join("performance.csv"), &records).unwrap();
    write_catalog(
        dir.join("platforms.json"),
        &PlatformCatalog { combos, platforms },
    )
    .unwrap();

    let loose = run(&profile_args(&dir, &dir.join("loose.json"), "20"));
    assert_success(&loose);
    assert!(
        stdout(&loose).contains("selected platform: platform-1"),
        "{}",
        stdout(&loose)
    );

    let strict = run(&profile_args(&dir, &dir.join("strict.json"), "8"));
    assert_success(&strict);
    let text = stdout(&strict);
    assert!(text.contains("selected platform: platform-2"), "{text}");
    let high = text.lines().filter(|l| l.contains(": ACF-480x640")).count();
    assert!(high >= 3, "{text}");
}
