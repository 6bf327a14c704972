use std::fs;
use std::path::Path;
use std::process::{Command, Output};

#[path = "../../core/tests/common/replica.rs"]
mod replica;

use counsel_core::aggregate::{assemble, write_features_csv, Feature};
use counsel_core::config::RunConfig;

fn counsel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_counsel"))
        .args(args)
        .env_remove("COUNSEL_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path, n: usize) {
    let out = counsel(&["synth", "--n", &n.to_string(), "--seed", "3", "-o", s(dir)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn read_tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn features_over_three_sessions_and_corruption() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = tmp.path().join("corpus");
    synth(&corpus, 3);
    let out = tmp.path().join("out");
    let r = counsel(&["features", s(&corpus), "-o", s(&out)]);
    assert!(r.status.success());
    let csv = fs::read_to_string(out.join("features.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 4);
    assert_eq!(lines[0].split(',').count(), 19);

    // --jobs does not change the output
    let out1 = tmp.path().join("out1");
    assert!(counsel(&["features", s(&corpus), "-o", s(&out1), "--jobs", "1"]).status.success());
    assert_eq!(fs::read(out1.join("features.csv")).unwrap(), csv.as_bytes());

    fs::write(corpus.join("S002").join("session.json"), r#"{"session_id": "S002", "rating": 9}"#).unwrap();
    let r = counsel(&["features", s(&corpus), "-o", s(&out), "--strict"]);
    assert_eq!(r.status.code(), Some(1));
    let r = counsel(&["features", s(&corpus), "-o", s(&out)]);
    assert!(r.status.success());
    assert!(String::from_utf8_lossy(&r.stderr).contains("warning: skipping"));
    assert_eq!(fs::read_to_string(out.join("features.csv")).unwrap().lines().count(), 3);

    let r = counsel(&["validate", s(&corpus)]);
    assert_eq!(r.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&r.stdout).contains("2 passed, 1 failed"));
}

fn replica_features(dir: &Path, rated: bool) -> std::path::PathBuf {
    let a = assemble(&replica::student_a(), &RunConfig::default()).unwrap();
    let mut b = a.clone();
    b.session_id = "B".into();
    b.set(Feature::SessionDuration, Some(2.0 * 564.20 - 693.96));
    let mut rows = vec![a, b];
    if !rated {
        for r in &mut rows {
            r.rating = None;
        }
    }
    let path = dir.join("features.csv");
    let mut buf = Vec::new();
    write_features_csv(&mut buf, &rows).unwrap();
    fs::write(&path, buf).unwrap();
    path
}

#[test]
fn reports_from_replica_features() {
    let tmp = tempfile::tempdir().unwrap();
    let f = replica_features(tmp.path(), true);
    let out = tmp.path().join("r");
    let r = counsel(&["report", "--features", s(&f), "--kind", "radar", "--session", "A", "-o", s(&out)]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let profile: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("radar_A.json")).unwrap()).unwrap();
    let d = profile["raw_deviations"][0].as_f64().unwrap();
    assert!((d - 0.23).abs() < 0.005, "{d}");
    assert!(out.join("radar_A.svg").exists());

    let r = counsel(&["report", "--features", s(&f), "--kind", "table", "-o", s(&out)]);
    assert!(r.status.success());
    let table = fs::read_to_string(out.join("feedback_A.csv")).unwrap();
    assert!(table.contains("Session Duration,693.96,0.23\n"));
    assert!(table.contains("Statement,0.88,0.00\n"));

    assert!(!counsel(&["report", "--features", s(&f), "--kind", "radar", "-o", s(&out)]).status.success());
    let r = counsel(&["report", "--features", s(&f), "--kind", "radar", "--session", "Z", "-o", s(&out)]);
    assert!(String::from_utf8_lossy(&r.stderr).contains("unknown session"));
}

#[test]
fn grouped_plot_needs_ratings() {
    let tmp = tempfile::tempdir().unwrap();
    let f = replica_features(tmp.path(), false);
    let r = counsel(&["report", "--features", s(&f), "--kind", "parallel-grouped", "-o", s(tmp.path())]);
    assert_eq!(r.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&r.stderr).contains("no session carries a rating"));
    let r = counsel(&["report", "--features", s(&f), "--kind", "parallel", "-o", s(tmp.path())]);
    assert!(r.status.success());
}

#[test]
fn synth_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    synth(&a, 2);
    synth(&b, 2);
    assert_eq!(read_tree(&a), read_tree(&b));
    assert!(!counsel(&["synth", "--n", "0", "-o", s(&a)]).status.success());
}

#[test]
fn flags_config_and_env() {
    let help = counsel(&["--help"]);
    let text = String::from_utf8_lossy(&help.stdout);
    for key in [
        "fps",
        "sample_rate",
        "smile_threshold",
        "gaze",
        "clip_min",
        "axis_order",
        "cv_folds",
        "seed",
        "split_segments",
        "keep_subcategories",
        "agreement_step_s",
        "output_dir",
    ] {
        assert!(text.contains(key), "--help misses {key}");
    }
    assert_eq!(counsel(&["features", "x", "--bogus"]).status.code(), Some(2));

    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.json");
    fs::write(&cfg, r#"{"sed": 1}"#).unwrap();
    let r = counsel(&["--config", s(&cfg), "synth", "--n", "1", "-o", s(tmp.path())]);
    assert!(!r.status.success());

    let env_out = tmp.path().join("env_out");
    let r = Command::new(env!("CARGO_BIN_EXE_counsel"))
        .args(["synth", "--n", "1"])
        .env("COUNSEL_OUT_DIR", &env_out)
        .output()
        .unwrap();
    assert!(r.status.success());
    assert!(env_out.join("S001").join("session.json").exists());
}
