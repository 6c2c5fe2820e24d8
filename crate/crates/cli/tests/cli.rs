use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use nsedit::ExperimentConfig;
use nsedit_core::{StrategyKind, StreamSpec};

fn nsedit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nsedit")).args(args).output().unwrap()
}

fn write_config(dir: &Path, cfg: &serde_json::Value) -> String {
    let path = dir.join("config.json");
    fs::write(&path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    path.to_str().unwrap().to_owned()
}

fn minimal(out: &Path) -> serde_json::Value {
    let mut cfg = ExperimentConfig::acceptance(vec![0]);
    cfg.stream = StreamSpec {
        d0: 16,
        d1: 8,
        num_languages: 1,
        batches_per_language: 1,
        batch_size: 3,
        subspace_rank: 4,
        language_overlap: 0.0,
        rephrase_noise: 0.05,
        pool_size: 8,
        preservation_size: 16,
        seed: 0,
    };
    cfg.strategies = vec![StrategyKind::Identity];
    cfg.output_dir = out.to_path_buf();
    serde_json::to_value(cfg).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn minimal_simulation_writes_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(dir.path(), &minimal(&out));
    let o = nsedit(&["simulate", &cfg]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csvs: Vec<_> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".csv"))
        .collect();
    assert_eq!(csvs, ["metrics_identity_0.csv"]);
    let text = fs::read_to_string(out.join("metrics_identity_0.csv")).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines[0], "step,language_id,efficacy,generality,specificity,preservation_drift,nullity");
    assert_eq!(lines.len(), 2);
    assert!(lines[1].starts_with("1,0,"));

    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    let rec = &summary[0];
    for key in ["strategy", "seed", "aggregate", "per_language_final", "runtime_seconds", "warnings"] {
        assert!(rec.get(key).is_some(), "summary lacks {key}");
    }
    assert_eq!(rec["strategy"], "identity");
}

#[test]
fn bad_rel_tol_exits_with_config_status() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = minimal(&dir.path().join("out"));
    v["rel_tol"] = 1.5.into();
    let cfg = write_config(dir.path(), &v);
    let o = nsedit(&["simulate", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("rel_tol"));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn unknown_field_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = minimal(&dir.path().join("out"));
    v["seed"] = 3.into();
    let o = nsedit(&["simulate", &write_config(dir.path(), &v)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("seed"));
}

#[test]
fn missing_config_exits_with_config_status() {
    let o = nsedit(&["verify", "/nonexistent/config.json"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn singular_initial_fit_is_numerical() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let mut v = minimal(&out);
    v["ridge"] = 0.0.into();
    let o = nsedit(&["simulate", &write_config(dir.path(), &v)]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
    let msg = stderr(&o);
    assert!(msg.contains("step") && msg.contains("strategy"), "{msg}");
    assert!(!out.exists());
}

#[test]
fn failed_run_removes_partial_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    fs::create_dir_all(out.join("summary.json")).unwrap();
    fs::write(out.join("keep.txt"), "x").unwrap();
    let cfg = write_config(dir.path(), &minimal(&out));
    let o = nsedit(&["simulate", &cfg]);
    assert_ne!(o.status.code(), Some(0));
    let mut left: Vec<_> = fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    left.sort();
    assert_eq!(left, ["keep.txt", "summary.json"]);
}

#[test]
fn verify_passes_on_default_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &serde_json::to_value(ExperimentConfig::acceptance(vec![0])).unwrap());
    let o = nsedit(&["verify", &cfg]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = String::from_utf8_lossy(&o.stdout).into_owned();
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 7);
    assert!(text.contains("measured") && text.contains("threshold"));
}

#[test]
fn loose_rel_tol_warns_about_nullity() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = serde_json::to_value(ExperimentConfig::acceptance(vec![0])).unwrap();
    v["rel_tol"] = 0.9.into();
    let o = nsedit(&["verify", &write_config(dir.path(), &v)]);
    assert!(matches!(o.status.code(), Some(0) | Some(4)));
    let text = String::from_utf8_lossy(&o.stdout).into_owned();
    assert!(text.contains("warning:") && text.contains("nullity"), "{text}");
    if o.status.code() == Some(4) {
        assert!(stderr(&o).contains("failed"));
    }
}

#[test]
fn overrides_and_inspect() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = ExperimentConfig::acceptance(vec![0, 1]);
    cfg.checkpoint_stride = 4;
    cfg.emit_plot_data = true;
    cfg.output_dir = dir.path().join("ignored");
    let path = write_config(dir.path(), &serde_json::to_value(cfg).unwrap());
    let out = dir.path().join("elsewhere");
    let o = nsedit(&[
        "simulate",
        &path,
        "--output-dir",
        out.to_str().unwrap(),
        "--seed-override",
        "5",
        "--strategy",
        "static",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(!dir.path().join("ignored").exists());
    let mut names: Vec<_> = fs::read_dir(&out).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    names.sort();
    assert_eq!(
        names,
        [
            "checkpoint_static_5_step4.lged",
            "checkpoint_static_5_step8.lged",
            "metrics_static_5.csv",
            "plot_efficacy_static_5.csv",
            "summary.json"
        ]
    );
    let plot = fs::read_to_string(out.join("plot_efficacy_static_5.csv")).unwrap();
    assert_eq!(plot.lines().count(), 1 + 9 * 4);

    let o = nsedit(&["inspect", out.join("checkpoint_static_5_step8.lged").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout).into_owned();
    assert!(text.contains("d1 32") && text.contains("d0 64") && text.contains("step 8") && text.contains("nullity 56"), "{text}");

    fs::write(dir.path().join("junk.lged"), b"LGED\x01\x00abc").unwrap();
    let o = nsedit(&["inspect", dir.path().join("junk.lged").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("truncated"));
}

#[test]
fn stream_dump_replays() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), &minimal(&dir.path().join("out")));
    let dump_path = dir.path().join("stream.json");
    let o = nsedit(&["dump-stream", &path, "--out", dump_path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let dump: nsedit::dump::StreamDump = serde_json::from_str(&fs::read_to_string(&dump_path).unwrap()).unwrap();
    let cfg = ExperimentConfig::load(Path::new(&path)).unwrap();
    let direct = nsedit::run::generate(&cfg, 0).unwrap();
    assert_eq!(dump.into_stream().unwrap(), direct);
}
