use std::path::Path;
use std::process::{Command, Output};

const SPEC: &str = r#"{"train_assets":8,"unseen_assets":5,"test_assets":5,"train_scenarios":2,"val_seen_scenarios":1,"val_unseen_scenarios":1,"test_scenarios":3,"sats_range":[2,4],"tasks_range":[15,25],"horizon":1800,"dt":1.0}"#;

fn aeos(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aeos"))
        .args(args)
        .current_dir(dir)
        .env_remove("AEOS_SEED")
        .output()
        .unwrap()
}

fn generated() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("spec.json"), SPEC).unwrap();
    let out = aeos(&["gen-scenarios", "--split-spec", "spec.json", "--seed", "4", "--out", "data"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    dir
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = aeos(&["frobnicate"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
    let out = aeos(&["evaluate", "--manifest", "m.json", "--scheduler", "oracle"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = aeos(&["evaluate", "--manifest", "m.json", "--scheduler", "matcher"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn every_subcommand_has_help() {
    let dir = tempfile::tempdir().unwrap();
    for sub in ["gen-assets", "gen-scenarios", "annotate", "train", "evaluate", "replay"] {
        let out = aeos(&[sub, "--help"], dir.path());
        assert_eq!(out.status.code(), Some(0), "{sub}");
        assert!(String::from_utf8_lossy(&out.stdout).contains("Usage"), "{sub}");
    }
}

#[test]
fn missing_files_are_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let out = aeos(&["evaluate", "--manifest", "nope.json", "--scheduler", "greedy"], dir.path());
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn evaluate_is_reproducible() {
    let dir = generated();
    let args = |out: &'static str| {
        vec![
            "evaluate",
            "--manifest",
            "data/test.manifest.json",
            "--scheduler",
            "random",
            "--seed",
            "7",
            "--out",
            out,
        ]
    };
    assert_eq!(aeos(&args("a.csv"), dir.path()).status.code(), Some(0));
    assert_eq!(aeos(&args("b.csv"), dir.path()).status.code(), Some(0));
    let a = std::fs::read(dir.path().join("a.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b.csv")).unwrap();
    assert_eq!(a, b);
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 4);
}

#[test]
fn seed_defaults_from_environment() {
    let dir = generated();
    let run = |env: Option<&str>, extra: &[&str]| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_aeos"));
        cmd.args(["evaluate", "--manifest", "data/test.manifest.json", "--scheduler", "random"])
            .args(extra)
            .current_dir(dir.path())
            .env_remove("AEOS_SEED");
        if let Some(v) = env {
            cmd.env("AEOS_SEED", v);
        }
        cmd.output().unwrap().stdout
    };
    assert_eq!(run(Some("11"), &[]), run(None, &["--seed", "11"]));
    assert_ne!(run(Some("11"), &[]), run(None, &[]));
}

#[test]
fn missing_scenario_is_reported_as_partial() {
    let dir = generated();
    std::fs::remove_file(dir.path().join("data/test/test-00001.json")).unwrap();
    let out = aeos(&["evaluate", "--manifest", "data/test.manifest.json", "--scheduler", "greedy"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows[1].starts_with("test,test-00001,greedy,,") && rows[1].contains("error"));
    assert!(rows[0].ends_with(",ok") && rows[2].ends_with(",ok"));
}

#[test]
fn annotate_then_replay_ground_truth() {
    let dir = generated();
    let out = aeos(&["annotate", "--scenarios", "data/train", "--out", "ds"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let traj: Vec<_> = std::fs::read_dir(dir.path().join("ds"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "jsonl"))
        .collect();
    assert!(!traj.is_empty(), "no trajectory accepted");
    for t in traj {
        let id = t.file_stem().unwrap().to_string_lossy().to_string();
        let scenario = dir.path().join("ds/scenarios").join(format!("{id}.json"));
        let out = aeos(
            &["replay", "--trajectory", t.to_str().unwrap(), "--scenario", scenario.to_str().unwrap()],
            dir.path(),
        );
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        let printed: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        assert!(printed["cr"].as_f64().unwrap() > 0.0);
    }
}

#[test]
fn tampered_trajectory_fails_replay() {
    let dir = generated();
    assert_eq!(aeos(&["annotate", "--scenarios", "data/train", "--out", "ds"], dir.path()).status.code(), Some(0));
    let t = std::fs::read_dir(dir.path().join("ds"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.extension().is_some_and(|e| e == "jsonl"))
        .unwrap();
    let id = t.file_stem().unwrap().to_string_lossy().to_string();
    let text = std::fs::read_to_string(&t).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let last = lines.len() - 1;
    let mut footer: serde_json::Value = serde_json::from_str(&lines[last]).unwrap();
    footer["sensor_on_seconds"][0] = serde_json::json!(123456.0);
    lines[last] = footer.to_string();
    std::fs::write(&t, lines.join("\n") + "\n").unwrap();
    let scenario = dir.path().join("ds/scenarios").join(format!("{id}.json"));
    let out = aeos(
        &["replay", "--trajectory", t.to_str().unwrap(), "--scenario", scenario.to_str().unwrap()],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn train_and_evaluate_matcher() {
    let dir = generated();
    assert_eq!(aeos(&["annotate", "--scenarios", "data/train", "--out", "ds"], dir.path()).status.code(), Some(0));
    let cfg = r#"{"train":{"iterations":10,"batch_size":2,"stages":1,"model":{"width":8,"depth":1,"heads":2,"time_dim":4,"ffn_mult":2,"constraint_hidden":8,"time_unit_s":3600.0}},"explore":{"scenarios_per_stage":1,"horizon":300},"matcher_decision_interval":30}"#;
    std::fs::write(dir.path().join("cfg.json"), cfg).unwrap();
    let out = aeos(&["train", "--dataset", "ds", "--config", "cfg.json", "--checkpoint", "m.ckpt"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let out = aeos(
        &[
            "evaluate",
            "--manifest",
            "data/test.manifest.json",
            "--scheduler",
            "matcher",
            "--checkpoint",
            "m.ckpt",
            "--config",
            "cfg.json",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 4);
    std::fs::write(dir.path().join("bad.ckpt"), b"not a checkpoint").unwrap();
    let out = aeos(
        &["evaluate", "--manifest", "data/test.manifest.json", "--scheduler", "matcher", "--checkpoint", "bad.ckpt"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn mismatched_config_hash_is_refused() {
    let dir = generated();
    std::fs::write(dir.path().join("other.json"), r#"{"sim":{"attitude_substeps":3}}"#).unwrap();
    let out = aeos(
        &["evaluate", "--manifest", "data/test.manifest.json", "--scheduler", "greedy", "--config", "other.json"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("config"));
}
