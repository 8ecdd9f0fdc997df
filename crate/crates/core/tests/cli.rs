use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const PD: &str = r#"{ "pd": { "R": 3, "S": 0, "T": 5, "P": 1 } }"#;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_zdmem"));
    c.env_remove("ZDMEM_OUT");
    c
}

fn shipped(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn write_config(dir: &Path, name: &str, strategies: &str, task: &str) -> PathBuf {
    let path = dir.join(name);
    let text = format!(r#"{{ "game": {PD}, "strategies": {strategies}, "task": {task} }}"#);
    std::fs::write(&path, text).unwrap();
    path
}

fn run(config: &Path, args: &[&str]) -> Output {
    bin().arg("--config").arg(config).args(args).output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn validate_accepts_tft() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "tft.json",
        r#"[{ "kind": "builtin", "name": "tft" }]"#,
        "{}",
    );
    let out = run(&cfg, &["validate"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(&out)["pass"], true);
}

#[test]
fn validate_names_the_offending_history() {
    let dir = tempfile::tempdir().unwrap();
    let rows = r#"[{ "kind": "tensor", "memory": 1, "rows": [[1, 0], [0, 1], [0.5, 0.4], [0, 1]] }]"#;
    let cfg = write_config(dir.path(), "bad.json", rows, "{}");
    let out = run(&cfg, &["validate"]);
    assert_eq!(out.status.code(), Some(1));
    let v = &json(&out)["strategies"][0]["violations"][0];
    assert_eq!(v["kind"], "normalization");
    assert_eq!(v["history"], serde_json::json!([[2, 1]]));
    assert!((v["magnitude"].as_f64().unwrap() - 0.1).abs() < 1e-12);
}

#[test]
fn unknown_builtin_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "u.json", r#"[{ "kind": "builtin", "name": "nope" }]"#, "{}");
    let out = run(&cfg, &["validate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope"));
}

#[test]
fn malformed_and_missing_configs_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.json");
    std::fs::write(&path, "{ not json").unwrap();
    assert_eq!(run(&path, &["validate"]).status.code(), Some(2));
    assert_eq!(
        run(&dir.path().join("absent.json"), &["validate"]).status.code(),
        Some(2)
    );
    assert_eq!(bin().arg("stationary").output().unwrap().status.code(), Some(2));
    assert_eq!(
        bin()
            .arg("--format")
            .arg("xml")
            .arg("catalog")
            .output()
            .unwrap()
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn tft_against_alld_settles_on_mutual_defection() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .arg("--config")
        .arg(shipped("tft_vs_alld.json"))
        .arg("--out")
        .arg(dir.path())
        .arg("stationary")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let doc = json(&out);
    let dists = doc["matchups"][0]["distributions"].as_array().unwrap();
    assert_eq!(dists.len(), 1);
    assert_eq!(dists[0]["probs"], serde_json::json!([0.0, 0.0, 0.0, 1.0]));

    let on_disk: Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("stationary.json")).unwrap()).unwrap();
    assert_eq!(on_disk, doc);
    let csv = std::fs::read_to_string(dir.path().join("stationary.csv")).unwrap();
    for key in ["config_sha256", "version", "seeds", "tolerances", "perturbed"] {
        assert!(csv.lines().any(|l| l.starts_with(&format!("# {key}:"))), "{key}");
    }
    assert!(csv.lines().any(|l| l == "matchup,distribution,m1_p1,m1_p2,prob"));
    assert!(csv.lines().any(|l| l == "0,0,2,2,1"));
}

#[test]
fn repeat_against_repeat_fixes_every_history() {
    let dir = tempfile::tempdir().unwrap();
    let s = r#"[{ "kind": "builtin", "name": "repeat" }, { "kind": "builtin", "name": "repeat", "player": 2 }]"#;
    let cfg = write_config(dir.path(), "r.json", s, "{}");
    let out = run(&cfg, &["stationary"]);
    assert_eq!(out.status.code(), Some(0));
    let doc = json(&out);
    let dists = doc["matchups"][0]["distributions"].as_array().unwrap();
    assert_eq!(dists.len(), 4);
    let mut points: Vec<usize> = dists
        .iter()
        .map(|d| {
            d["probs"]
                .as_array()
                .unwrap()
                .iter()
                .position(|p| p.as_f64() == Some(1.0))
                .unwrap()
        })
        .collect();
    points.sort();
    assert_eq!(points, vec![0, 1, 2, 3]);
}

#[test]
fn power_mode_records_damping() {
    let dir = tempfile::tempdir().unwrap();
    let s = r#"[{ "kind": "builtin", "name": "tft" }, { "kind": "builtin", "name": "alld", "player": 2 }]"#;
    for (policy, damped) in [("always", true), ("never", false)] {
        let task = format!(r#"{{ "method": "power", "power": {{ "damping": "{policy}" }} }}"#);
        let cfg = write_config(dir.path(), "p.json", s, &task);
        let out = run(&cfg, &["stationary"]);
        assert_eq!(out.status.code(), Some(0));
        let doc = json(&out);
        assert_eq!(doc["metadata"]["method"], "power");
        assert_eq!(doc["metadata"]["damping"], policy);
        assert_eq!(doc["metadata"]["damped"], damped);
        let probs = doc["matchups"][0]["distributions"][0]["probs"].as_array().unwrap();
        assert!((probs[3].as_f64().unwrap() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn simulation_is_reproducible_and_absorbs() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let out = bin()
            .arg("--config")
            .arg(shipped("tft_vs_alld.json"))
            .arg("--out")
            .arg(d.path())
            .arg("simulate")
            .output()
            .unwrap();
        assert_eq!(out.status.code(), Some(0));
    }
    for f in ["simulation.json", "empirical.csv", "trajectory.csv"] {
        assert_eq!(
            std::fs::read(a.path().join(f)).unwrap(),
            std::fs::read(b.path().join(f)).unwrap(),
            "{f}"
        );
    }
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(a.path().join("simulation.json")).unwrap()).unwrap();
    let summary = &doc["matchups"][0]["summary"];
    assert_eq!(summary["rounds"], 100000);
    assert!(summary["empirical"][3].as_f64().unwrap() >= 0.999);

    // rounds 100000 thinned by 100
    let traj = std::fs::read_to_string(a.path().join("trajectory.csv")).unwrap();
    let rows = traj.lines().filter(|l| !l.starts_with('#')).skip(1).count();
    assert_eq!(rows, 1000);
}

#[test]
fn simulation_seed_flag_changes_the_stream() {
    let dir = tempfile::tempdir().unwrap();
    let s =
        r#"[{ "kind": "random", "memory": 1, "seed": 5 }, { "kind": "random", "memory": 1, "seed": 6, "player": 2 }]"#;
    let cfg = write_config(dir.path(), "s.json", s, r#"{ "rounds": 2000 }"#);
    let one = run(&cfg, &["--seed", "1", "simulate"]);
    let again = run(&cfg, &["--seed", "1", "simulate"]);
    let other = run(&cfg, &["--seed", "2", "simulate"]);
    assert_eq!(one.stdout, again.stdout);
    assert_ne!(one.stdout, other.stdout);
    assert_eq!(json(&other)["metadata"]["seeds"][0], 2);
}

#[test]
fn verify_exit_codes_follow_the_checks() {
    for (name, code) in [
        ("tftn_verify.json", 0),
        ("grim_verify.json", 0),
        ("corrupted_verify.json", 1),
    ] {
        let out = run(&shipped(name), &["verify"]);
        assert_eq!(
            out.status.code(),
            Some(code),
            "{name}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert_eq!(json(&out)["pass"], code == 0);
    }
}

#[test]
fn run_dispatches_on_the_task_command() {
    let direct = run(&shipped("grim_verify.json"), &["verify"]);
    let via_task = run(&shipped("grim_verify.json"), &["run"]);
    assert_eq!(via_task.status.code(), Some(0));
    let strip = |o: &Output| {
        let mut v = json(o);
        v["metadata"]["command"] = Value::Null;
        v
    };
    assert_eq!(strip(&direct), strip(&via_task));
}

#[test]
fn verify_writes_reports_with_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .arg("--config")
        .arg(shipped("grim_verify.json"))
        .arg("--tol")
        .arg("1e-10")
        .arg("verify")
        .env("ZDMEM_OUT", dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("verify.json")).unwrap()).unwrap();
    assert_eq!(doc["metadata"]["tolerances"]["relation"], 1e-10);
    let csv = std::fs::read_to_string(dir.path().join("residuals.csv")).unwrap();
    assert!(csv.starts_with("# schema_version: 1"));
    assert!(csv.contains("# config_sha256:"));
}

#[test]
fn catalog_lists_the_spot_checked_rows() {
    let out = bin().args(["catalog", "--format", "csv"]).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    let find = |name: &str| {
        rows.iter()
            .find(|r| &r[0] == name)
            .unwrap_or_else(|| panic!("{name}"))
            .clone()
    };
    assert!(find("tftn")[2].contains("[s2 - s1 + (T - S)]"));
    assert!(find("g1_equalizer_P")[2].contains("s2 - P"));
    assert!(find("grim")[2].contains("P(1,2) = 0"));
}
