use serde_json::Value;
use std::path::Path;
use std::process::{Command, Output};

fn critnls(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_critnls"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn constants_run_writes_table_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = critnls(&["constants", "--N", "3", "--q", "4"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let table = read_json(&dir.path().join("constants.json"));
    assert_eq!(table["regime"], "Supercritical");
    let m = read_json(&dir.path().join("manifest.json"));
    assert_eq!(m["config"]["command"], "constants");
    assert_eq!(m["config"]["N"], 3);
    assert_eq!(m["exit_code"], 0);
    assert_eq!(m["artifacts"][0], "constants.json");
}

#[test]
fn ground_state_is_fully_certified() {
    let dir = tempfile::tempdir().unwrap();
    let o = critnls(&["ground-state", "--N", "3", "--q", "4", "--a", "1", "--mu", "1"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let g = read_json(&dir.path().join("ground_state.json"));
    for k in ["lambda_negative", "pohozaev_zero", "level_window", "positive_decreasing"] {
        assert_eq!(g["shooting"]["certified"][k], true, "{k}");
    }
    assert!(g["level_agreement"].as_f64().unwrap() < 1e-4);
    assert!(dir.path().join("profile.csv").exists());
}

#[test]
fn negative_coupling_reports_no_solution() {
    let dir = tempfile::tempdir().unwrap();
    let o = critnls(&["ground-state", "--N", "3", "--q", "4", "--a", "1", "--mu", "-1"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let d = read_json(&dir.path().join("defocusing.json"));
    assert_eq!(d["consistent"], true);
    assert_eq!(d["mass_matched_found"], false);
    assert!(!dir.path().join("ground_state.json").exists());
}

#[test]
fn usage_and_domain_errors_exit_64() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(critnls(&["constants", "--bogus"], dir.path()).status.code(), Some(64));
    assert_eq!(critnls(&["relax"], dir.path()).status.code(), Some(64));
    assert_eq!(critnls(&[], dir.path()).status.code(), Some(64));
    assert_eq!(critnls(&["constants", "--q", "7"], dir.path()).status.code(), Some(64));
}

#[test]
fn failed_prediction_exits_2_and_keeps_artifacts() {
    // too coarse in eps for the bound to drop below S^{3/2}/3
    let dir = tempfile::tempdir().unwrap();
    let o = critnls(&["bubbles", "--eps-list", "0.2,0.1,0.05,0.025"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let b = read_json(&dir.path().join("bubbles.json"));
    assert_eq!(b["bound_certified"], false);
    assert_eq!(read_json(&dir.path().join("manifest.json"))["exit_code"], 2);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"command": "fiber", "N": 3, "q": 2.5, "mu": 0.5, "samples": 3}"#).unwrap();
    let out = dir.path().join("out");
    let o = critnls(&["--config", cfg.to_str().unwrap(), "--samples", "2"], &out);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let f = read_json(&out.join("fiber.json"));
    let profiles = f["profiles"].as_array().unwrap();
    assert_eq!(profiles.len(), 2);
    assert!(profiles.iter().all(|p| p["report"]["critical_points"].as_array().unwrap().len() == 2));
    assert_eq!(read_json(&out.join("manifest.json"))["config"]["q"], 2.5);
}

#[test]
fn same_seed_gives_identical_artifacts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    for (dir, seed) in [(&a, "11"), (&b, "11"), (&c, "12")] {
        let o = critnls(&["fiber", "--seed", seed], dir.path());
        assert_eq!(o.status.code(), Some(0));
    }
    let read = |d: &tempfile::TempDir| std::fs::read(d.path().join("fiber.json")).unwrap();
    assert_eq!(read(&a), read(&b));
    assert_ne!(read(&a), read(&c));
}
