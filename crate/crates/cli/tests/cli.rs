use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn qdsps(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qdsps"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("c.toml");
    fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

fn sorted_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    v.sort();
    v
}

#[test]
fn reruns_are_bit_identical() {
    let tmp = TempDir::new().unwrap();
    for scenario in ["hbt", "squeezing", "dbr"] {
        let a = tmp.path().join(format!("{scenario}_a"));
        let b = tmp.path().join(format!("{scenario}_b"));
        for out in [&a, &b] {
            let o = qdsps(&["run", scenario, "--seed", "7", "--out", out.to_str().unwrap()]);
            assert_eq!(code(&o), 0, "{}", stderr(&o));
        }
        assert_eq!(sorted_files(&a), sorted_files(&b), "{scenario}");
    }
}

#[test]
fn seed_changes_stochastic_output() {
    let tmp = TempDir::new().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    qdsps(&["run", "squeezing", "--seed", "1", "--out", a.to_str().unwrap()]);
    qdsps(&["run", "squeezing", "--seed", "2", "--out", b.to_str().unwrap()]);
    let read = |d: &Path| fs::read_to_string(d.join("squeezing_counts.csv")).unwrap();
    assert_ne!(read(&a), read(&b));
}

#[test]
fn every_artifact_carries_provenance() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("o");
    let o = qdsps(&["run", "hom", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    for (name, body) in sorted_files(&out) {
        let text = String::from_utf8(body).unwrap();
        if name.ends_with(".json") {
            let v: serde_json::Value = serde_json::from_str(&text).unwrap();
            assert_eq!(v["provenance"]["scenario"], "hom");
            assert_eq!(v["provenance"]["config_sha256"].as_str().unwrap().len(), 64);
        } else {
            assert!(text.starts_with("# qdsps "), "{name}");
            assert!(text.lines().next().unwrap().contains("seed=1"), "{name}");
        }
    }
}

#[test]
fn json_format_embeds_tables() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("o");
    let o = qdsps(&["run", "dbr", "--format", "json", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(!out.join("dbr.csv").exists());
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("dbr.json")).unwrap()).unwrap();
    let rows = v["tables"]["dbr"]["rows"].as_array().unwrap();
    assert!(!rows.is_empty());
}

#[test]
fn threshold_summary() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("o");
    let o = qdsps(&["run", "threshold", "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("threshold.json")).unwrap()).unwrap();
    let product = v["summary"]["product"].as_f64().unwrap();
    assert!((product - 0.712 * 0.79).abs() < 1e-12);
}

#[test]
fn config_overlay_is_recorded() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "scenario = \"dbr\"\n[dbr]\npoints = 11\n");
    let out = tmp.path().join("o");
    let o = qdsps(&["run", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let saved = fs::read_to_string(out.join("dbr_config.toml")).unwrap();
    assert!(saved.contains("points = 11"));
}

#[test]
fn defaults_validate_cleanly() {
    let o = qdsps(&["validate", "--all"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(o.stdout.is_empty());
}

#[test]
fn unknown_scenario_exits_2() {
    let o = qdsps(&["run", "warp-drive", "--out", "/nonexistent"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("warp-drive"));
}

#[test]
fn malformed_config_exits_2() {
    let tmp = TempDir::new().unwrap();
    for body in ["[detector\n", "[detector]\nefficency = 0.5\n", "[hbt]\nn_pulses = \"many\"\n"] {
        let cfg = write_config(tmp.path(), body);
        let o = qdsps(&["validate", "--config", &cfg]);
        assert_eq!(code(&o), 2, "{body}: {}", stderr(&o));
    }
}

#[test]
fn negative_efficiency_exits_3_and_names_key() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "[detector]\nefficiency = -0.1\n");
    let out = tmp.path().join("o");
    let o = qdsps(&["run", "hbt", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(code(&o), 3);
    assert!(stderr(&o).contains("detector.efficiency"));
    assert!(!out.exists());
}

#[test]
fn coarse_grid_cites_step_rule() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "[pulse]\ngrid_n = 4096\ngrid_dt_ps = 0.1\n");
    let o = qdsps(&["validate", "--config", &cfg, "--scenario", "rabi", "--format", "json"]);
    assert_eq!(code(&o), 3);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let first = &v.as_array().unwrap()[0];
    assert_eq!(first["key"], "pulse.grid_dt_ps");
    assert!(first["message"].as_str().unwrap().contains("0.05/Ω_max"));
}

#[test]
fn validate_lists_all_violations() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "[detector]\nefficiency = 1.5\n[hbt]\nwindow_ns = 20\n");
    let o = qdsps(&["validate", "--config", &cfg, "--scenario", "hbt"]);
    assert_eq!(code(&o), 3);
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("detector.efficiency"), "{stdout}");
    assert!(stdout.contains("hbt.window_ns"), "{stdout}");
}
