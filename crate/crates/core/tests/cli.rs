use std::f64::consts::PI;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_scatterlab"))
        .args(args)
        .env_remove("SCATTERLAB_WORKERS")
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!("stdout is not JSON ({e}): {}", String::from_utf8_lossy(&out.stdout))
    })
}

#[test]
fn mfp_on_disk_matches_area_over_perimeter() {
    let out = run(&["mfp", "--preset", "disk", "--samples", "20000", "--seed", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert_eq!(r["command"], "mfp");
    assert_eq!(r["seed"], 3);
    // unit disk: π · π / (2π)
    let prediction = r["payload"]["prediction"].as_f64().unwrap();
    assert!((prediction - PI / 2.0).abs() < 1e-9);
    let mean = r["payload"]["space"]["mean"].as_f64().unwrap();
    let se = r["payload"]["space"]["stderr"].as_f64().unwrap();
    assert!((mean - PI / 2.0).abs() < 5.0 * se, "{mean} ± {se}");
}

#[test]
fn payload_does_not_depend_on_workers() {
    let args = |w: &'static str| ["mfp", "--preset", "torus-two-balls", "--samples", "10000", "--seed", "9", "--workers", w];
    let one = json(&run(&args("1")));
    let eight = json(&run(&args("8")));
    assert_eq!(one["payload"], eight["payload"]);
}

#[test]
fn hear_recovers_disk_area_from_constant_chords() {
    let dir = tempfile::tempdir().unwrap();
    let lengths = dir.path().join("lengths.txt");
    let body: String = (0..100).map(|_| format!("{}\n", PI / 2.0)).collect();
    std::fs::write(&lengths, body).unwrap();
    let out_dir = dir.path().join("out");
    let out = run(&[
        "hear",
        "--lengths",
        lengths.to_str().unwrap(),
        "--boundary",
        &(2.0 * PI).to_string(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let r = json(&out);
    let vol = r["payload"]["vol_m"].as_f64().unwrap();
    assert!((vol - PI).abs() < 1e-12, "{vol}");
    assert!(out_dir.join("volume.csv").exists());
    assert!(out_dir.join("report.json").exists());
}

#[test]
fn probe_flags_open_corridor_on_sparse_torus() {
    let out = run(&["probe", "--preset", "torus-one-ball", "--samples", "5000", "--lmax", "50"]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert_eq!(r["payload"]["probe"]["free_corridor"], true);
    let warnings = r["payload"]["warnings"].as_array().unwrap();
    assert!(warnings.iter().any(|w| w.as_str().unwrap().contains("free corridor")));
}

#[test]
fn unknown_preset_is_a_validation_error() {
    let out = run(&["mfp", "--preset", "no-such-table"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["error"]["kind"], "config");
}

#[test]
fn bad_flag_is_a_usage_error() {
    let out = run(&["mfp", "--preset", "disk", "--samples", "many"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json(&out)["error"]["kind"], "usage");
}

#[test]
fn empty_length_file_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let lengths = dir.path().join("empty.txt");
    std::fs::write(&lengths, "").unwrap();
    let out = run(&["hear", "--lengths", lengths.to_str().unwrap(), "--boundary", "1"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out)["error"]["kind"], "empty_sequence");
}

#[test]
fn simulate_writes_orbit_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "simulate",
        "--preset",
        "ellipse",
        "--samples",
        "3",
        "--bounces",
        "20",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let jsonl = std::fs::read_to_string(dir.path().join("orbits.jsonl")).unwrap();
    assert_eq!(jsonl.lines().count(), 60);
    for line in jsonl.lines() {
        let v: Value = serde_json::from_str(line).unwrap();
        assert!(v["length"].as_f64().unwrap() > 0.0);
    }
    assert!(Path::new(&dir.path().join("orbits.csv")).exists());
}

#[test]
fn config_file_drives_the_cli() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("annulus.toml");
    std::fs::write(
        &cfg,
        r#"
name = "annulus"
[space]
kind = "euclidean"
dim = 2
[[pieces]]
shape = "ball"
center = [0.0, 0.0]
radius = 1.0
side = "outer"
[[pieces]]
shape = "ball"
center = [0.0, 0.0]
radius = 0.5
side = "obstacle"
"#,
    )
    .unwrap();
    let out = run(&["mfp", "--config", cfg.to_str().unwrap(), "--samples", "20000"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let r = json(&out);
    assert_eq!(r["table"], "annulus");
    // π · area / perimeter = π · (3π/4) / (3π)
    let expected = PI / 4.0;
    let mean = r["payload"]["space"]["mean"].as_f64().unwrap();
    let se = r["payload"]["space"]["stderr"].as_f64().unwrap();
    assert!((mean - expected).abs() < 5.0 * se, "{mean} ± {se}");
    let prediction = r["payload"]["prediction"].as_f64().unwrap();
    assert!((prediction - expected).abs() < 1e-6, "{prediction} vs {expected}");
}
