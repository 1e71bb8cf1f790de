use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const CONSTANT_N: &str = r#"{
  "profile": {"kind": "constant_n", "n": 3.141592653589793, "rho0": 1.0},
  "variant": "boussinesq",
  "grid_size": 1025,
  "modes": 4
}"#;

fn strato(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_strato")).args(args).output().unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn run_ok(cmd: &[&str], config: &Path, out: &Path) {
    let mut args = cmd.to_vec();
    args.extend(["--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    let o = strato(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

fn read_rows(path: &Path) -> Vec<Vec<String>> {
    csv::Reader::from_path(path)
        .unwrap()
        .records()
        .map(|r| r.unwrap().iter().map(String::from).collect())
        .collect()
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn modes_writes_speeds_shapes_and_manifest() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", CONSTANT_N);
    let out = tmp.path().join("out");
    run_ok(&["modes"], &cfg, &out);
    let speeds = read_rows(&out.join("speeds.csv"));
    assert_eq!(speeds.len(), 4);
    assert_eq!(speeds[0][0], "1");
    let c1: f64 = speeds[0][1].parse().unwrap();
    assert!((c1 - 1.0).abs() < 1e-5);
    let modes = read_rows(&out.join("modes.csv"));
    assert_eq!(modes.len(), 1025);
    assert_eq!(modes[0].len(), 1 + 4 + 5);
    let m = manifest(&out);
    assert_eq!(m["command"], "modes");
    assert_eq!(m["config"]["modes"], 4);
    assert!(m["conventions"]["gamma_sign"].is_string());
    assert!(m["conventions"]["dealias"].is_string());
    assert!(m["version"].is_string());
    assert!(m["results"]["max_orthonormality_residual"]["f_basis"].as_f64().unwrap() < 1e-8);
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", CONSTANT_N);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_ok(&["mixing"], &cfg, &a);
    run_ok(&["mixing"], &cfg, &b);
    for f in ["alpha.csv", "selection.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn constant_n_alpha_is_diagonal() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", CONSTANT_N);
    let out = tmp.path().join("out");
    run_ok(&["mixing"], &cfg, &out);
    let rows = read_rows(&out.join("alpha.csv"));
    assert_eq!(rows.len(), 4);
    for (i, row) in rows.iter().enumerate() {
        for (j, v) in row[1..].iter().enumerate() {
            let v: f64 = v.parse().unwrap();
            if i != j {
                assert!(v.abs() < 1e-8, "alpha[{i}][{j}] = {v}");
            }
        }
    }
    let sel = read_rows(&out.join("selection.csv"));
    assert!(!sel.is_empty());
    for r in sel {
        let (p, q, n): (usize, usize, usize) = (r[0].parse().unwrap(), r[1].parse().unwrap(), r[2].parse().unwrap());
        assert!(p + q == n || p.abs_diff(q) == n);
    }
}

#[test]
fn missing_profile_file_exits_2() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", r#"{"profile_file": "nowhere.csv"}"#);
    let o = strato(&["modes", "--config", cfg.to_str().unwrap(), "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("nowhere.csv"), "{err}");
    assert_eq!(err.trim().lines().count(), 1);
}

#[test]
fn input_errors_exit_2() {
    let tmp = TempDir::new().unwrap();
    let bad = write_config(tmp.path(), "bad.json", r#"{"modes": 4, "colour": "red"}"#);
    let o = strato(&["modes", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(strato(&["modes", "--config", tmp.path().join("absent.json").to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(strato(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(strato(&["--version"]).status.code(), Some(0));
}

#[test]
fn too_many_modes_exits_3() {
    let tmp = TempDir::new().unwrap();
    let text = CONSTANT_N.replace("\"grid_size\": 1025", "\"grid_size\": 33").replace("\"modes\": 4", "\"modes\": 20");
    let cfg = write_config(tmp.path(), "c.json", &text);
    let o = strato(&["modes", "--config", cfg.to_str().unwrap(), "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("resolution"));
}

#[test]
fn unstable_profile_exits_3() {
    let tmp = TempDir::new().unwrap();
    std::fs::write(tmp.path().join("p.csv"), "z,rho\n-1,1.0\n-0.5,1.2\n0,1.4\n").unwrap();
    let cfg = write_config(tmp.path(), "c.json", r#"{"profile_file": "p.csv", "grid_size": 129, "modes": 2}"#);
    let o = strato(&["modes", "--config", cfg.to_str().unwrap(), "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

const SIMULATION: &str = r#"{
  "profile": {"kind": "constant_n", "n": 3.141592653589793, "rho0": 1.0},
  "variant": "boussinesq",
  "grid_size": 257,
  "modes": 3,
  "horizontal": {"nx": 32, "length": 6.283185307179586},
  "simulation": {
    "dt": 0.01, "steps": 200, "snapshot_every": 50,
    "epsilon": EPS, "mu": 1.0, "buoyancy": 3.141592653589793, "modes_from": "explicit",
    "initial": {
      "components": [
        {"mode": 1, "field": "v", "wavenumber_index": 1, "amplitude": 0.5},
        {"mode": 2, "field": "rho", "wavenumber_index": 2, "amplitude": 0.2, "phase": 0.3}
      ],
      "random": {"seed": 11, "amplitude": 0.05, "max_wavenumber_index": 5}
    }
  }
}"#;

fn final_state(dir: &Path) -> Vec<Vec<f64>> {
    read_rows(&dir.join("final_state.csv"))
        .into_iter()
        .map(|r| r.iter().map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn zero_epsilon_nonlinear_matches_linear_run() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", &SIMULATION.replace("EPS", "0.0"));
    let (nl, lin) = (tmp.path().join("nl"), tmp.path().join("lin"));
    run_ok(&["simulate", "nonlinear"], &cfg, &nl);
    run_ok(&["simulate", "linear-uncoupled"], &cfg, &lin);
    let (a, b) = (final_state(&nl), final_state(&lin));
    assert_eq!(a.len(), 32);
    let diff = a.iter().flatten().zip(b.iter().flatten()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(diff < 1e-8, "{diff}");

    let ts = read_rows(&nl.join("timeseries.csv"));
    assert_eq!(ts.len(), 5);
    assert!(nl.join("snapshot_00004.csv").exists());
    let m = manifest(&nl);
    assert_eq!(m["kind"], "nonlinear");
    assert!(m["results"]["dropped_pairs"].is_u64());
}

#[test]
fn nonlinear_run_is_deterministic_and_coupled_run_conserves_energy() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", &SIMULATION.replace("EPS", "0.2"));
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_ok(&["simulate", "nonlinear"], &cfg, &a);
    run_ok(&["simulate", "nonlinear"], &cfg, &b);
    for f in ["final_state.csv", "timeseries.csv", "snapshot_00002.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }

    let cfg = write_config(tmp.path(), "d.json", &SIMULATION.replace("EPS", "0.0").replace("\"explicit\"", "\"profile\""));
    let c = tmp.path().join("c");
    run_ok(&["simulate", "linear-coupled"], &cfg, &c);
    let m = manifest(&c);
    let (e0, e1) = (m["results"]["energy_initial"].as_f64().unwrap(), m["results"]["energy_final"].as_f64().unwrap());
    assert!(((e1 - e0) / e0).abs() < 1e-10);
}

#[test]
fn sharp_limit_reports_sweep_and_orders() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", r#"{"sharp_limit": {"shape_rows": 129}}"#);
    let out = tmp.path().join("out");
    run_ok(&["sharp-limit"], &cfg, &out);
    let rows = read_rows(&out.join("report.csv"));
    assert_eq!(rows.len(), 4);
    let shapes = read_rows(&out.join("shapes.csv"));
    assert_eq!(shapes.len(), 129);
    assert_eq!(shapes[0].len(), 2 + 4);
    let m = manifest(&out);
    let order = m["results"]["speed_order"].as_f64().unwrap();
    assert!((0.8..=1.2).contains(&order));
    assert!(m["results"]["shape_order"].is_f64());
    assert_eq!(m["config"]["sharp_limit"]["grid_size"], 65537);
}
