use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use burgers_lab::fit_exponent;
use serde_json::Value;
use tempfile::TempDir;

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_burgers-lab"))
        .args(args)
        .env_remove("BURGERS_LAB_THREADS")
        .output()
        .expect("binary runs")
}

struct Run {
    _dir: TempDir,
    out: PathBuf,
    output: Output,
}

impl Run {
    fn code(&self) -> i32 {
        self.output.status.code().unwrap()
    }

    fn report(&self, scenario: &str) -> Value {
        let text = std::fs::read_to_string(self.out.join(format!("{scenario}.json"))).unwrap();
        serde_json::from_str(&text).unwrap()
    }

    fn stderr(&self) -> String {
        String::from_utf8_lossy(&self.output.stderr).into_owned()
    }
}

fn run(scenario: &str, config: &str) -> Run {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("config.toml");
    std::fs::write(&cfg, config).unwrap();
    let out = dir.path().join("out");
    let output = lab(&[scenario, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    Run { _dir: dir, out, output }
}

fn assertion<'a>(report: &'a Value, name: &str) -> &'a Value {
    report["assertions"]
        .as_array()
        .unwrap()
        .iter()
        .find(|a| a["name"] == name)
        .unwrap_or_else(|| panic!("no assertion '{name}'"))
}

fn files(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    names
}

#[test]
fn free_ground_state() {
    let r = run("groundstate", "[potential]\nname = \"zero\"\n");
    assert_eq!(r.code(), 0, "{}", r.stderr());
    let rep = r.report("groundstate");
    let m = &rep["metrics"];
    assert!(m["e0"].as_f64().unwrap().abs() <= 1e-14);
    assert_eq!(m["a"].as_f64().unwrap(), 1.0);
    assert_eq!(m["b"].as_f64().unwrap(), 1.0);
    assert!(m["residual"].as_f64().unwrap() <= 1e-10);
    for key in ["config", "files", "metrics", "assertions", "runtime_seconds"] {
        assert!(rep.get(key).is_some(), "missing {key}");
    }
    assert_eq!(files(&r.out), ["groundstate.json", "groundstate_omega.csv"]);
}

#[test]
fn invalid_config_exits_2_without_output() {
    let r = run("solve", "seed = 3\ntimes = [2, 8, 4]\n");
    assert_eq!(r.code(), 2);
    assert!(r.stderr().contains("config.toml:2: times must be strictly increasing"), "{}", r.stderr());
    assert!(!r.out.exists());

    let r = run("solve", "[grid]\nn = 64\nsize = 3\n");
    assert_eq!(r.code(), 2);
    assert!(r.stderr().contains("config.toml:3:"), "{}", r.stderr());
}

#[test]
fn missing_config_exits_2() {
    let out = lab(&["band", "--config", "/nonexistent/config.toml"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn kernel_refusal_exits_3_without_output() {
    let r = run(
        "kernel-decay",
        "times = [1, 2, 3, 4]\n[potential]\nname = \"zero\"\n[kernel]\nn_bands = 2\n",
    );
    assert_eq!(r.code(), 3);
    assert!(r.stderr().contains("increase n_bands or t"), "{}", r.stderr());
    assert!(!r.out.exists());
}

#[test]
fn free_kernel_decay_passes_and_fits_exactly() {
    let r = run(
        "kernel-decay",
        "times = [1, 2, 4, 8]\n[potential]\nname = \"zero\"\n[kernel]\nx_per_cell = 4\nwrite_slices = false\n",
    );
    assert_eq!(r.code(), 0, "{}", String::from_utf8_lossy(&r.output.stdout));
    let rep = r.report("kernel-decay");
    assert_eq!(assertion(&rep, "free integral diagnostic")["criterion"], 1);
    let fit = fit_exponent(&r.out.join("kernel-decay_diagnostics.csv"), "t", "integral").unwrap();
    assert!((fit.slope + 0.5).abs() <= 1e-6, "slope {}", fit.slope);
    let fit = fit_exponent(&r.out.join("kernel-decay_diagnostics.csv"), "t", "pointwise").unwrap();
    assert!((fit.slope + 1.0).abs() <= 1e-6, "slope {}", fit.slope);
}

#[test]
fn failed_assertion_exits_1_and_still_writes() {
    // the amplitude-1 cosine band is not quadratic to 1e-3 on |k| ≤ 0.1
    let r = run("band", "");
    assert_eq!(r.code(), 1);
    let rep = r.report("band");
    assert_eq!(assertion(&rep, "quadratic band minimum")["passed"], false);
    assert_eq!(assertion(&rep, "unique band minimum at k = 0")["passed"], true);
    assert!(r.out.join("band_bands.csv").exists());

    let r = run("band", "[potential]\namplitude = 0.1\n");
    assert_eq!(r.code(), 0);
}

#[test]
fn every_assertion_appears_once() {
    let r = run("counterexample", "");
    assert_eq!(r.code(), 0);
    let rep = r.report("counterexample");
    let names: Vec<&str> = rep["assertions"].as_array().unwrap().iter().map(|a| a["name"].as_str().unwrap()).collect();
    let mut unique = names.clone();
    unique.sort();
    unique.dedup();
    assert_eq!(unique.len(), names.len());
    assert!(rep["assertions"].as_array().unwrap().iter().all(|a| a["passed"].is_boolean()));
    let phi = rep["metrics"]["phi_at_shell_1"].as_f64().unwrap();
    assert!((phi - 1.0).abs() <= 0.1);
}

#[test]
fn identical_configs_reproduce_csv_bit_exactly() {
    let config = "times = [0.5, 1, 2]\n[grid]\nn = 32\n";
    let a = run("solve", config);
    let b = run("solve", config);
    assert_eq!(a.code(), b.code());
    for name in ["solve_velocity.csv", "solve_distance.csv"] {
        assert_eq!(std::fs::read(a.out.join(name)).unwrap(), std::fs::read(b.out.join(name)).unwrap());
    }
}

#[test]
fn two_dimensional_solve_checks_curl() {
    let r = run("solve", "times = [0.5, 1, 2]\n[grid]\nn = 16\ndim = 2\n[potential]\nname = \"separable-2d\"\namplitude = 0.5\n[psi0]\namplitude = 0.5\n");
    let rep = r.report("solve");
    assert_eq!(assertion(&rep, "curl-free velocity")["criterion"], 9);
    let csv = std::fs::read_to_string(r.out.join("solve_velocity.csv")).unwrap();
    assert!(csv.starts_with("x,y,u1,u2,t\n"));
    assert_eq!(csv.lines().count(), 1 + 3 * 256);
}

#[test]
fn compare_reports_refinement() {
    let r = run("compare", "times = [0.5, 1]\n[grid]\nn = 128\n[compare]\ndt = 2e-3\n");
    assert_eq!(r.code(), 0, "{}", String::from_utf8_lossy(&r.output.stdout));
    let rep = r.report("compare");
    assert_eq!(assertion(&rep, "gap decreases under refinement")["passed"], true);
    let table = std::fs::read_to_string(r.out.join("compare_convergence.csv")).unwrap();
    assert!(table.starts_with("n,dt,t,gap\n128,0.002,1,"));
    assert_eq!(rep["metrics"]["scheme"], "imex-integrating-factor");
}

#[test]
fn threads_flag_and_environment() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "").unwrap();
    let out = dir.path().join("o");
    let bad = lab(&["counterexample", "--config", cfg.to_str().unwrap(), "--threads", "0"]);
    assert_eq!(bad.status.code(), Some(2));
    let ok = Command::new(env!("CARGO_BIN_EXE_burgers-lab"))
        .args(["counterexample", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
        .env("BURGERS_LAB_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(ok.status.code(), Some(0));
}

#[test]
fn help_documents_schemas_and_defaults() {
    let out = lab(&["--help"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("kernel-decay_diagnostics.csv"));
    assert!(text.contains("DEFAULTS"));
    assert!(text.contains("EXIT CODES"));
}

#[test]
fn fit_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("d.csv");
    let rows: String = [1.0f64, 2.0, 4.0, 8.0, 16.0].iter().map(|t| format!("{t},{}\n", 3.0 / t.sqrt())).collect();
    std::fs::write(&csv, format!("t,v\n{rows}")).unwrap();
    let out = lab(&["fit", csv.to_str().unwrap(), "--y", "v"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8_lossy(&out.stdout);
    let slope: f64 = text.lines().next().unwrap().strip_prefix("slope ").unwrap().parse().unwrap();
    assert!((slope + 0.5).abs() <= 1e-12);
}
