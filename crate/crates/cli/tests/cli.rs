use serde_json::Value;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn fmflow(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fmflow")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.toml");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn manifest(dir: &Path, command: &str) -> Value {
    serde_json::from_slice(&fs::read(dir.join(format!("{command}.manifest.json"))).unwrap()).unwrap()
}

fn sha256_of(path: &Path) -> String {
    fmflow::analysis::run::sha256_hex(&fs::read(path).unwrap())
}

const SLAB: &str = "dim = 1\nalpha = 0.5\nseed = 3\n[grid]\nt_max = 6.0\n[transport]\ntimes = [1.0, 4.0]\npoints = 3\nmass_order = 4\n[mc]\nparticles = 5000\n";

#[test]
fn steady_reports_the_normalisation_constant() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "dim = 2\nalpha = 0.5\n[grid]\nn_theta = 8\n");
    let out = dir.path().join("out");
    let res = fmflow(&["steady", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let m = manifest(&out, "steady");
    let c_s = m["results"]["c_s"].as_f64().unwrap();
    assert!((c_s - 2.0 * std::f64::consts::PI.sqrt()).abs() < 1e-6);
    assert_eq!(m["status"], "ok");
    assert_eq!(m["partial"], false);
}

#[test]
fn manifest_hashes_every_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SLAB);
    let out = dir.path().join("out");
    assert!(fmflow(&["flux", "--config", &cfg, "--out", out.to_str().unwrap()]).status.success());
    let m = manifest(&out, "flux");
    let files = m["outputs"].as_array().unwrap();
    assert_eq!(files.len(), 2);
    for f in files {
        let name = f["file"].as_str().unwrap();
        assert_eq!(f["sha256"].as_str().unwrap(), sha256_of(&out.join(name)));
    }
    assert!(m["results"]["residual"].as_f64().is_some());
    assert!(m["wall_clock_seconds"].as_f64().is_some());
}

#[test]
fn transport_reuses_the_flux_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SLAB);
    let out = dir.path().join("out");
    let o = out.to_str().unwrap();
    assert!(fmflow(&["flux", "--config", &cfg, "--out", o]).status.success());
    let before = sha256_of(&out.join("flux.csv"));
    let res = fmflow(&["transport", "--config", &cfg, "--out", o]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let m = manifest(&out, "transport");
    let flux = m["outputs"].as_array().unwrap().iter().find(|f| f["file"] == "flux.csv").unwrap().clone();
    assert_eq!(flux["reused"], true);
    assert_eq!(flux["sha256"].as_str().unwrap(), before);
    let drift = m["results"]["max_relative_mass_drift"].as_f64().unwrap();
    assert!(drift < 5e-3, "{drift}");

    // A changed grid invalidates the cached table.
    let cfg2 = write_config(dir.path(), &SLAB.replace("t_max = 6.0", "t_max = 5.0"));
    assert!(fmflow(&["transport", "--config", &cfg2, "--out", o]).status.success());
    let m = manifest(&out, "transport");
    let flux = m["outputs"].as_array().unwrap().iter().find(|f| f["file"] == "flux.csv").unwrap().clone();
    assert_eq!(flux["reused"], false);
}

#[test]
fn monte_carlo_output_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SLAB);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let res = fmflow(&["mc", "--config", &cfg, "--out", d.to_str().unwrap(), "--seed", "11", "--threads", "1"]);
        assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    }
    for f in ["mc_flux.csv", "mc_density.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap());
    }
    let m = manifest(&a, "mc");
    assert_eq!(m["seed"], 11);
    assert_eq!(m["results"]["initial_weight"], m["results"]["final_weight"]);
    let c = dir.path().join("c");
    assert!(fmflow(&["mc", "--config", &cfg, "--out", c.to_str().unwrap(), "--seed", "12"]).status.success());
    assert_ne!(fs::read(a.join("mc_flux.csv")).unwrap(), fs::read(c.join("mc_flux.csv")).unwrap());
}

#[test]
fn rates_and_lln_produce_tables() {
    let dir = tempfile::tempdir().unwrap();
    let text = "dim = 1\nalpha = 1.0\n[grid]\nt_max = 50.0\n[rates]\nwindow = [10.0, 50.0]\n[lln]\nn = [5]\nm = [1]\ntrials = 10000\ngamma_points = 2\n";
    let cfg = write_config(dir.path(), text);
    let out = dir.path().join("out");
    let o = out.to_str().unwrap();
    let res = fmflow(&["rates", "--config", &cfg, "--out", o]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let m = manifest(&out, "rates");
    let p = m["results"]["fit"]["exponent"].as_f64().unwrap();
    assert!(p < -0.5 && p > -1.5, "{p}");
    assert_eq!(m["results"]["envelope"]["pass"], true);
    assert!(fmflow(&["lln", "--config", &cfg, "--out", o]).status.success());
    let table = fs::read_to_string(out.join("lln.csv")).unwrap();
    assert_eq!(table.lines().count(), 3);
}

#[test]
fn damped_flux_is_below_the_undamped_flux() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &format!("{SLAB}[damping]\nnu0 = 1.0\nkappa = 4.0\n"));
    let out = dir.path().join("out");
    let o = out.to_str().unwrap();
    assert!(fmflow(&["damped", "--config", &cfg, "--out", o]).status.success());
    assert!(fmflow(&["flux", "--config", &cfg, "--out", o]).status.success());
    let d = manifest(&out, "damped")["results"]["sup"].as_f64().unwrap();
    let u = manifest(&out, "flux")["results"]["sup"].as_f64().unwrap();
    assert!(d <= u);
}

#[test]
fn exit_codes_distinguish_validation_errors() {
    let dir = tempfile::tempdir().unwrap();
    let o = dir.path().join("out");
    let o = o.to_str().unwrap();
    let bad = write_config(dir.path(), "dim = 1\nalpha = 0.0\n");
    let res = fmflow(&["flux", "--config", &bad, "--out", o]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("`alpha`"));

    let res = fmflow(&["flux", "--config", "/nonexistent/config.toml", "--out", o]);
    assert_eq!(res.status.code(), Some(2));

    let vel = write_config(dir.path(), &format!("{SLAB}[damping]\nnu0 = 1.0\nexponent = 0.5\nkappa = 4.0\n"));
    let res = fmflow(&["damped", "--config", &vel, "--out", o]);
    assert_eq!(res.status.code(), Some(2));
    let m = manifest(Path::new(o), "damped");
    assert_eq!(m["status"], "failed");

    let none = write_config(dir.path(), SLAB);
    assert_eq!(fmflow(&["damped", "--config", &none, "--out", o]).status.code(), Some(2));
    assert_eq!(fmflow(&["bogus", "--config", &none]).status.code(), Some(2));
}

#[test]
fn json_configs_are_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("config.json");
    fs::write(&path, r#"{"dim": 1, "alpha": 1.0, "profile": {"kind": "walls", "left": 0.5, "right": 1.0}}"#).unwrap();
    let out = dir.path().join("out");
    let res = fmflow(&["steady", "--config", path.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let csv = fs::read_to_string(out.join("steady.csv")).unwrap();
    assert!(csv.starts_with("index,coordinate,temperature,boundary_flux\n"));
}
