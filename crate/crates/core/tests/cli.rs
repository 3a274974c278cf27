//! The `normsolve` binary: exit codes, artifacts and determinism.

use std::path::Path;
use std::process::{Command, Output};

const H0: &str = "N = 3\np1 = 2.5\np2 = 2.5\nr1 = 2\nr2 = 2\na1 = 1\na2 = 1\nbeta_fraction = 0.5\n";

fn normsolve(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_normsolve"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn constants_report_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("h0.conf"), H0).unwrap();
    for out in ["a", "b"] {
        let o = normsolve(dir.path(), &["constants", "--config", "h0.conf", "--out", out]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a = std::fs::read(dir.path().join("a/constants.json")).unwrap();
    let b = std::fs::read(dir.path().join("b/constants.json")).unwrap();
    assert_eq!(a, b);
    let v = json(&dir.path().join("a/constants.json"));
    for key in ["rho0", "beta0", "K1", "K2", "K3", "q"] {
        assert!(v[key].as_f64().unwrap() > 0.0, "{key}");
    }
    assert_eq!(v["regime"], "H0");
    assert_eq!(v["inequalities"]["hold"], true);
    assert!((v["beta"].as_f64().unwrap() - 0.5 * v["beta0"].as_f64().unwrap()).abs() < 1e-14);
}

#[test]
fn malformed_config_exits_1_with_line() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.conf"), "N = 3\n\np1 = oops\n").unwrap();
    let o = normsolve(dir.path(), &["constants", "--config", "bad.conf"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));

    std::fs::write(dir.path().join("tbl.conf"), "[params]\nN = 3\n").unwrap();
    let o = normsolve(dir.path(), &["constants", "--config", "tbl.conf"]);
    assert_eq!(o.status.code(), Some(1));

    let o = normsolve(dir.path(), &["solve-local"]);
    assert_eq!(o.status.code(), Some(1), "missing parameters");
}

#[test]
fn regime_rejection_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    // every exponent mass-supercritical: neither H0 nor H1
    let other = "N = 3\np1 = 4\np2 = 4\nr1 = 2\nr2 = 2\na1 = 1\na2 = 1\nbeta = 0.1\n";
    std::fs::write(dir.path().join("other.conf"), other).unwrap();
    let o = normsolve(dir.path(), &["solve-mp", "--config", "other.conf"]);
    assert_eq!(o.status.code(), Some(3));
    // linking asked for an H0 configuration
    std::fs::write(dir.path().join("h0.conf"), H0).unwrap();
    let o = normsolve(dir.path(), &["solve-link", "--config", "h0.conf"]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn scalar_ground_summary() {
    let dir = tempfile::tempdir().unwrap();
    let o = normsolve(dir.path(), &["scalar-ground", "--N", "1", "--p", "4", "--out", "."]);
    assert!(o.status.success());
    let v = json(&dir.path().join("scalar_ground.json"));
    assert!((v["C0"].as_f64().unwrap() - 4.0 / 3.0).abs() < 1e-5);
    assert!((v["C1"].as_f64().unwrap() - 16.0 / 3.0).abs() < 1e-5);
    assert!(v["gn_constant"].as_f64().unwrap() > 0.0);
}

#[test]
fn local_then_landscape_then_evolve() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("h0.conf"), H0).unwrap();
    let o = normsolve(dir.path(), &["solve-local", "--config", "h0.conf", "--out", "run"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let rec = json(&dir.path().join("run/local.json"));
    assert_eq!(rec["classification"], "LocalMin");
    assert!(rec["energy"].as_f64().unwrap() < 0.0);
    assert!(rec["Q_residual"].as_f64().unwrap() <= 1e-5);

    let o = normsolve(dir.path(), &["landscape", "--solution", "run/local.json", "--out", "run"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let land = json(&dir.path().join("run/landscape.json"));
    let pts = land["stationary_points"].as_array().unwrap();
    assert_eq!(pts.len(), 2);
    // the minimizer sits at the fibering minimum t = 1
    assert_eq!(pts[0]["kind"], "Min");
    assert!((pts[0]["t"].as_f64().unwrap() - 1.0).abs() < 1e-5);
    let csv = std::fs::read_to_string(dir.path().join("run/landscape.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("t,theta"));
    assert_eq!(csv.lines().count(), 602);

    let o = normsolve(
        dir.path(),
        &["evolve", "--solution", "run/local.json", "--T", "0.5", "--grid-n", "1025", "--out", "run"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(dir.path().join("run/evolve.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,mass1,mass2,energy,orbital_distance"));
    let last: Vec<f64> = lines.last().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert!((last[0] - 0.5).abs() < 1e-12);
    assert!((last[1] - 1.0).abs() < 1e-10 && (last[2] - 1.0).abs() < 1e-10);
    assert!(last[4] < 1e-4);
}

#[test]
fn overrides_via_set() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("h0.conf"), H0).unwrap();
    let o = normsolve(dir.path(), &["constants", "--config", "h0.conf", "--set", "a1=2", "--out", "."]);
    assert!(o.status.success());
    assert_eq!(json(&dir.path().join("constants.json"))["params"]["a1"], 2.0);
    let o = normsolve(dir.path(), &["constants", "--config", "h0.conf", "--set", "nope=2"]);
    assert_eq!(o.status.code(), Some(1));
}
