use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_cone-forge"));
    c.env_remove("CONE_FORGE_CONFIG");
    c
}

fn data(name: &str) -> String {
    format!("{}/../../data/spectra/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn scratch(name: &str, contents: &str) -> PathBuf {
    let p = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join(name);
    std::fs::write(&p, contents).unwrap();
    p
}

fn run(c: &mut Command) -> Output {
    c.output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stdout)))
}

#[test]
fn s5_rates_are_integers() {
    let o = run(bin().args(["spectra", "rates", "--input", &data("s5.json"), "--p", "0", "--window", "[-3:6]", "--verify"]));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("lambda,degree,mult,type,log_mode,lambda_exact"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    let lambdas: Vec<i64> = rows.iter().map(|r| r[0].parse().unwrap()).collect();
    assert_eq!(lambdas, vec![0, 1, 2, 3, 4, 5, 6]);
    assert_eq!(rows[2][2], "20");
}

#[test]
fn partial_spectrum_one_forms() {
    let o = run(bin().args(["spectra", "rates", "--input", &data("s2xs3_partial.json"), "--p", "1", "--window", "[-3:0]", "--family", "one-form"]));
    assert_eq!(code(&o), 0);
    assert_eq!(String::from_utf8(o.stdout).unwrap().lines().count(), 1);
}

#[test]
fn malformed_json_is_usage_error() {
    let p = scratch("bad.json", "{ \"betti\": [1, 0,");
    let o = run(bin().args(["spectra", "rates", "--input", p.to_str().unwrap(), "--window", "0:1"]));
    assert_eq!(code(&o), 2);
    assert!(o.stdout.is_empty());
}

#[test]
fn duality_violation_is_rejected() {
    let p = scratch("dual.json", r#"{"betti": [1, 1, 0, 0, 0, 1], "coexact_modes": [], "constraints": [], "complete_below": {}}"#);
    let o = run(bin().args(["spectra", "rates", "--input", p.to_str().unwrap(), "--window", "0:1"]));
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("duality"));
}

#[test]
fn symmetric_index_change() {
    let o = run(bin().args(["spectra", "index-change", "--input", &data("s5.json"), "--weights", ";-1/2", "--weights-prime", ";1/2", "--verify"]));
    assert_eq!(code(&o), 0);
    let v = stdout_json(&o);
    assert_eq!(v["N"], 2);
    assert_eq!(v["index"], "-1");
}

#[test]
fn kernel_nmax_5_has_ten_rows() {
    let o = run(bin().args(["edge", "kernel", "--nmax", "5", "--verify"]));
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().count(), 11);
    let ns: Vec<i64> = text.lines().skip(1).map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(ns, vec![-5, -4, -3, -2, -1, 1, 2, 3, 4, 5]);
}

#[test]
fn edge_solve_round_trips_sampled_rhs() {
    let mut csv = String::from("r,value\n");
    for i in 0..=400 {
        let r = 0.2 + 0.6 * i as f64 / 400.0;
        let s = (r - 0.2) * (0.8 - r);
        csv.push_str(&format!("{r},{}\n", s * s));
    }
    let p = scratch("z.csv", &csv);
    let o = run(bin().args(["edge", "solve", "--n", "1", "--mu", "0.5", "--rhs", p.to_str().unwrap(), "--verify"]));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8(o.stdout).unwrap().starts_with("r,value\n"));
}

#[test]
fn edge_split_rejects_bad_weights() {
    let o = run(bin().args(["edge", "split", "--n", "2", "--mu", "0.7", "--bump", "0.3,0.7,1", "--delta-pp", "0.5"]));
    assert_eq!(code(&o), 2);
    let o = run(bin().args(["edge", "split", "--n", "2", "--mu", "0.7", "--bump", "0.3,0.7,1", "--delta-pp", "1.5", "--verify"]));
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn bessel_eval_json() {
    let o = run(bin().args(["bessel", "eval", "--mu", "0,0.5", "--x", "0.01,2", "--verify"]));
    assert_eq!(code(&o), 0);
    let rows = stdout_json(&o)["rows"].as_array().unwrap().clone();
    assert_eq!(rows.len(), 4);
    // K_{1/2}(x) = √(π/2x) e^{−x}
    let k = rows[3]["value_k"].as_f64().unwrap();
    assert!((k - (std::f64::consts::PI / 4.0).sqrt() * (-2f64).exp()).abs() < 1e-13);
}

#[test]
fn lattice_build_invariants() {
    let o = run(bin().args(["lattice", "build", "--verify"]));
    assert_eq!(code(&o), 0);
    let v = stdout_json(&o);
    assert_eq!(v["signature"], serde_json::json!([3, 19]));
    assert!(v["determinant"] == "1" || v["determinant"] == "-1");
}

#[test]
fn lattice_c_class_is_unsat() {
    let o = run(bin().args(["lattice", "search", "--square", "-2", "--dots", "kplus=0", "--verify"]));
    assert_eq!(code(&o), 0);
    let v = stdout_json(&o);
    assert_eq!(v["unsat"], true);
    assert!(v["solutions"].as_array().unwrap().is_empty());
    assert_eq!(v["reduction"]["display"], "-36*t1^2 + 4*t2^2 = -2");
    assert_eq!(v["certificate"]["modulus"], 4);
}

#[test]
fn lattice_e_class_is_unsat() {
    let o = run(bin().args(["lattice", "search", "--square", "0", "--dots", "kplus=0,kminus=2", "--verify"]));
    assert_eq!(code(&o), 0);
    let v = stdout_json(&o);
    assert_eq!(v["unsat"], true);
    assert_eq!(v["certificate"]["form"], "linear:1");
}

#[test]
fn outputs_are_deterministic() {
    for args in [
        vec!["stenzel", "profile", "--n", "3", "--wmax", "5", "--steps", "1000"],
        vec!["stenzel", "ma-check", "--eps", "0.5,0.25", "--points", "4", "--seed", "9"],
        vec!["lattice", "generic", "--seed", "3"],
        vec!["g2", "lincheck", "--forms", "3", "--seed", "5"],
    ] {
        let a = run(bin().args(&args));
        let b = run(bin().args(&args));
        assert_eq!(code(&a), 0, "{args:?}");
        assert_eq!(a.stdout, b.stdout, "{args:?}");
        assert_eq!(a.stderr, b.stderr, "{args:?}");
    }
}

#[test]
fn config_file_and_env_precedence() {
    let strict = scratch("strict.json", r#"{"stenzel": {"cone_tol": 1e-14}}"#);
    let lenient = scratch("lenient.json", r#"{"stenzel": {"cone_tol": 1e-3}}"#);
    let args = ["stenzel", "ma-check", "--eps", "0,0", "--points", "5"];
    assert_eq!(code(&run(bin().args(args))), 0);
    assert_eq!(code(&run(bin().env("CONE_FORGE_CONFIG", &strict).args(args))), 1);
    assert_eq!(code(&run(bin().env("CONE_FORGE_CONFIG", &strict).arg("--config").arg(&lenient).args(args))), 0);
    let unknown = scratch("unknown.json", r#"{"stenzel": {"cone_toll": 1}}"#);
    assert_eq!(code(&run(bin().arg("--config").arg(&unknown).args(args))), 2);
}

#[test]
fn config_format_switches_tables_to_json() {
    let cfg = scratch("json.json", r#"{"format": "json"}"#);
    let o = run(bin().arg("--config").arg(&cfg).args(["edge", "kernel", "--nmax", "2"]));
    assert_eq!(code(&o), 0);
    assert_eq!(stdout_json(&o).as_array().unwrap().len(), 4);
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(code(&run(bin().args(["edge", "kernel"]))), 2);
    assert_eq!(code(&run(bin().args(["stenzel", "ma-check", "--eps", "1"]))), 2);
    assert_eq!(code(&run(bin().args(["spectra", "rates", "--input", "/nonexistent.json", "--window", "0:1"]))), 2);
    assert_eq!(code(&run(bin().args(["lattice", "search", "--square", "-2", "--dots", "nope=1"]))), 2);
}

#[test]
fn coarse_profile_fails_verification() {
    let o = run(bin().args(["stenzel", "profile", "--n", "3", "--wmax", "22", "--steps", "200"]));
    assert_eq!(code(&o), 1);
}
