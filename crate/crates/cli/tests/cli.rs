use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_quartic-heat"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin().arg("--output-dir").arg(dir).args(args).output().unwrap()
}

fn schema_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schemas")
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn check_schema(name: &str, doc: &Value) {
    let schema = read_json(&schema_dir().join(format!("{name}.schema.json")));
    let compiled = jsonschema::JSONSchema::compile(&schema).unwrap();
    let msgs: Vec<String> = match compiled.validate(doc) {
        Ok(()) => Vec::new(),
        Err(errs) => errs.map(|e| format!("{} at {}", e, e.instance_path)).collect(),
    };
    assert!(msgs.is_empty(), "{name} does not match its schema: {msgs:?}");
}

fn ok(out: &Output) -> Value {
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    v.sort();
    v
}

#[test]
fn report_for_the_bilaplacian_constant() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.json");
    std::fs::write(&cfg, r#"{"coefficients": {"kind": "constant", "alpha": 1, "beta": 1, "gamma": 1}, "domain": {"n1": 33, "n2": 33}}"#)
        .unwrap();
    let out = tmp.path().join("out");
    let v = ok(&run(&out, &["--config", cfg.to_str().unwrap(), "report"]));
    assert_eq!(v["q"], 1.0);
    assert_eq!(v["k_star"], 8.0);
    assert!((v["sigma_star"].as_f64().unwrap() - 0.23623).abs() < 1e-5);
    assert_eq!(v["passed"], true);
    assert_eq!(v, read_json(&out.join("report.json")));
    check_schema("report", &v);
    check_schema("config", &read_json(&out.join("config.json")));
}

#[test]
fn report_on_a_sweep_lists_every_regime() {
    let tmp = tempfile::tempdir().unwrap();
    let v = ok(&run(tmp.path(), &["--preset", "q-sweep", "--n", "33", "report"]));
    check_schema("report", &v);
    assert!(v["q"].is_null());
    assert!(v["regimes"].as_array().unwrap().len() >= 2);
}

#[test]
fn algebra_verify_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let v = ok(&run(tmp.path(), &["algebra-verify", "--samples", "2000"]));
    check_schema("algebra", &v);
    assert_eq!(v["passed"], true);
    assert_eq!(v["psd_violations"], 0);
    assert!(v["identity_max_residual"].as_f64().unwrap() < 1e-10);
}

#[test]
fn algebra_verify_is_deterministic_per_seed() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let c = tempfile::tempdir().unwrap();
    let x = run(a.path(), &["--seed", "3", "algebra-verify", "--samples", "500"]);
    let y = run(b.path(), &["--seed", "3", "algebra-verify", "--samples", "500"]);
    let z = run(c.path(), &["--seed", "4", "algebra-verify", "--samples", "500"]);
    assert_eq!(x.stdout, y.stdout);
    assert_ne!(x.stdout, z.stdout);
    assert_eq!(
        std::fs::read(a.path().join("algebra.json")).unwrap(),
        std::fs::read(b.path().join("algebra.json")).unwrap()
    );
}

#[test]
fn distance_writes_a_grid_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let v = ok(&run(tmp.path(), &["--n", "33", "distance", "--source", "-0.5,0.25"]));
    check_schema("distance", &v);
    assert_eq!(v["passed"], true);
    let csv = std::fs::read_to_string(tmp.path().join("distance.csv")).unwrap();
    assert!(csv.starts_with("n1,n2,x1_min,x1_max,x2_min,x2_max\n"), "{}", &csv[..60]);
    let sweep = tempfile::tempdir().unwrap();
    let w = ok(&run(sweep.path(), &["--n", "33", "distance", "--method", "sweeping"]));
    check_schema("distance", &w);
    assert_eq!(w["method"], "fast_sweeping");
}

#[test]
fn kernel_slices_and_svg() {
    let tmp = tempfile::tempdir().unwrap();
    let v = ok(&run(tmp.path(), &["--n", "25", "kernel", "--times", "0.001,0.01", "--svg"]));
    check_schema("kernel", &v);
    let names = files(tmp.path());
    for k in 0..2 {
        for part in ["re", "im", "abs"] {
            let f = format!("kernel_{k}_{part}.csv");
            assert!(names.contains(&f), "{names:?}");
            let csv = std::fs::read_to_string(tmp.path().join(&f)).unwrap();
            assert!(csv.starts_with("n1,n2,x1_min,x1_max,x2_min,x2_max\n"));
        }
        let svg = std::fs::read_to_string(tmp.path().join(format!("kernel_{k}_log_abs.svg"))).unwrap();
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<rect").count(), 25 * 25);
    }
    let masses = v["masses"].as_array().unwrap();
    assert!(masses.iter().all(|m| (m.as_f64().unwrap() - 1.0).abs() < 0.05), "{masses:?}");
}

#[test]
fn bound_example_holds_and_is_sharp() {
    let tmp = tempfile::tempdir().unwrap();
    let v = ok(&run(tmp.path(), &["--preset", "bilaplacian", "--n", "33", "bound", "--epsilon", "0.02"]));
    check_schema("bound", &v);
    assert_eq!(v["violations"], Value::Array(vec![]));
    assert_eq!(v["sharpness"]["sigma_plus_delta_fails"], true);
    assert_eq!(v["passed"], true);
    let csv = std::fs::read_to_string(tmp.path().join("bound.csv")).unwrap();
    assert!(csv.starts_with("t,direction,lhs,rhs,margin\n"));
}

#[test]
fn bound_on_a_variable_field_uses_the_krylov_kernel() {
    let tmp = tempfile::tempdir().unwrap();
    let v = ok(&run(tmp.path(), &["--preset", "square-wave", "--n", "17", "bound", "--times", "0.01,0.03,0.1"]));
    check_schema("bound", &v);
    assert_eq!(v["kernel_method"], "krylov_exponential");
    assert!(v["sharpness"].is_null());
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["--n", "17", "bound", "--times", "0.01,0.1"];
    let x = run(a.path(), &args);
    let y = run(b.path(), &args);
    assert_eq!(x.status.code(), Some(0));
    assert_eq!(x.stdout, y.stdout);
    for f in ["bound.json", "bound.csv"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn usage_errors_exit_with_two() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.json");
    std::fs::write(&bad, "{ not json").unwrap();
    let unknown = tmp.path().join("unknown.json");
    std::fs::write(&unknown, r#"{"bound": {"epsilon": 0.1, "eps": 2}}"#).unwrap();
    let out = tmp.path().join("o");
    for args in [
        vec!["--config", bad.to_str().unwrap(), "report"],
        vec!["--config", unknown.to_str().unwrap(), "report"],
        vec!["report", "--no-such-flag"],
        vec!["frobnicate"],
        vec!["--preset", "nonexistent", "report"],
        vec!["bound", "--epsilon", "1.5"],
        vec!["distance", "--source", "1,2,3"],
        vec!["--preset", "square-wave", "--n", "17", "kernel", "--method", "fourier"],
    ] {
        let o = run(&out, &args);
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn runtime_failure_exits_with_one() {
    let tmp = tempfile::tempdir().unwrap();
    let o = run(tmp.path(), &["--preset", "q-large", "--n", "17", "kernel", "--method", "cn", "--times", "1"]);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stdout.is_empty());
}
