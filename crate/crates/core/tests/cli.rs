use std::fs;
use std::path::Path;

use dthp::cli::{dispatch, EXIT_BUDGET, EXIT_OK, EXIT_USAGE, EXIT_VALIDATION};

const REFERENCE: &str = r#"{"a0": 0.2, "form": "geometric", "alpha": 0.3, "rho": 0.5}"#;

fn kernel_file(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

fn run(args: &[&str]) -> i32 {
    dispatch(std::iter::once("dthp").chain(args.iter().copied()))
}

#[test]
fn validate_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let good = kernel_file(dir.path(), "reference.json", REFERENCE);
    assert_eq!(run(&["validate", "--kernel", &good]), EXIT_OK);
    let heavy = kernel_file(
        dir.path(),
        "heavy.json",
        r#"{"a0": 0.5, "form": "geometric", "alpha": 0.3, "rho": 0.5}"#,
    );
    assert_eq!(run(&["validate", "--kernel", &heavy]), EXIT_VALIDATION);
    let broken = kernel_file(dir.path(), "broken.json", r#"{"a0": 0.2, "form": "#);
    assert_eq!(run(&["validate", "--kernel", &broken]), EXIT_USAGE);
    assert_eq!(run(&["validate", "--kernel", &good, "--bogus"]), EXIT_USAGE);
    assert_eq!(run(&[]), EXIT_USAGE);
}

#[test]
fn exact_json_payload() {
    let dir = tempfile::tempdir().unwrap();
    let k = kernel_file(dir.path(), "reference.json", REFERENCE);
    let out = dir.path().join("out");
    let out_s = out.to_str().unwrap();
    assert_eq!(
        run(&["exact", "--kernel", &k, "--n", "3", "--out-dir", out_s]),
        EXIT_OK
    );
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("exact.json")).unwrap()).unwrap();
    assert_eq!(v["n"], 3);
    assert!((v["pmf"][0].as_f64().unwrap() - 0.512).abs() < 1e-15);
    assert!(v["checks"]["norm_err"].as_f64().unwrap() < 1e-12);
    assert_eq!(v["truncation_lag"], 40);
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("exact.manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["subcommand"], "exact");
    assert_eq!(manifest["truncation_lag"], 40);

    assert_eq!(
        run(&["exact", "--kernel", &k, "--n", "23", "--out-dir", out_s]),
        EXIT_BUDGET
    );
    assert_eq!(
        run(&[
            "exact",
            "--kernel",
            &k,
            "--n",
            "23",
            "--max-states",
            "10000000",
            "--out-dir",
            out_s
        ]),
        EXIT_USAGE
    );
}

#[test]
fn moments_csv_columns() {
    let dir = tempfile::tempdir().unwrap();
    let k = kernel_file(dir.path(), "reference.json", REFERENCE);
    let out = dir.path().to_str().unwrap();
    assert_eq!(
        run(&["moments", "--kernel", &k, "--n", "5", "--out-dir", out]),
        EXIT_OK
    );
    let text = fs::read_to_string(dir.path().join("moments.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "n,b_n,marginal,limit_prob,clt_variance");
    assert_eq!(lines.len(), 6);
    let row: Vec<f64> = lines[1].split(',').map(|f| f.parse().unwrap()).collect();
    let expected = [1.0, 0.3, 0.2, 0.5, 1.5625];
    for (got, want) in row.iter().zip(expected) {
        assert!((got - want).abs() < 1e-12, "{got} vs {want}");
    }
}

#[test]
fn simulate_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let k = kernel_file(dir.path(), "reference.json", REFERENCE);
    let out = dir.path().to_str().unwrap();
    let base = [
        "simulate",
        "--kernel",
        &k,
        "--n",
        "20",
        "--paths",
        "3",
        "--seed",
        "1",
        "--out-dir",
        out,
    ];
    let mut full: Vec<&str> = base.to_vec();
    full.extend(["--retain", "full"]);
    assert_eq!(run(&full), EXIT_OK);
    let text = fs::read_to_string(dir.path().join("simulate.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("step,path_id,xi,lambda,H"));
    assert_eq!(lines.count(), 60);

    let mut json: Vec<&str> = base.to_vec();
    json.extend(["--out", "json"]);
    assert_eq!(run(&json), EXIT_OK);
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("simulate.json")).unwrap())
            .unwrap();
    assert_eq!(v["counts"].as_array().unwrap().len(), 3);

    let mut over: Vec<&str> = base.to_vec();
    over.extend(["--max-draws", "10"]);
    assert_eq!(run(&over), EXIT_BUDGET);
}

#[test]
fn ldp_tables() {
    let dir = tempfile::tempdir().unwrap();
    let k = kernel_file(dir.path(), "reference.json", REFERENCE);
    let out = dir.path().to_str().unwrap();
    assert_eq!(
        run(&[
            "ldp",
            "--kernel",
            &k,
            "--n",
            "4,8",
            "--t-points",
            "81",
            "--x-points",
            "11",
            "--out-dir",
            out
        ]),
        EXIT_OK
    );
    let bounds = fs::read_to_string(dir.path().join("ldp_bounds.csv")).unwrap();
    assert!(bounds.starts_with("t,L,U,gamma_4,gamma_8\n"));
    assert_eq!(bounds.lines().count(), 82);
    let conj = fs::read_to_string(dir.path().join("ldp_conjugates.csv")).unwrap();
    assert!(conj.starts_with("x,Lstar,Ustar\n"));
    assert_eq!(conj.lines().count(), 12);
    assert_eq!(
        run(&[
            "ldp",
            "--kernel",
            &k,
            "--t-min",
            "-2",
            "--t-max",
            "2",
            "--n",
            "4",
            "--out-dir",
            out
        ]),
        EXIT_OK
    );
}

#[test]
fn risk_outputs_and_manifest_replay() {
    let dir = tempfile::tempdir().unwrap();
    let k = kernel_file(dir.path(), "reference.json", REFERENCE);
    let first = dir.path().join("first");
    let args = [
        "risk",
        "--kernel",
        &k,
        "--u",
        "0.6",
        "--p",
        "0.6",
        "--n",
        "40",
        "--paths",
        "2000",
        "--seed",
        "7",
        "--out-dir",
        first.to_str().unwrap(),
    ];
    assert_eq!(run(&args), EXIT_OK);
    let fan = fs::read_to_string(first.join("risk_fan.csv")).unwrap();
    assert!(fan.starts_with("step,mean,p5,p95\n"));
    assert_eq!(fan.lines().count(), 41);
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(first.join("risk_summary.json")).unwrap())
            .unwrap();
    for key in ["drift_est", "threshold", "ruin_freq", "ldp_band"] {
        assert!(summary.get(key).is_some(), "{key}");
    }

    // the kernel file may change; the manifest carries its own copy
    fs::write(&k, r#"{"a0": 0.1, "form": "explicit", "weights": []}"#).unwrap();
    let second = dir.path().join("second");
    let manifest = first.join("risk.manifest.json");
    assert_eq!(
        run(&[
            "--manifest",
            manifest.to_str().unwrap(),
            "--out-dir",
            second.to_str().unwrap(),
            "--workers",
            "3"
        ]),
        EXIT_OK
    );
    for name in ["risk_fan.csv", "risk_summary.json"] {
        assert_eq!(
            fs::read(first.join(name)).unwrap(),
            fs::read(second.join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn out_dir_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let k = kernel_file(dir.path(), "reference.json", REFERENCE);
    std::env::set_var(dthp::cli::OUT_DIR_ENV, dir.path().join("env"));
    assert_eq!(run(&["moments", "--kernel", &k, "--n", "3"]), EXIT_OK);
    std::env::remove_var(dthp::cli::OUT_DIR_ENV);
    assert!(dir.path().join("env").join("moments.csv").exists());
}
