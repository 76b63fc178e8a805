use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn randbound(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_randbound")).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn diag_exact_reports_norm() {
    let out = randbound(&["--no-timestamp", "verify", "diag-exact", "--a", "3,4"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out);
    assert_eq!(v["schemaVersion"], 1);
    assert_eq!(v["pass"], true);
    assert_eq!(v["config"]["seed"], 42);
    let row = &v["rows"][0];
    assert!((row["lower"].as_f64().unwrap() - 5.0).abs() < 1e-6);
    assert!((row["upper"].as_f64().unwrap() - 5.0).abs() < 1e-12);
    assert!(v.get("timestamp").is_none());
}

#[test]
fn sudakov_at_one_coordinate() {
    let out = randbound(&["--no-timestamp", "--samples", "2000", "verify", "sudakov", "--n", "1"]);
    assert_eq!(out.status.code(), Some(0));
    for row in json(&out)["rows"].as_array().unwrap() {
        assert_eq!(row["lower"].as_f64(), Some(0.0));
        assert_eq!(row["pass"], true);
    }
}

#[test]
fn timestamp_present_by_default() {
    let out = randbound(&["verify", "komatsu"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(json(&out)["timestamp"].as_u64().is_some());
}

#[test]
fn csv_output_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("gap.csv");
    let out = randbound(&["--samples", "5000", "--format", "csv", "--out", path.to_str().unwrap(), "gap", "--n", "2,4"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    assert_eq!(reader.headers().unwrap(), vec!["case", "lower", "upper", "ci_halfwidth", "pass", "elapsed_ms"]);
    let rows: Vec<_> = reader.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 5);
    assert!(rows.iter().all(|r| &r[4] == "true"));
    let upper_n2: f64 = rows[1][2].parse().unwrap();
    assert!((upper_n2 - 4.0 * (2.0 / 2f64.ln()).sqrt()).abs() < 1e-9);
}

#[test]
fn underpowered_run_exits_one() {
    // 30 samples leave intervals too wide for the 3σ margin
    let out = randbound(&["--no-timestamp", "--samples", "30", "verify", "sudakov"]);
    assert_eq!(out.status.code(), Some(1));
    let v = json(&out);
    assert_eq!(v["pass"], false);
    for row in v["rows"].as_array().unwrap() {
        let (l, u, ci) = (row["lower"].as_f64().unwrap(), row["upper"].as_f64().unwrap(), row["ci_halfwidth"].as_f64().unwrap());
        assert_eq!(row["pass"].as_bool().unwrap(), l + 3.0 * ci <= u);
    }
}

#[test]
fn gap_rejects_small_n() {
    let out = randbound(&["gap", "--n", "1,8"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty());
}

#[test]
fn extreme_scale_stays_exact() {
    let out = randbound(&["--no-timestamp", "verify", "diag-exact", "--a", "3e200,4e200"]);
    assert_eq!(out.status.code(), Some(0));
    let row = &json(&out)["rows"][0];
    assert!((row["lower"].as_f64().unwrap() / 5e200 - 1.0).abs() < 1e-9);
}

#[test]
fn usage_errors_exit_two() {
    let out = randbound(&["verify", "nonsense"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sudakov"));
    assert_eq!(randbound(&["bound", "missing.json", "--constant", "r"]).status.code(), Some(2));
    assert_eq!(randbound(&["bound", "x.json", "--constant", "bogus"]).status.code(), Some(2));
    assert_eq!(randbound(&["--confidence", "1.5", "verify", "komatsu"]).status.code(), Some(2));
}

#[test]
fn parse_error_reports_line_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(dir.path(), "bad.json", "{\n  \"domain\": {\"dim\": 2, \"p\": \"inf\"},\n  \"codomain\": oops\n}\n");
    let out = randbound(&["bound", &path, "--constant", "r"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.json:3:"), "{err}");
}

#[test]
fn pi2_off_linf_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(
        dir.path(),
        "l2.json",
        r#"{"name":"l2","domain":{"dim":2,"p":2},"codomain":{"dim":2,"p":2},"members":[[[1,0],[0,1]]]}"#,
    );
    let out = randbound(&["bound", &path, "--constant", "pi2"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(!out.stderr.is_empty());
}

#[test]
fn bound_examples() {
    let dir = tempfile::tempdir().unwrap();
    let identity = write(
        dir.path(),
        "id.json",
        r#"{"name":"id","domain":{"dim":2,"p":"inf"},"codomain":{"dim":2,"p":"inf"},"members":[[[1,0],[0,1]]]}"#,
    );
    let out = randbound(&["--no-timestamp", "bound", &identity, "--constant", "ell2"]);
    assert_eq!(out.status.code(), Some(0));
    let row = &json(&out)["rows"][0];
    assert!(row["lower"].as_f64().unwrap() >= 1.0 - 1e-12);
    assert!((row["upper"].as_f64().unwrap() - 1.78222).abs() < 1e-12);

    let diag = write(
        dir.path(),
        "diag.json",
        r#"{"domain":{"dim":4,"p":"inf"},"codomain":{"dim":1,"p":1},
            "members":[[[1,0,0,0]],[[0,1,0,0]],[[0,0,1,0]],[[0,0,0,1]]]}"#,
    );
    let out = randbound(&["--no-timestamp", "bound", &diag, "--constant", "r"]);
    assert_eq!(out.status.code(), Some(0));
    let row = &json(&out)["rows"][0];
    assert!((row["lower"].as_f64().unwrap() - 2.0).abs() < 1e-9);
    assert!((row["upper"].as_f64().unwrap() - 2.0).abs() < 1e-9);

    let zero = write(
        dir.path(),
        "zero.json",
        r#"{"domain":{"dim":2,"p":"inf"},"codomain":{"dim":2,"p":"inf"},"members":[[[0,0],[0,0]]]}"#,
    );
    for c in ["r", "gamma", "ell2", "pi2", "pi21", "cotype2", "cotype2gamma"] {
        let out = randbound(&["--no-timestamp", "--samples", "2000", "bound", &zero, "--constant", c]);
        assert_eq!(out.status.code(), Some(0), "{c}: {}", String::from_utf8_lossy(&out.stderr));
        let row = &json(&out)["rows"][0];
        assert_eq!(row["lower"].as_f64(), Some(0.0), "{c}");
        assert_eq!(row["upper"].as_f64(), Some(0.0), "{c}");
    }
}

#[test]
fn bound_is_deterministic_and_seed_sensitive_only_in_mc() {
    let dir = tempfile::tempdir().unwrap();
    let path = write(
        dir.path(),
        "f.json",
        r#"{"domain":{"dim":3,"p":"inf"},"codomain":{"dim":1,"p":1},"members":[[[1,0.5,-0.25]],[[0.3,-1,0.7]]]}"#,
    );
    let run = |seed: &str| randbound(&["--no-timestamp", "--samples", "4000", "--seed", seed, "bound", &path, "--constant", "gamma"]).stdout;
    assert_eq!(run("7"), run("7"));
}

#[test]
fn thread_count_does_not_change_output() {
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_randbound"))
            .env("RANDBOUND_THREADS", threads)
            .args(["--no-timestamp", "--samples", "20000", "verify", "expsup"])
            .output()
            .unwrap()
            .stdout
    };
    assert_eq!(run("1"), run("4"));
}
