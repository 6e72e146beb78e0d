use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn incompat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_incompat")).args(args).output().expect("run incompat")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn write(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, body).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn check_exit_codes() {
    let dir = TempDir::new().unwrap();
    let x = write(&dir, "x.json", r#"{"bias": 0, "vec": [1, 0, 0]}"#);
    let y = write(&dir, "y.json", r#"{"bias": 0, "vec": [0, 1, 0]}"#);
    let half = write(&dir, "h.json", r#"{"bias": 0.5, "vec": [0.5, 0, 0]}"#);
    let half_b = write(&dir, "hb.json", r#"{"bias": -0.5, "vec": [0, 0.5, 0]}"#);

    let same = incompat(&["check", s(&x), s(&x)]);
    assert_eq!(code(&same), 0);
    let v: serde_json::Value = serde_json::from_slice(&same.stdout).unwrap();
    assert_eq!(v["compatible"], true);
    assert!(v["margin"].as_f64().unwrap() >= 0.0);

    assert_eq!(code(&incompat(&["check", s(&x), s(&y)])), 1);
    assert_eq!(code(&incompat(&["check", s(&half), s(&half_b)])), 0);
}

#[test]
fn input_errors_exit_two() {
    let dir = TempDir::new().unwrap();
    let x = write(&dir, "x.json", r#"{"bias": 0, "vec": [1, 0, 0]}"#);
    let bad = write(&dir, "bad.json", r#"{"bias": 0.5, "vec": [0.9, 0, 0]}"#);
    let junk = write(&dir, "junk.json", "not json");
    assert_eq!(code(&incompat(&["check", s(&x), s(&bad)])), 2);
    assert_eq!(code(&incompat(&["check", s(&x), s(&junk)])), 2);
    assert_eq!(code(&incompat(&["check", s(&x), "/nonexistent/file.json"])), 2);
    assert_eq!(code(&incompat(&["frobnicate"])), 2);
    assert_eq!(code(&incompat(&["estimate", "--samples", "0", "--seed", "1"])), 2);
}

#[test]
fn randomized_commands_require_seed() {
    for args in [
        &["estimate", "--samples", "100"][..],
        &["grid", "--resolution", "3", "--samples", "10"][..],
        &["sample", "--samples", "3"][..],
    ] {
        let o = incompat(args);
        assert_eq!(code(&o), 2, "{args:?}");
        assert!(String::from_utf8_lossy(&o.stderr).contains("--seed"));
    }
}

#[test]
fn witness_round_trip() {
    let dir = TempDir::new().unwrap();
    let x = write(&dir, "x.json", r#"{"bias": 0, "vec": [1, 0, 0]}"#);
    let y = write(&dir, "y.json", r#"{"bias": 0, "vec": [0, 1, 0]}"#);
    let out = dir.path().join("w.json");

    assert_eq!(code(&incompat(&["witness", s(&x), s(&x), "--out", s(&out)])), 0);
    let t: serde_json::Value = serde_json::from_str(&fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(t["shape"], serde_json::json!([2, 2]));
    // the off-diagonal outcomes (1, 2) and (2, 1) are zero blocks
    for k in [1, 2] {
        for entry in t["elements"][k].as_array().unwrap() {
            assert_eq!(entry, &serde_json::json!([0.0, 0.0]));
        }
    }
    assert_eq!(code(&incompat(&["validate", s(&out)])), 0);

    assert_eq!(code(&incompat(&["witness", s(&x), s(&y), "--out", s(&dir.path().join("none.json"))])), 1);

    let a = write(&dir, "a.json", r#"{"bias": 0, "vec": [0.3, 0.4, 0.1]}"#);
    let b = write(&dir, "b.json", r#"{"bias": 0, "vec": [-0.2, 0.5, 0.3]}"#);
    let w = dir.path().join("ab.json");
    assert_eq!(code(&incompat(&["witness", s(&a), s(&b), "--out", s(&w)])), 0);
    assert_eq!(code(&incompat(&["validate", s(&w)])), 0);

    let c = write(&dir, "c.json", r#"{"bias": 0.3, "vec": [0.2, 0.1, 0.0]}"#);
    let d = write(&dir, "d.json", r#"{"bias": -0.2, "vec": [0.0, 0.3, 0.2]}"#);
    let w = dir.path().join("cd.json");
    assert_eq!(code(&incompat(&["witness", s(&c), s(&d), "--out", s(&w)])), 0);
    assert_eq!(code(&incompat(&["validate", s(&w)])), 0);
}

#[test]
fn validate_rejects_non_positive_tensor() {
    let dir = TempDir::new().unwrap();
    let t = write(
        &dir,
        "t.json",
        r#"{"dim": 2, "shape": [2], "elements": [
            [[1.5, 0], [0, 0], [0, 0], [0.5, 0]],
            [[-0.5, 0], [0, 0], [0, 0], [0.5, 0]]]}"#,
    );
    let o = incompat(&["validate", s(&t)]);
    assert_eq!(code(&o), 1);
    let r: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["ok"], false);
}

#[test]
fn estimate_unbiased_probability() {
    let o = incompat(&["estimate", "--measure", "unbiased", "--samples", "1000000", "--seed", "7"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    for key in ["value", "stderr", "n", "seed", "method"] {
        assert!(v.get(key).is_some(), "{key}");
    }
    assert!((v["value"].as_f64().unwrap() - 0.6).abs() < 0.0015);
    assert_eq!(v["n"], 1_000_000);
    assert_eq!(v["method"], "mc");

    let q = incompat(&["estimate", "--method", "quadrature", "--tol", "1e-8"]);
    let v: serde_json::Value = serde_json::from_slice(&q.stdout).unwrap();
    assert!((v["value"].as_f64().unwrap() - 0.6).abs() < 1e-8);
    assert_eq!(v["seed"], serde_json::Value::Null);
}

#[test]
fn estimate_general_probability() {
    let o = incompat(&["estimate", "--measure", "general", "--samples", "1000000", "--seed", "3"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!((v["value"].as_f64().unwrap() - 0.25).abs() < 0.002);
}

#[test]
fn grid_csv_shape() {
    let o = incompat(&["grid", "--resolution", "5", "--samples", "2000", "--seed", "4"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("a0,b0,prob,stderr,n"));
    let rows: Vec<Vec<f64>> =
        lines.map(|l| l.split(',').map(|c| c.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 25);
    for r in &rows {
        assert_eq!(r.len(), 5);
        assert!((0.0..=1.0).contains(&r[2]));
        if r[0].abs() == 1.0 && r[1].abs() == 1.0 {
            assert_eq!(r[2], 0.0);
        }
    }
}

#[test]
fn reruns_are_byte_identical_across_thread_counts() {
    let dir = TempDir::new().unwrap();
    let runs: [&[&str]; 3] = [
        &["estimate", "--measure", "general", "--samples", "200000", "--seed", "11"],
        &["grid", "--resolution", "7", "--samples", "3000", "--seed", "11"],
        &["sample", "--measure", "section", "--a0", "0.3", "--b0", "-0.1", "--samples", "50", "--seed", "11"],
    ];
    for (k, args) in runs.iter().enumerate() {
        let mut files = Vec::new();
        for threads in ["1", "3", "3"] {
            let out = dir.path().join(format!("{k}-{threads}-{}.out", files.len()));
            let mut full = args.to_vec();
            full.extend(["--threads", threads, "--out", s(&out)]);
            assert_eq!(code(&incompat(&full)), 0);
            files.push(fs::read(&out).unwrap());
        }
        assert!(files.windows(2).all(|w| w[0] == w[1]), "{args:?}");
    }
}

#[test]
fn density_values() {
    let o = incompat(&["density", "--dim", "3", "--s", "0.4"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["points"][0]["density"], 0.5);
    assert!((v["points"][0]["cdf"].as_f64().unwrap() - 0.7).abs() < 1e-15);
    assert!((v["norm_constant"].as_f64().unwrap() - 4.0 * std::f64::consts::PI).abs() < 1e-12);
    assert_eq!(code(&incompat(&["density", "--dim", "1"])), 2);
    assert_eq!(code(&incompat(&["density", "--s", "1.5"])), 2);
}
