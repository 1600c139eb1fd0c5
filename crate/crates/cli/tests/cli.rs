use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::tempdir;

fn gark(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gark"))
        .args(args)
        .env("GARK_THREADS", "1")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn json(bytes: &[u8]) -> serde_json::Value {
    serde_json::from_slice(bytes).expect("valid json")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn check_passes_claimed_conditions() {
    let o = gark(&["check", "imex-ros4-3-6", "--order", "4", "--dae"]);
    assert_eq!(code(&o), 0);
    let r = json(&o.stdout);
    assert_eq!(r["pass"], true);
    assert!(r["entries"].as_array().unwrap().iter().any(|e| e["id"] == "dae.x4.bbwcc"));
}

#[test]
fn check_reports_failing_condition() {
    let o = gark(&["check", "ros2", "--order", "3"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("ros.o3.bump"));
    assert_eq!(json(&o.stdout)["pass"], false);
}

#[test]
fn check_coupling_families() {
    for args in [
        vec!["check", "imex-row3-2-4", "--imex", "--dae", "--embedded", "--tol", "1e-8"],
        vec!["check", "imex-row3-2-5", "--imex", "--dae", "--embedded"],
        vec!["check", "imex-ros22", "--imex", "--dae", "--order-z", "2"],
    ] {
        assert_eq!(code(&gark(&args)), 0, "{args:?}");
    }
}

#[test]
fn check_rejects_bad_input() {
    let dir = tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(
        &bad,
        r#"{"name":"bad","class":"ros","coupling":"strict","partitions":1,"stages":[2],
           "alpha":{"1,1":[[0]]},"gamma":{"1,1":[[1,0],[0,1]]},"b":[[0.5,0.5]],"claimed_order":1}"#,
    )
    .unwrap();
    assert_eq!(code(&gark(&["check", p(&bad)])), 2);
    assert_eq!(code(&gark(&["check", "no-such-method"])), 2);
    assert_eq!(code(&gark(&["check", "ros2", "--order", "7"])), 2);
}

#[test]
fn exported_tableau_checks_like_builtin() {
    let dir = tempdir().unwrap();
    let file = dir.path().join("m.json");
    let o = gark(&["export-tableau", "imex-row3-2-5", "--out", p(&file)]);
    assert_eq!(code(&o), 0);
    let a = gark(&["check", p(&file), "--imex", "--dae"]);
    let b = gark(&["check", "imex-row3-2-5", "--imex", "--dae"]);
    assert_eq!(code(&a), 0);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn stability_scan() {
    let o = gark(&["stability", "ros2", "--re", "-20:-0.1:40", "--im", "-20:20:41"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("re,im,absR"));
    let mut n = 0;
    for l in lines {
        let r: f64 = l.rsplit(',').next().unwrap().parse().unwrap();
        assert!(r < 1.0, "{l}");
        n += 1;
    }
    assert_eq!(n, 40 * 41);

    assert_eq!(code(&gark(&["stability", "ros2", "--re", "-1:0:0"])), 2);

    let free = gark(&["stability", "imex-ros4-3-6", "--re", "-3:0:4", "--im", "0:2:3"]);
    let pinned = gark(&["stability", "imex-ros4-3-6", "--re", "-3:0:4", "--im", "0:2:3", "--pin", "-1,0"]);
    assert_eq!(code(&pinned), 0);
    assert_ne!(free.stdout, pinned.stdout);
}

#[test]
fn integrate_writes_trajectories() {
    let dir = tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, r#"{"brusselator": {"interior_points": 20}, "t_final": 0.5}"#).unwrap();
    let out = dir.path().join("b.csv");
    let stats = dir.path().join("b.json");
    let o = gark(&[
        "integrate", "brusselator", "--method", "imex-ros22", "--n-steps", "50",
        "--config", p(&cfg), "--out", p(&out), "--stats", p(&stats),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(&out).unwrap();
    assert_eq!(csv.lines().next().unwrap().split(',').count(), 2 * 20 + 1);
    assert_eq!(csv.lines().count(), 52);
    assert_eq!(json(&fs::read(&stats).unwrap())["steps"], 50);

    let z = dir.path().join("z.csv");
    let o = gark(&["integrate", "zla", "--method", "imex-row3-2-5", "--h", "0.05", "--t-final", "2", "--out", p(&z)]);
    assert_eq!(code(&o), 0);
    assert!(fs::read_to_string(&z).unwrap().lines().next().unwrap().ends_with(",g_norm"));

    let o = gark(&["integrate", "zla", "--method", "imex-ros4-3-6", "--atol", "1e-6", "--rtol", "1e-6", "--t-final", "5", "--out", p(&z)]);
    assert_eq!(code(&o), 0);
    let s = json(&o.stderr);
    assert!(s["accepted"].as_u64().unwrap() > 0);
    assert!(s.get("rejected").is_some());

    assert_eq!(code(&gark(&["integrate", "logistic", "--method", "imex-ros22"])), 2);
}

#[test]
fn converge_is_deterministic() {
    let dir = tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let args = |out: &Path| {
        gark(&["converge", "logistic", "--n0", "8", "--rungs", "6", "--out", out.to_str().unwrap()])
    };
    let o = args(&a);
    assert_eq!(code(&o), 0);
    args(&b);
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert!(fs::read_to_string(&a).unwrap().starts_with("method,n_steps,h,error\n"));
    let meta = json(&o.stdout);
    assert_eq!(meta["reference"]["method"], "imex-ros4-3-6");
    assert_eq!(meta["reference"]["n_steps"], 100 * 256);
    for (fit, want) in meta["fits"].as_array().unwrap().iter().zip([2.0, 3.0, 3.0, 4.0]) {
        assert!((fit["fitted_order"].as_f64().unwrap() - want).abs() < 0.25, "{fit}");
    }
}

#[test]
fn converge_failure_keeps_partial_table() {
    let dir = tempdir().unwrap();
    let out = dir.path().join("z.csv");
    let o = gark(&[
        "converge", "zla", "--methods", "imex-ros22", "--n0", "50", "--rungs", "8",
        "--ref-steps", "20000", "--out", p(&out),
    ]);
    assert_eq!(code(&o), 3);
    let csv = fs::read_to_string(&out).unwrap();
    assert!(csv.lines().count() > 1, "{csv}");
}
