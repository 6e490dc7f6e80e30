use std::path::Path;
use std::process::{Command, Output};

use fpolicy::trace::{read_trace, summarize};
use serde_json::Value;

fn fpolicy(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fpolicy")).args(args).output().expect("binary runs")
}

fn json_ok(args: &[&str]) -> Value {
    let out = fpolicy(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn num(v: &Value) -> f64 {
    v.as_f64().unwrap_or_else(|| v.to_string().parse().unwrap())
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

const CONFIG: &str = r#"
n_relays = 3
links = [[1, 0, 0.5], [1, 2, 0.5], [2, 1, 0.5], [2, 3, 0.5], [3, 0, 0.5], [3, 2, 0.5]]

[weight]
K = 3.0

[arrivals]
rates = [0.2, 0.2, 0.2]

[policy]
name = "fpolicy"

[sim]
horizon = 3000
seed = 5

[sweep]
policies = ["fpolicy", "orcd"]
direction = [1.0, 1.0, 1.0]
scalings = [0.5, 0.8]
relative = true
seeds = [1, 2]
horizon = 2000
"#;

#[test]
fn resolve_examples() {
    let v = json_ok(&["resolve", "--q", "1,1", "--K", "3"]);
    assert_eq!(v["ordering"], serde_json::json!([[1, 2]]));
    assert_eq!(v["on_boundary"], false);
    let v = json_ok(&["resolve", "--q", "0.2,1", "--K", "3"]);
    assert_eq!(v["ordering"], serde_json::json!([[1], [2]]));
    let v = json_ok(&["resolve", "--q", "1,3", "--K", "3"]);
    assert_eq!(v["ordering"], serde_json::json!([[1], [2]]));
    assert_eq!(v["on_boundary"], true);
    assert!((num(&v["lyapunov_value"]) - 2.0).abs() < 1e-12);
}

#[test]
fn resolve_path_connected_on_network() {
    // node 2 alone cannot form the lowest class: it never reaches the destination
    let v = json_ok(&["resolve", "--q", "5,0.1,5", "--pc", "--network", "example"]);
    assert_eq!(v["path_connected"], true);
    assert_ne!(v["ordering"][0], serde_json::json!([2]));
    let general = json_ok(&["resolve", "--q", "5,0.1,5"]);
    assert_eq!(general["ordering"][0], serde_json::json!([2]));
}

#[test]
fn usage_errors_exit_two() {
    for args in [
        vec!["resolve", "--q", "1,x"],
        vec!["resolve", "--q", "1,-1"],
        vec!["resolve"],
        vec!["bogus"],
        vec!["capacity", "--network", "ring:3", "--direction", "1"],
        vec!["simulate", "--network", "example"],
        vec!["simulate", "--network", "example", "--lambda", "0.1,0.1"],
        vec!["simulate", "--network", "example", "--lambda", "0.1,0.1,0.1", "--policy", "nope"],
    ] {
        assert_eq!(fpolicy(&args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn capacity_examples() {
    let v = json_ok(&["capacity", "--network", "single-relay:0.5", "--direction", "1"]);
    assert!((num(&v["theta_star"]) - 0.5).abs() < 1e-6);
    let v = json_ok(&["capacity", "--network", "single-relay:0.5", "--lambda", "0.4"]);
    assert_eq!(v["feasible"], true);
    assert!((num(&v["slack"]) - 0.1).abs() < 1e-9);
    let v = json_ok(&["capacity", "--network", "single-relay:0.5", "--lambda", "0.6", "--witness"]);
    assert_eq!(v["feasible"], false);
    assert!(v["witness"].is_array());
    let v = json_ok(&["capacity", "--network", "example", "--direction", "1,1,1"]);
    assert!((num(&v["theta_star"]) - 1.0 / 3.0).abs() < 1e-6);
}

#[test]
fn zero_rate_run_delivers_nothing() {
    let v = json_ok(&["simulate", "--network", "chain:2", "--lambda", "0,0", "--horizon", "500"]);
    assert_eq!(v["delivered"], 0);
    assert_eq!(v["arrived"], 0);
}

#[test]
fn same_seed_gives_identical_files_and_trace_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    std::fs::write(&cfg, CONFIG).unwrap();
    let mut outputs = Vec::new();
    for run in 0..2 {
        let json = dir.path().join(format!("s{run}.json"));
        let csv = dir.path().join(format!("t{run}.csv"));
        let out = fpolicy(&[
            "simulate",
            "--config",
            path_str(&cfg),
            "--policy",
            "pc-fpolicy",
            "--out",
            path_str(&json),
            "--trace-out",
            path_str(&csv),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        outputs.push((std::fs::read(&json).unwrap(), std::fs::read(&csv).unwrap()));
    }
    assert_eq!(outputs[0], outputs[1]);

    let summary: Value = serde_json::from_slice(&outputs[0].0).unwrap();
    assert_eq!(summary["policy"], "pc-fpolicy");
    assert_eq!(summary["horizon"], 3000);
    let rows = read_trace(outputs[0].1.as_slice()).unwrap();
    assert_eq!(rows.len(), 3000);
    let s = summarize(&rows, summary["warmup"].as_u64().unwrap());
    assert_eq!(s.avg_total_backlog, num(&summary["avg_total_backlog"]));
    for (a, b) in s.avg_backlog.iter().zip(summary["avg_backlog"].as_array().unwrap()) {
        assert_eq!(*a, num(b));
    }
    assert_eq!(s.arrived, summary["arrived"].as_u64().unwrap());
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    std::fs::write(&cfg, CONFIG).unwrap();
    let v = json_ok(&["simulate", "--config", path_str(&cfg), "--seed", "9", "--horizon", "1000", "--warmup", "0", "--lambda", "0,0,0.1"]);
    assert_eq!(v["seed"], 9);
    assert_eq!(v["horizon"], 1000);
    assert_eq!(v["warmup"], 0);
    assert_eq!(num(&v["rates"][2]), 0.1);
}

#[test]
fn sweep_pairs_arrivals_across_policies() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.toml");
    std::fs::write(&cfg, CONFIG).unwrap();
    let out_dir = dir.path().join("out");
    let index = json_ok(&["sweep", "--config", path_str(&cfg), "--out-dir", path_str(&out_dir), "--jobs", "2", "--traces"]);
    let points = index["points"].as_array().unwrap();
    assert_eq!(points.len(), 8);
    assert!((num(&index["theta_star"]) - 1.0 / 3.0).abs() < 1e-6);

    let arrivals = |stem: &str| -> Vec<u32> {
        let file = std::fs::File::open(out_dir.join(format!("{stem}.csv"))).unwrap();
        read_trace(file).unwrap().into_iter().flat_map(|r| r.arrivals).collect()
    };
    for si in 0..2 {
        for seed in [1, 2] {
            let a = arrivals(&format!("p0-s{si}-seed{seed}"));
            let b = arrivals(&format!("p1-s{si}-seed{seed}"));
            assert_eq!(a, b);
            assert!(a.iter().any(|&x| x > 0));
        }
    }
    assert_ne!(arrivals("p0-s0-seed1"), arrivals("p0-s0-seed2"));
    for p in points {
        assert!(out_dir.join(p["file"].as_str().unwrap()).exists());
    }
}

#[test]
fn verify_default_passes() {
    let v = json_ok(&["verify", "--samples", "200", "--n-max", "3", "--drift-states", "3"]);
    assert_eq!(v["all_passed"], true);
    assert!(v["suites"].as_array().unwrap().len() > 10);
}

#[test]
fn verify_reports_expected_fail_when_ratio_condition_fails() {
    let v = json_ok(&["verify", "--network", "chain:3:0.5", "--samples", "100", "--n-max", "3", "--drift-states", "0", "--orcd-K", "2"]);
    let orcd = v["suites"].as_array().unwrap().iter().find(|s| s["name"].as_str().unwrap().starts_with("orcd")).unwrap();
    assert_eq!(orcd["status"], "expected-fail");
    assert_eq!(v["all_passed"], true);
}

#[test]
fn verify_negative_control_exits_one() {
    let out = fpolicy(&["verify", "--broken-weights", "--samples", "50", "--n-max", "3", "--drift-states", "0"]);
    assert_eq!(out.status.code(), Some(1));
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    let failed: Vec<&Value> = v["suites"].as_array().unwrap().iter().filter(|s| s["status"] == "fail").collect();
    assert!(failed.iter().any(|s| s["name"].as_str().unwrap().starts_with("cone-partition") && s["counterexample"]["q"].is_array()));
}
