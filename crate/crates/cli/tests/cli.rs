use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cachecraft"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn error_doc(out: &Output) -> Value {
    assert!(!out.status.success());
    serde_json::from_slice(&out.stderr).expect("error is JSON")
}

/// Parses `M,method,expected_rate[,percent_increase]` rows.
fn curve_rows(csv: &str) -> Vec<(f64, String, f64, Option<f64>)> {
    csv.lines()
        .skip(1)
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            (f[0].parse().unwrap(), f[1].to_string(), f[2].parse().unwrap(), f.get(3).map(|s| s.parse().unwrap()))
        })
        .collect()
}

#[test]
fn homogeneous_solve_gives_two_thirds() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("sol.json");
    let cfg = configs().join("uniform.json");
    let out = run(&[
        "solve",
        cfg.to_str().unwrap(),
        "--method",
        "homogeneous",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let doc: Value = serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(format!("{:.4}", doc["objective"].as_f64().unwrap()), "0.6667");
    assert_eq!(doc["diagnostics"]["status"], "optimal");
    assert!(doc["variables"]["v[2]"].as_f64().unwrap() > 0.0);
    assert!(doc["placement"]["sizes"]["1,2"].is_array());
}

#[test]
fn general_solve_memory_matches_published_allocation() {
    let memory = [0.167, 0.188, 0.188, 0.167, 0.167, 0.125];
    let cfg = configs().join("paired.json");
    let out = run(&["solve", cfg.to_str().unwrap(), "--method", "general"]);
    assert!(out.status.success());
    let doc: Value = serde_json::from_str(&stdout(&out)).unwrap();
    for row in doc["placement"]["mu"].as_array().unwrap() {
        for (got, want) in row.as_array().unwrap().iter().zip(memory) {
            assert!((got.as_f64().unwrap() - want).abs() <= 5e-3, "{got} vs {want}");
        }
    }
}

#[test]
fn two_tier_needs_classes() {
    let cfg = configs().join("uniform.json");
    let doc = error_doc(&run(&["solve", cfg.to_str().unwrap(), "--method", "two-tier"]));
    assert_eq!(doc["error"]["message"], "cache classes required");
    assert_eq!(doc["error"]["kind"], "missing_classes");
}

#[test]
fn bad_inputs_are_reported_as_json() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "bad.json", r#"{"K":2,"N":2,"M":1,"p":[0.6,0.6]}"#);
    assert_eq!(error_doc(&run(&["pmf", &cfg]))["error"]["kind"], "invalid_config");
    let cfg = write(dir.path(), "extra.json", r#"{"K":2,"N":2,"M":1,"colour":3}"#);
    assert_eq!(error_doc(&run(&["pmf", &cfg]))["error"]["kind"], "parse");
    let good = configs().join("uniform.json");
    let doc = error_doc(&run(&["solve", good.to_str().unwrap(), "--method", "nope"]));
    assert_eq!(doc["error"]["kind"], "argument");
    assert_eq!(error_doc(&run(&["pmf", "/no/such/config.json"]))["error"]["kind"], "io");
}

#[test]
fn pmf_uniform_two_files_two_users() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"K":2,"N":2,"M":1}"#);
    let out = run(&["pmf", &cfg]);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("m,1,2"));
    assert_eq!(lines.next(), Some("0,0.750000,0.250000"));
    assert_eq!(lines.next(), Some("1,0.250000,0.750000"));
    let raw = stdout(&run(&["pmf", &cfg, "--raw"]));
    assert!(raw.lines().any(|l| l == "0,0.75,0.25"), "{raw}");
}

#[test]
fn simulate_decodes_every_user() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("uniform.json");
    let cfg = cfg.to_str().unwrap();
    let sol = dir.path().join("sol.json");
    assert!(run(&["solve", cfg, "--method", "homogeneous", "--out", sol.to_str().unwrap()]).status.success());
    let log = dir.path().join("log.json");
    let out = run(&[
        "simulate",
        cfg,
        sol.to_str().unwrap(),
        "--unit-bits",
        "2400",
        "--seed",
        "3",
        "--samples",
        "25",
        "--log",
        log.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    let demands: Vec<&str> = text.lines().filter(|l| l.starts_with("demand")).collect();
    assert_eq!(demands.len(), 25);
    assert!(demands.iter().all(|l| l.contains("decoded 4/4 users")), "{text}");
    assert!(text.contains("success rate 1.000000 (100/100 users over 25 demands)"), "{text}");
    let summary: Value = serde_json::from_str(&std::fs::read_to_string(log).unwrap()).unwrap();
    assert_eq!(summary["decoded_users"], 100);
}

#[test]
fn simulate_enumerates_small_demand_spaces() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"K":3,"N":2,"M":1}"#);
    let sol = dir.path().join("sol.json");
    assert!(run(&["solve", &cfg, "--method", "general", "--out", sol.to_str().unwrap()]).status.success());
    let text = stdout(&run(&["simulate", &cfg, sol.to_str().unwrap()]));
    assert_eq!(text.lines().filter(|l| l.contains("decoded 3/3 users")).count(), 8);
}

#[test]
fn eval_reports_infeasible_placement() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.json", r#"{"K":2,"N":2,"M":0.5}"#);
    let pl = write(dir.path(), "p.json", r#"{"K":2,"N":2,"sizes":{"1":[1.0,1.0],"2":[0.0,1.0],"":[0.0,0.0]}}"#);
    let out = run(&["eval", &cfg, &pl]);
    assert_eq!(out.status.code(), Some(2));
    let report: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["feasible"], false);
    let kinds: Vec<&str> = report["violations"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v["constraint"].as_str().unwrap())
        .collect();
    assert!(kinds.contains(&"cache_budget"), "{kinds:?}");
    assert!(kinds.contains(&"reconstruction"), "{kinds:?}");
}

#[test]
fn eval_accepts_solve_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("popularity.json");
    let cfg = cfg.to_str().unwrap();
    let sol = dir.path().join("sol.json");
    assert!(run(&["solve", cfg, "--method", "pop-first", "--out", sol.to_str().unwrap()]).status.success());
    let solved: Value = serde_json::from_str(&std::fs::read_to_string(&sol).unwrap()).unwrap();
    let out = run(&["eval", cfg, sol.to_str().unwrap()]);
    assert!(out.status.success());
    let report: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(report["expected_rate"], solved["objective"]);
}

#[test]
fn empty_grid_is_an_error() {
    let cfg = configs().join("uniform.json");
    let doc = error_doc(&run(&["curve", cfg.to_str().unwrap(), "--grid", "", "--methods", "homogeneous"]));
    assert!(doc["error"]["message"].as_str().unwrap().contains("empty"));
    let doc = error_doc(&run(&["curve", cfg.to_str().unwrap(), "--grid", "2:1:1", "--methods", "homogeneous"]));
    assert!(doc["error"]["message"].as_str().unwrap().contains("empty"));
}

#[test]
fn popularity_curves_coincide_and_dominate_the_baseline() {
    let cfg = configs().join("popularity.json");
    let out = run(&[
        "curve",
        cfg.to_str().unwrap(),
        "--grid",
        "0:6:1",
        "--methods",
        "general,pop-first,random-pop",
        "--raw",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = curve_rows(&stdout(&out));
    assert_eq!(rows.len(), 21);
    for chunk in rows.chunks(3) {
        let (general, pop, random) = (chunk[0].2, chunk[1].2, chunk[2].2);
        assert_eq!(chunk[0].1, "general");
        assert!((general - pop).abs() <= 1e-6, "M={}: {general} vs {pop}", chunk[0].0);
        assert!(random >= general - 1e-9);
    }
    assert!(rows.chunks(3).any(|c| c[2].2 > c[0].2 + 1e-3), "baseline never loses");
}

#[test]
fn percent_increase_is_non_negative() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("curve.csv");
    let cfg = configs().join("two_class_paired.json");
    let out = run(&[
        "curve",
        cfg.to_str().unwrap(),
        "--grid",
        "1,3,5",
        "--methods",
        "general,full-het,random-len",
        "--percent",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(csv).unwrap();
    assert!(text.starts_with("M,method,expected_rate,percent_increase\n"));
    let rows = curve_rows(&text);
    assert_eq!(rows.len(), 9);
    for (m, method, _, pct) in rows {
        let pct = pct.unwrap();
        assert!(pct >= 0.0, "M={m} {method}: {pct}");
        if method == "general" {
            assert_eq!(pct, 0.0);
        }
    }
}

#[test]
fn reruns_are_byte_identical() {
    let cfg = configs().join("two_class.json");
    let cfg = cfg.to_str().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let a = run(&["solve", cfg, "--method", "full-het"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, run(&["solve", cfg, "--method", "full-het"]).stdout);
    let curve = ["curve", cfg, "--grid", "0:2:0.5", "--methods", "general,full-het,random-len", "--raw"];
    let first = run(&curve);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    assert_eq!(first.stdout, run(&curve).stdout);
    let sol = dir.path().join("sol.json");
    assert!(run(&["solve", cfg, "--method", "full-het", "--out", sol.to_str().unwrap()]).status.success());
    let sim = ["simulate", cfg, sol.to_str().unwrap(), "--samples", "10", "--seed", "9"];
    let first = run(&sim);
    assert!(first.status.success(), "{}", String::from_utf8_lossy(&first.stderr));
    assert_eq!(first.stdout, run(&sim).stdout);
}
