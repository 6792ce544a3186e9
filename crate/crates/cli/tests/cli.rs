use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const ARC: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../specs/procgen_arc.json");
const CUT_IN: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../../specs/cut_in.json");

fn drivesim(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_drivesim"));
    cmd.args(args);
    match threads {
        Some(t) => cmd.env("BRIDGESIM_THREADS", t),
        None => cmd.env_remove("BRIDGESIM_THREADS"),
    };
    cmd.output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn generate(dir: &Path, n: &str) {
    let out = drivesim(&["generate", "--config", ARC, "--n", n, "--seed", "3", "--out", s(dir)], None);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

fn files(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn simulate(scenarios: &Path, out: &Path, extra: &[&str], threads: Option<&str>) -> Output {
    let mut args = vec![
        "simulate",
        "--scenario-dir",
        s(scenarios),
        "--policy",
        "noisy-expert",
        "--scorer",
        "truncated-q",
        "--traffic",
        "idm",
        "--out",
        s(out),
    ];
    args.extend_from_slice(extra);
    drivesim(&args, threads)
}

#[test]
fn generated_scenarios_validate() {
    let tmp = TempDir::new().unwrap();
    generate(tmp.path(), "3");
    let scenarios: Vec<_> = files(tmp.path())
        .into_iter()
        .map(|(p, _)| p)
        .filter(|p| p.file_name().unwrap() != "resolved_config.json")
        .collect();
    assert_eq!(scenarios.len(), 3);
    assert!(tmp.path().join("resolved_config.json").exists());
    for p in scenarios {
        let out = drivesim(&["validate", "--scenario", s(&tmp.path().join(p))], None);
        assert_eq!(code(&out), 0);
    }
}

#[test]
fn malformed_scenario_fails_validation() {
    let tmp = TempDir::new().unwrap();
    let p = tmp.path().join("bad.json");
    fs::write(&p, br#"{"id": "x", "tracks": []}"#).unwrap();
    assert_eq!(code(&drivesim(&["validate", "--scenario", s(&p)], None)), 1);
}

#[test]
fn simulate_is_reproducible_across_thread_counts() {
    let tmp = TempDir::new().unwrap();
    let scenarios = tmp.path().join("scenarios");
    generate(&scenarios, "3");
    let mut runs = Vec::new();
    for (i, threads) in [None, Some("1"), Some("0"), None].into_iter().enumerate() {
        let out = tmp.path().join(format!("run{i}"));
        let o = simulate(&scenarios, &out, &[], threads);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        runs.push(files(&out));
    }
    let names: Vec<_> = runs[0].iter().map(|(p, _)| p.to_str().unwrap().to_string()).collect();
    for required in ["resolved_config.json", "suite.csv", "summary.csv"] {
        assert!(names.iter().any(|n| n == required), "{names:?}");
    }
    assert_eq!(names.iter().filter(|n| n.starts_with("reports")).count(), 3);
    for r in &runs[1..] {
        assert_eq!(r, &runs[0]);
    }
}

#[test]
fn score_accepts_reports_and_rejects_tampering() {
    let tmp = TempDir::new().unwrap();
    let scenarios = tmp.path().join("scenarios");
    generate(&scenarios, "1");
    let out = tmp.path().join("run");
    assert_eq!(code(&simulate(&scenarios, &out, &[], None)), 0);
    let report = files(&out.join("reports")).pop().unwrap().0;
    let path = out.join("reports").join(report);
    assert_eq!(code(&drivesim(&["score", "--report", s(&path)], None)), 0);

    let mut json: serde_json::Value = serde_json::from_slice(&fs::read(&path).unwrap()).unwrap();
    let ds = json["ds"].as_f64().unwrap();
    json["ds"] = serde_json::json!(if ds > 50.0 { ds - 10.0 } else { ds + 10.0 });
    fs::write(&path, serde_json::to_vec(&json).unwrap()).unwrap();
    let o = drivesim(&["score", "--report", s(&path)], None);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("DS mismatch"));
}

#[test]
fn adversarial_runs_need_a_script() {
    let tmp = TempDir::new().unwrap();
    let scenarios = tmp.path().join("scenarios");
    generate(&scenarios, "1");
    let adv = ["--traffic", "adversarial", "--policy", "expert"];
    let run = |extra: &[&str], out: &str| {
        let mut args = vec!["simulate", "--scenario-dir", s(&scenarios), "--out"];
        let out = tmp.path().join(out);
        args.push(s(&out));
        args.extend_from_slice(&adv);
        args.extend_from_slice(extra);
        code(&drivesim(&args, None))
    };
    assert_eq!(run(&[], "a"), 1);
    assert_eq!(run(&["--adversary", CUT_IN], "b"), 0);
}

#[test]
fn bad_invocations_exit_with_the_documented_codes() {
    let tmp = TempDir::new().unwrap();
    let missing = tmp.path().join("nope.json");
    assert_eq!(code(&drivesim(&["validate", "--scenario", s(&missing), "--frobnicate"], None)), 1);
    assert_eq!(code(&drivesim(&["teleport"], None)), 1);
    assert_eq!(code(&drivesim(&["validate", "--scenario", s(&missing)], None)), 2);
    assert_eq!(code(&drivesim(&["--help"], None)), 0);

    let scenarios = tmp.path().join("scenarios");
    generate(&scenarios, "1");
    let out = tmp.path().join("run");
    assert_eq!(code(&simulate(&scenarios, &out, &["--replan-rate", "0"], None)), 1);
    assert_eq!(code(&simulate(&scenarios, &out, &[], Some("many"))), 1);
    assert_eq!(code(&simulate(&tmp.path().join("empty"), &out, &[], None)), 2);
}

#[test]
fn analyze_writes_deterministic_tables() {
    let tmp = TempDir::new().unwrap();
    let spec = serde_json::json!({
        "fig3a": {
            "suite": { "kind": "procgen", "configs": [serde_json::from_str::<serde_json::Value>(&fs::read_to_string(ARC).unwrap()).unwrap()], "count": 2, "seed": 5 },
            "policies": [{ "kind": "noisy-expert", "sigma": 0.5, "n": 4, "drift": 0.3, "accel_spread": 0.5 }],
            "horizons": [40],
            "ks": [5, 10],
            "ns": [4],
            "scorers": ["native-best", "truncated-q"],
            "seeds": [0],
            "fixed_horizon": 40
        }
    });
    let spec_path = tmp.path().join("spec.json");
    fs::write(&spec_path, serde_json::to_vec_pretty(&spec).unwrap()).unwrap();
    let mut outputs = Vec::new();
    for (i, threads) in [None, Some("1")].into_iter().enumerate() {
        let out = tmp.path().join(format!("out{i}"));
        let o = drivesim(&["analyze", "--spec", s(&spec_path), "--out", s(&out)], threads);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push(files(&out));
    }
    assert_eq!(outputs[0], outputs[1]);
    let names: Vec<_> = outputs[0].iter().map(|(p, _)| p.to_str().unwrap().to_string()).collect();
    assert!(names.contains(&"resolved_config.json".to_string()));
    assert!(names.contains(&"long.csv".to_string()));
    assert!(names.iter().any(|n| n.starts_with("fig3a")));

    let mut bad = spec.clone();
    bad["fig9"] = serde_json::json!({});
    fs::write(&spec_path, serde_json::to_vec(&bad).unwrap()).unwrap();
    let out = tmp.path().join("bad");
    assert_eq!(code(&drivesim(&["analyze", "--spec", s(&spec_path), "--out", s(&out)], None)), 1);
}
