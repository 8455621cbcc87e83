use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::Value;

use protective_cli::config::SweepBlock;
use protective_cli::{execute, parse_config, CliError, Plan};
use protective_core::protocols::SweepAxis;

fn configs_dir() -> PathBuf {
    [env!("CARGO_MANIFEST_DIR"), "..", "..", "configs"].iter().collect()
}

fn read_config(name: &str) -> String {
    fs::read_to_string(configs_dir().join(name)).unwrap()
}

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_protective"))
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path
}

fn without_timings(mut doc: Value) -> Value {
    for r in doc["records"].as_array_mut().unwrap() {
        r.as_object_mut().unwrap().remove("wall_time_s");
    }
    doc
}

#[test]
fn shipped_configs_parse_and_round_trip() {
    let mut modes = Vec::new();
    for entry in fs::read_dir(configs_dir()).unwrap() {
        let text = fs::read_to_string(entry.unwrap().path()).unwrap();
        let cfg = parse_config(&text).unwrap();
        let echoed = serde_json::to_string_pretty(&cfg).unwrap();
        assert_eq!(parse_config(&echoed).unwrap(), cfg);
        modes.push(cfg.mode.name());
    }
    modes.sort_unstable();
    assert_eq!(modes, ["decay", "potential", "protective", "sweep", "tomography", "weak", "weakvalue", "zeno"]);
}

#[test]
fn negative_sigma_names_parameter_and_bound() {
    let text = read_config("protective.json").replace("\"sigma_q\": 0.1", "\"sigma_q\": -1");
    let err = parse_config(&text).unwrap_err();
    let msg = err.to_string();
    assert_eq!(err.exit_code(), 1);
    assert!(msg.contains("protective.sigma_q") && msg.contains("2*dq/pi"), "{msg}");
}

#[test]
fn oversized_sigma_names_upper_bound() {
    let text = read_config("protective.json").replace("\"sigma_q\": 0.1", "\"sigma_q\": 6.0");
    let msg = parse_config(&text).unwrap_err().to_string();
    assert!(msg.contains("L/4 = 5"), "{msg}");
}

#[test]
fn malformed_and_unknown_inputs_are_config_errors() {
    assert!(matches!(parse_config("{\"mode\": "), Err(CliError::Config(_))));
    let typo = read_config("weakvalue.json").replace("kick_strength", "kick_strenght");
    let msg = parse_config(&typo).unwrap_err().to_string();
    assert!(msg.contains("weakvalue") && msg.contains("kick_strenght"), "{msg}");
    let axis = read_config("sweep.json").replace("\"total_time\"", "\"omega\"");
    assert!(parse_config(&axis).unwrap_err().to_string().contains("omega"));
}

#[test]
fn sweep_expands_into_one_run_per_value() {
    let text = read_config("sweep.json").replace("[100.0, 200.0, 400.0]", "[50, 100, 200]");
    let cfg = parse_config(&text).unwrap();
    let plan = cfg.plan().unwrap();
    assert_eq!(plan.n_runs(), 3);
    let Plan::Sweep { axis, base, values } = plan else {
        panic!("not a sweep plan");
    };
    assert_eq!(axis, SweepAxis::TotalTime);
    // the default 2000 steps are kept at every total time
    for &t in &values {
        let c = axis.apply(&base, t).unwrap();
        assert_eq!(c.schedule.total_time, t);
        assert!((c.dt - t / 2000.0).abs() < 1e-15);
    }
    let block: &SweepBlock = cfg.sweep.as_ref().unwrap();
    assert_eq!(block.values, [50.0, 100.0, 200.0]);
}

#[test]
fn protective_run_reads_expectation_and_writes_trajectory() {
    let out = execute(&parse_config(&read_config("protective.json")).unwrap()).unwrap();
    let r = &out.json["records"][0];
    assert!((r["q_mean"].as_f64().unwrap() + 0.5).abs() <= 0.02);
    assert!(r["fidelity"].as_f64().unwrap() >= 0.999);
    for key in ["q_var", "p_mean", "readout", "target", "error", "survival", "wall_time_s", "config"] {
        assert!(r.get(key).is_some(), "missing {key}");
    }
    for key in ["config", "records", "seed", "version"] {
        assert!(out.json.get(key).is_some(), "missing {key}");
    }
    let lines: Vec<&str> = out.csv.lines().collect();
    assert_eq!(lines[0], "time,fidelity,survival,q_mean,norm");
    assert_eq!(lines.len(), 1 + 2000 / 20 + 1);
    let last: Vec<f64> = lines.last().unwrap().split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(last[0], 200.0);
    assert_eq!(last[3], r["q_mean"].as_f64().unwrap());
}

#[test]
fn tomography_reports_every_observable() {
    let out = execute(&parse_config(&read_config("tomography.json")).unwrap()).unwrap();
    assert_eq!(out.json["records"].as_array().unwrap().len(), 4);
    assert!(out.json["summary"]["fidelity"].as_f64().unwrap() >= 0.999);
    assert_eq!(out.json["summary"]["labels"], serde_json::json!(["P0", "P1", "X01", "Y01"]));
    assert_eq!(out.csv.lines().count(), 5);
}

#[test]
fn repeated_runs_are_identical_apart_from_timings() {
    let text = read_config("weak.json").replace("\"n_runs\": 10000", "\"n_runs\": 200");
    let cfg = parse_config(&text).unwrap();
    let a = execute(&cfg).unwrap();
    let b = execute(&cfg).unwrap();
    assert_eq!(a.csv, b.csv);
    assert_eq!(
        serde_json::to_string(&without_timings(a.json)).unwrap(),
        serde_json::to_string(&without_timings(b.json)).unwrap()
    );
}

#[test]
fn binary_writes_results_and_honours_seed_override() {
    let dir = tempfile::tempdir().unwrap();
    let text = read_config("weak.json").replace("\"n_runs\": 10000", "\"n_runs\": 100");
    let config = write(dir.path(), "weak.json", &text);
    let run = |seed: &str, out: &str| {
        let status = binary()
            .args(["run", "--config"])
            .arg(&config)
            .args(["--seed", seed, "--threads", "2", "--out"])
            .arg(dir.path().join(out))
            .output()
            .unwrap();
        assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
        let doc: Value = serde_json::from_str(&fs::read_to_string(dir.path().join(out).join("weak.json")).unwrap()).unwrap();
        let csv = fs::read_to_string(dir.path().join(out).join("weak.csv")).unwrap();
        (doc, csv)
    };
    let (a, csv_a) = run("3", "a");
    let (b, csv_b) = run("3", "b");
    let (_, csv_c) = run("4", "c");
    assert_eq!(a["seed"], 3);
    assert_eq!(a["config"]["seed"], 3);
    assert_eq!(csv_a, csv_b);
    assert_ne!(csv_a, csv_c);
    assert_eq!(without_timings(a), without_timings(b));
}

#[test]
fn exit_codes_distinguish_failure_kinds() {
    let dir = tempfile::tempdir().unwrap();
    let code = |config: &Path, out: &Path| {
        binary()
            .args(["run", "--config"])
            .arg(config)
            .arg("--out")
            .arg(out)
            .output()
            .unwrap()
            .status
            .code()
    };
    let out = dir.path().join("out");

    let bad = write(dir.path(), "bad.json", "{\"mode\": \"protective\", \"sigma\": 1}");
    assert_eq!(code(&bad, &out), Some(1));
    assert_eq!(code(&dir.path().join("missing.json"), &out), Some(3));

    // unprotected strong measurements leave the carried state far from the target
    let failing = r#"{
        "mode": "tomography",
        "tomography": {
            "system": {"rank_one": {"state": {"amplitudes": {"re": [0.5477225575051661, 0.5477225575051661, 0.6324555320336759]}}}},
            "sigma_q": 0.5,
            "schedule": {"total_time": 5.0, "area": 5.0},
            "steps": 500,
            "protection": "none"
        }
    }"#;
    assert_eq!(code(&write(dir.path(), "fail.json", failing), &out), Some(2));

    let blocker = write(dir.path(), "blocker", "");
    let ok = configs_dir().join("weakvalue.json");
    assert_eq!(code(&ok, &blocker), Some(3));
    assert_eq!(code(&ok, &out), Some(0));
    assert!(out.join("weakvalue.json").exists() && out.join("weakvalue.csv").exists());
}

#[test]
fn check_prints_filled_config() {
    let output = binary().args(["check", "--config"]).arg(configs_dir().join("zeno.json")).output().unwrap();
    assert!(output.status.success());
    let echoed = String::from_utf8(output.stdout).unwrap();
    let cfg = parse_config(&echoed).unwrap();
    assert_eq!(cfg.zeno.as_ref().unwrap().steps, 2000);
    assert!(echoed.contains("\"n_projections\": 200"));
}
