//! Executes a validated plan and writes its result files.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use protective_core::protocols::{
    decay_run, protective_run, run_weak_ensemble, run_weak_value, sweep, vector_json, matrix_json, weak_value,
    RunRecord,
};
use protective_core::quantum::trap_ground_state;
use protective_core::reconstruction::{
    aligned_rms_error, hermitian_basis, recover_potential_with_threshold, tomography_via_protective,
};
use protective_core::C64;

use crate::config::{ExperimentConfig, Plan};
use crate::output;
use crate::CliError;

/// Result document and CSV table of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub json: Value,
    pub csv: String,
}

fn complex(z: C64) -> Value {
    json!([z.re, z.im])
}

fn document(cfg: &ExperimentConfig, records: &[RunRecord], summary: Value) -> Result<Value, CliError> {
    Ok(json!({
        "version": {"protective-cli": crate::VERSION, "protective-core": protective_core::VERSION},
        "seed": cfg.seed,
        "mode": cfg.mode,
        "config": serde_json::to_value(cfg).map_err(|e| CliError::Io(e.to_string()))?,
        "records": serde_json::to_value(records).map_err(|e| CliError::Io(e.to_string()))?,
        "summary": summary,
    }))
}

/// Runs the experiment in memory.
pub fn execute(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let plan = cfg.plan()?;
    let sim = |e: protective_core::Error| CliError::Simulation(format!("{}: {e}", cfg.mode));
    let (records, summary, csv) = match &plan {
        Plan::Protective(c) | Plan::Zeno(c) => {
            let out = protective_run(c).map_err(sim)?;
            let summary = json!({"trajectory_points": out.trajectory.points.len()});
            let csv = output::trajectory_csv(&out.trajectory)?;
            (vec![out.record], summary, csv)
        }
        Plan::Weak { config, n_runs } => {
            let e = run_weak_ensemble(config, *n_runs, cfg.seed).map_err(sim)?;
            let summary = json!({
                "n_runs": n_runs,
                "mean": e.mean,
                "std": e.std,
                "stderr": e.stderr,
                "target": e.target,
            });
            let csv = output::ensemble_csv(&e.samples)?;
            (vec![e.record], summary, csv)
        }
        Plan::WeakValue(c) => {
            let r = run_weak_value(c).map_err(sim)?;
            let w = weak_value(&c.pre_state, &c.post_state, &c.observable).map_err(sim)?;
            let csv = output::records_csv(std::slice::from_ref(&r))?;
            (vec![r], json!({"weak_value": complex(w)}), csv)
        }
        Plan::Decay(c) => {
            let out = decay_run(c).map_err(sim)?;
            let summary = json!({
                "oracle_weak_value": complex(out.oracle_weak_value),
                "asymptotic_weak_value": out.asymptotic_weak_value.map(complex),
            });
            let csv = output::decay_csv(&out.trajectory)?;
            (vec![out.record], summary, csv)
        }
        Plan::Tomography(c) => {
            let report = tomography_via_protective(c).map_err(sim)?;
            let exact = hermitian_basis(c.system.dim())
                .and_then(|b| b.expectations(&c.system.protected_state()))
                .map_err(sim)?;
            let csv = output::tomography_csv(&report.labels, &report.measured, &exact, &report.records)?;
            let summary = json!({
                "fidelity": report.fidelity,
                "cumulative_disturbance": report.cumulative_disturbance,
                "labels": report.labels,
                "measured": report.measured,
                "exact": exact,
                "reconstructed": vector_json(report.reconstructed.amplitudes()),
                "density": matrix_json(&report.density),
            });
            (report.records, summary, csv)
        }
        Plan::Potential(p) => {
            let dx = p.grid.dx();
            let (energy, psi) = trap_ground_state(&p.potential, p.mass, dx).map_err(sim)?;
            let est = recover_potential_with_threshold(&psi, p.mass, dx, p.threshold).map_err(sim)?;
            let (_, again) = trap_ground_state(&est.filled(), p.mass, dx).map_err(sim)?;
            let overlap: f64 = psi.iter().zip(&again).map(|(a, b)| a * b).sum();
            let offset = est.values.iter().zip(&p.potential).zip(&est.mask).filter(|(_, &m)| m);
            let (sum, count) = offset.fold((0.0, 0usize), |(s, n), ((e, t), _)| (s + t - e, n + 1));
            let shift = sum / count as f64;
            let aligned: Vec<f64> = est.values.iter().map(|v| v + shift).collect();
            let summary = json!({
                "ground_energy": energy,
                "support": est.support(),
                "rms_error": aligned_rms_error(&est.values, &p.potential, &est.mask),
                "closing_fidelity": overlap * overlap,
            });
            let csv = output::potential_csv(&p.grid.positions(), &psi, &p.potential, &aligned, &est.mask)?;
            (Vec::new(), summary, csv)
        }
        Plan::Sweep { axis, base, values } => {
            let records = sweep(base, *axis, values).map_err(sim)?;
            let csv = output::sweep_csv(axis.name(), &records)?;
            (records, json!({"axis": axis.name(), "values": values}), csv)
        }
    };
    Ok(Outcome {
        json: document(cfg, &records, summary)?,
        csv,
    })
}

/// Runs the experiment and writes `<stem>.json` and `<stem>.csv` into
/// `out_dir`, or into the config's output directory when none is given.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: Option<&Path>) -> Result<(PathBuf, PathBuf), CliError> {
    let outcome = execute(cfg)?;
    let dir = out_dir.map_or_else(|| PathBuf::from(&cfg.output.dir), Path::to_path_buf);
    let io = |e: std::io::Error| CliError::Io(format!("{}: {e}", dir.display()));
    fs::create_dir_all(&dir).map_err(io)?;
    let stem = cfg.stem();
    let json_path = dir.join(format!("{stem}.json"));
    let csv_path = dir.join(format!("{stem}.csv"));
    let mut text = serde_json::to_string_pretty(&outcome.json).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    fs::write(&json_path, text).map_err(io)?;
    fs::write(&csv_path, outcome.csv).map_err(io)?;
    Ok((json_path, csv_path))
}
