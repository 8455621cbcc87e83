//! CSV tables. Floats are written with 17 significant digits so that every
//! value parses back to the same `f64`.

use protective_core::dynamics::Trajectory;
use protective_core::protocols::RunRecord;

use crate::CliError;

pub const TRAJECTORY_COLUMNS: [&str; 5] = ["time", "fidelity", "survival", "q_mean", "norm"];
pub const ENSEMBLE_COLUMNS: [&str; 2] = ["run", "q"];
pub const RECORD_COLUMNS: [&str; 8] = [
    "q_mean", "q_var", "p_mean", "readout", "target", "error", "fidelity", "survival",
];
pub const DECAY_COLUMNS: [&str; 3] = ["time", "norm", "survival"];
pub const TOMOGRAPHY_COLUMNS: [&str; 9] = [
    "observable", "q_mean", "q_var", "measured", "exact", "error", "fidelity", "survival", "p_mean",
];
pub const POTENTIAL_COLUMNS: [&str; 5] = ["x", "psi", "v_true", "v_recovered", "mask"];

pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

fn record_fields(r: &RunRecord) -> Vec<String> {
    [r.q_mean, r.q_var, r.p_mean, r.readout, r.target, r.error, r.fidelity, r.survival]
        .into_iter()
        .map(float)
        .collect()
}

/// Accumulates rows under a fixed header.
pub struct Table {
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Result<Self, CliError> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer
            .write_record(header.iter().map(|h| h.as_ref()))
            .map_err(|e| CliError::Io(e.to_string()))?;
        Ok(Self { writer })
    }

    pub fn row<S: AsRef<[u8]>>(&mut self, fields: impl IntoIterator<Item = S>) -> Result<(), CliError> {
        self.writer.write_record(fields).map_err(|e| CliError::Io(e.to_string()))
    }

    pub fn finish(self) -> Result<String, CliError> {
        let bytes = self.writer.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| CliError::Io(e.to_string()))
    }
}

pub fn trajectory_csv(t: &Trajectory) -> Result<String, CliError> {
    let mut table = Table::new(&TRAJECTORY_COLUMNS)?;
    for p in &t.points {
        table.row([p.time, p.fidelity, p.survival, p.q_mean, p.norm].map(float))?;
    }
    table.finish()
}

pub fn decay_csv(t: &Trajectory) -> Result<String, CliError> {
    let mut table = Table::new(&DECAY_COLUMNS)?;
    for p in &t.points {
        table.row([p.time, p.norm, p.survival].map(float))?;
    }
    table.finish()
}

pub fn ensemble_csv(samples: &[f64]) -> Result<String, CliError> {
    let mut table = Table::new(&ENSEMBLE_COLUMNS)?;
    for (i, &q) in samples.iter().enumerate() {
        table.row([i.to_string(), float(q)])?;
    }
    table.finish()
}

pub fn records_csv(records: &[RunRecord]) -> Result<String, CliError> {
    let mut table = Table::new(&RECORD_COLUMNS)?;
    for r in records {
        table.row(record_fields(r))?;
    }
    table.finish()
}

/// Sweep table: the axis value comes first, then the record columns.
pub fn sweep_csv(axis: &str, records: &[RunRecord]) -> Result<String, CliError> {
    let header: Vec<&str> = std::iter::once(axis).chain(RECORD_COLUMNS).collect();
    let mut table = Table::new(&header)?;
    for r in records {
        let mut row = vec![float(r.axis_value.unwrap_or(f64::NAN))];
        row.extend(record_fields(r));
        table.row(row)?;
    }
    table.finish()
}

pub fn tomography_csv(labels: &[String], measured: &[f64], exact: &[f64], records: &[RunRecord]) -> Result<String, CliError> {
    let mut table = Table::new(&TOMOGRAPHY_COLUMNS)?;
    for (((label, &m), &e), r) in labels.iter().zip(measured).zip(exact).zip(records) {
        let mut row = vec![label.clone()];
        row.extend([r.q_mean, r.q_var, m, e, (m - e).abs(), r.fidelity, r.survival, r.p_mean].map(float));
        table.row(row)?;
    }
    table.finish()
}

/// `v_recovered` is aligned to `v_true` on the mask and `NaN` outside it.
pub fn potential_csv(x: &[f64], psi: &[f64], truth: &[f64], recovered: &[f64], mask: &[bool]) -> Result<String, CliError> {
    let mut table = Table::new(&POTENTIAL_COLUMNS)?;
    for i in 0..x.len() {
        let v = if mask[i] { recovered[i] } else { f64::NAN };
        table.row([float(x[i]), float(psi[i]), float(truth[i]), float(v), u8::from(mask[i]).to_string()])?;
    }
    table.finish()
}
