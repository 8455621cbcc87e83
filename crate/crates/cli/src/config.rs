//! Experiment descriptions read from JSON.
//!
//! Every block rejects unknown keys. Missing optional keys are filled with
//! defaults, and the filled-in config is what gets echoed into results, so
//! `parse_config(echo)` reproduces the same config.

use std::fmt;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use protective_core::pointer::PointerGrid;
use protective_core::protocols::{
    run_rng, DecayConfig, DecayCoupling, Protection, ProtectiveConfig, SweepAxis, WeakValueConfig,
};
use protective_core::quantum::{random_gapped_system, HermitianOperator, StateVector, SystemSpec, TrapGrid};
use protective_core::reconstruction::DEFAULT_MASK_THRESHOLD;
use protective_core::schedule::{Schedule, ScheduleKind};
use protective_core::{Error, C64};

use crate::CliError;

/// RNG stream reserved for drawing a random system, kept apart from the
/// per-run streams `0, 1, 2, ...`.
pub const SYSTEM_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Protective,
    Zeno,
    Weak,
    Weakvalue,
    Decay,
    Tomography,
    Potential,
    Sweep,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Protective => "protective",
            Mode::Zeno => "zeno",
            Mode::Weak => "weak",
            Mode::Weakvalue => "weakvalue",
            Mode::Decay => "decay",
            Mode::Tomography => "tomography",
            Mode::Potential => "potential",
            Mode::Sweep => "sweep",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub protective: Option<ProtectiveBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zeno: Option<ZenoBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weak: Option<WeakBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weakvalue: Option<WeakValueBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decay: Option<DecayBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tomography: Option<TomographyBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<PotentialBlock>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepBlock>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_dir")]
    pub dir: String,
    /// File stem for `<stem>.json` and `<stem>.csv`; the mode name if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stem: Option<String>,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            stem: None,
        }
    }
}

fn default_dir() -> String {
    ".".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum OperatorSpec {
    SigmaX,
    SigmaY,
    SigmaZ,
    Identity(usize),
    Diagonal(Vec<f64>),
    Matrix {
        re: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        im: Option<Vec<Vec<f64>>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum StateSpec {
    /// Normalized on load.
    Amplitudes {
        re: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        im: Option<Vec<f64>>,
    },
    /// `cos θ|0⟩ + e^{iφ} sin θ|1⟩`.
    Qubit {
        theta: f64,
        #[serde(default)]
        phi: f64,
    },
    Basis { dim: usize, index: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemParams {
    /// `H = -gap |ψ⟩⟨ψ|`.
    RankOne {
        state: StateSpec,
        #[serde(default = "one")]
        gap: f64,
    },
    Hamiltonian {
        matrix: OperatorSpec,
        #[serde(default)]
        protected_index: usize,
    },
    /// Spectrum `{0, gap, 1.5 gap, ...}` in a basis drawn from the seed.
    RandomGapped {
        dim: usize,
        #[serde(default = "one")]
        gap: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n_points: usize,
    pub half_width: f64,
}

impl GridSpec {
    fn build(&self) -> Result<PointerGrid, Error> {
        PointerGrid::new(self.n_points, self.half_width)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    #[serde(default)]
    pub kind: ScheduleKind,
    pub total_time: f64,
    #[serde(default = "one")]
    pub area: f64,
    #[serde(default = "default_ramp")]
    pub ramp_fraction: f64,
}

impl ScheduleSpec {
    fn with_time(total_time: f64) -> Self {
        Self {
            kind: ScheduleKind::default(),
            total_time,
            area: 1.0,
            ramp_fraction: default_ramp(),
        }
    }

    fn build(&self) -> Result<Schedule, Error> {
        Schedule::new(self.kind, self.total_time, self.area, self.ramp_fraction)
    }
}

fn one() -> f64 {
    1.0
}

fn default_ramp() -> f64 {
    0.1
}

fn default_steps() -> usize {
    2000
}

fn default_sample_every() -> usize {
    20
}

fn grid_256_20() -> GridSpec {
    GridSpec {
        n_points: 256,
        half_width: 20.0,
    }
}

fn grid_512_40() -> GridSpec {
    GridSpec {
        n_points: 512,
        half_width: 40.0,
    }
}

fn grid_512_80() -> GridSpec {
    GridSpec {
        n_points: 512,
        half_width: 80.0,
    }
}

fn schedule_200() -> ScheduleSpec {
    ScheduleSpec::with_time(200.0)
}

fn schedule_500() -> ScheduleSpec {
    ScheduleSpec::with_time(500.0)
}

fn sigma_narrow() -> f64 {
    0.1
}

fn sigma_zeno() -> f64 {
    0.25
}

fn sigma_weak() -> f64 {
    10.0
}

fn gap() -> Protection {
    Protection::Gap
}

fn unprotected() -> Protection {
    Protection::None
}

fn default_projections() -> usize {
    100
}

fn default_ensemble() -> usize {
    10_000
}

fn default_kick() -> f64 {
    0.01
}

fn default_trap_points() -> usize {
    512
}

fn default_trap_width() -> f64 {
    8.0
}

fn default_threshold() -> f64 {
    DEFAULT_MASK_THRESHOLD
}

/// Gap-protected (or explicitly unprotected) adiabatic measurement. The
/// time step is `total_time / steps`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtectiveBlock {
    pub system: SystemParams,
    pub observable: OperatorSpec,
    #[serde(default = "grid_256_20")]
    pub grid: GridSpec,
    #[serde(default = "sigma_narrow")]
    pub sigma_q: f64,
    #[serde(default = "schedule_200")]
    pub schedule: ScheduleSpec,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_sample_every")]
    pub sample_every: usize,
    #[serde(default = "gap")]
    pub protection: Protection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZenoBlock {
    pub system: SystemParams,
    pub observable: OperatorSpec,
    #[serde(default = "grid_256_20")]
    pub grid: GridSpec,
    #[serde(default = "sigma_zeno")]
    pub sigma_q: f64,
    #[serde(default = "schedule_200")]
    pub schedule: ScheduleSpec,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_sample_every")]
    pub sample_every: usize,
    #[serde(default = "default_projections")]
    pub n_projections: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeakBlock {
    pub system: SystemParams,
    pub observable: OperatorSpec,
    #[serde(default = "grid_512_80")]
    pub grid: GridSpec,
    #[serde(default = "sigma_weak")]
    pub sigma_q: f64,
    #[serde(default = "schedule_200")]
    pub schedule: ScheduleSpec,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_sample_every")]
    pub sample_every: usize,
    #[serde(default = "unprotected")]
    pub protection: Protection,
    #[serde(default = "default_ensemble")]
    pub n_runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeakValueBlock {
    pub pre_state: StateSpec,
    pub post_state: StateSpec,
    pub observable: OperatorSpec,
    #[serde(default = "default_kick")]
    pub kick_strength: f64,
    #[serde(default = "grid_512_40")]
    pub grid: GridSpec,
    #[serde(default = "one")]
    pub sigma_q: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayBlock {
    /// Hermitian part `H₀`.
    pub hamiltonian: OperatorSpec,
    pub decay_level: usize,
    pub decay_rate: f64,
    pub pre_state: StateSpec,
    pub observable: OperatorSpec,
    #[serde(default)]
    pub coupling: DecayCoupling,
    #[serde(default = "default_kick")]
    pub kick_strength: f64,
    pub total_time: f64,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "grid_512_40")]
    pub grid: GridSpec,
    #[serde(default = "one")]
    pub sigma_q: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TomographyBlock {
    pub system: SystemParams,
    #[serde(default = "grid_256_20")]
    pub grid: GridSpec,
    #[serde(default = "sigma_narrow")]
    pub sigma_q: f64,
    /// Per-observable measurement window.
    #[serde(default = "schedule_500")]
    pub schedule: ScheduleSpec,
    #[serde(default = "default_steps")]
    pub steps: usize,
    #[serde(default = "default_sample_every")]
    pub sample_every: usize,
    #[serde(default = "gap")]
    pub protection: Protection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialSpec {
    /// `m ω² x² / 2`.
    Harmonic { omega: f64 },
    /// `a x⁴ - b x²`.
    DoubleWell { a: f64, b: f64 },
    /// `Σ c_k x^k`.
    Polynomial(Vec<f64>),
    /// One value per grid point.
    Values(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialBlock {
    pub potential: PotentialSpec,
    #[serde(default = "default_trap_points")]
    pub n_points: usize,
    #[serde(default = "default_trap_width")]
    pub half_width: f64,
    #[serde(default = "one")]
    pub mass: f64,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepBlock {
    pub base: ProtectiveBlock,
    pub axis: String,
    pub values: Vec<f64>,
}

/// Trap description resolved onto its grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialPlan {
    pub grid: TrapGrid,
    pub potential: Vec<f64>,
    pub mass: f64,
    pub threshold: f64,
}

/// Validated, fully resolved work for one experiment.
#[derive(Debug, Clone, PartialEq)]
pub enum Plan {
    Protective(ProtectiveConfig),
    Zeno(ProtectiveConfig),
    Weak { config: ProtectiveConfig, n_runs: usize },
    WeakValue(WeakValueConfig),
    Decay(DecayConfig),
    Tomography(ProtectiveConfig),
    Potential(PotentialPlan),
    Sweep {
        axis: SweepAxis,
        base: ProtectiveConfig,
        values: Vec<f64>,
    },
}

impl Plan {
    /// Number of independent simulations the plan performs.
    pub fn n_runs(&self) -> usize {
        match self {
            Plan::Weak { n_runs, .. } => *n_runs,
            Plan::Tomography(cfg) => cfg.system.dim().pow(2),
            Plan::Sweep { values, .. } => values.len(),
            _ => 1,
        }
    }
}

/// Parses and validates a JSON experiment description.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(&mut *de).map_err(|e| {
        let path = e.path().to_string();
        CliError::Config(format!("{path}: {}", e.into_inner()))
    })?;
    de.end().map_err(|e| CliError::Config(e.to_string()))?;
    cfg.plan()?;
    Ok(cfg)
}

/// Maps a core validation error into a config error qualified by `block`.
fn at(block: &'static str) -> impl Fn(Error) -> CliError {
    move |e| match e {
        Error::InvalidParameter { name, reason } => CliError::Config(format!("{block}.{name}: {reason}")),
        other => CliError::Config(format!("{block}: {other}")),
    }
}

fn bad(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

impl ExperimentConfig {
    fn present(&self) -> Vec<Mode> {
        let flags = [
            (Mode::Protective, self.protective.is_some()),
            (Mode::Zeno, self.zeno.is_some()),
            (Mode::Weak, self.weak.is_some()),
            (Mode::Weakvalue, self.weakvalue.is_some()),
            (Mode::Decay, self.decay.is_some()),
            (Mode::Tomography, self.tomography.is_some()),
            (Mode::Potential, self.potential.is_some()),
            (Mode::Sweep, self.sweep.is_some()),
        ];
        flags.into_iter().filter(|f| f.1).map(|f| f.0).collect()
    }

    pub fn stem(&self) -> String {
        self.output.stem.clone().unwrap_or_else(|| self.mode.name().to_string())
    }

    /// Resolves the mode block into core configs, validating everything.
    pub fn plan(&self) -> Result<Plan, CliError> {
        let present = self.present();
        if present != [self.mode] {
            let names: Vec<&str> = present.iter().map(|m| m.name()).collect();
            return Err(CliError::Config(format!(
                "mode \"{}\" needs exactly one block named \"{}\", found {:?}",
                self.mode, self.mode, names
            )));
        }
        let seed = self.seed;
        match self.mode {
            Mode::Protective => {
                let b = self.protective.as_ref().expect("checked");
                Ok(Plan::Protective(b.build(seed).map_err(at("protective"))?))
            }
            Mode::Zeno => {
                let b = self.zeno.as_ref().expect("checked");
                Ok(Plan::Zeno(b.build(seed).map_err(at("zeno"))?))
            }
            Mode::Weak => {
                let b = self.weak.as_ref().expect("checked");
                let config = b.build(seed).map_err(at("weak"))?;
                if b.n_runs < 2 {
                    return Err(at("weak")(bad("n_runs", format!("must be >= 2, got {}", b.n_runs))));
                }
                Ok(Plan::Weak {
                    config,
                    n_runs: b.n_runs,
                })
            }
            Mode::Weakvalue => {
                let b = self.weakvalue.as_ref().expect("checked");
                Ok(Plan::WeakValue(b.build().map_err(at("weakvalue"))?))
            }
            Mode::Decay => {
                let b = self.decay.as_ref().expect("checked");
                Ok(Plan::Decay(b.build().map_err(at("decay"))?))
            }
            Mode::Tomography => {
                let b = self.tomography.as_ref().expect("checked");
                Ok(Plan::Tomography(b.build(seed).map_err(at("tomography"))?))
            }
            Mode::Potential => {
                let b = self.potential.as_ref().expect("checked");
                Ok(Plan::Potential(b.build().map_err(at("potential"))?))
            }
            Mode::Sweep => {
                let b = self.sweep.as_ref().expect("checked");
                let axis: SweepAxis = b.axis.parse().map_err(|e| CliError::Config(format!("sweep.axis: {e}")))?;
                if b.values.is_empty() {
                    return Err(CliError::Config("sweep.values: must not be empty".to_string()));
                }
                let base = b.base.build(seed).map_err(at("sweep.base"))?;
                for (i, &v) in b.values.iter().enumerate() {
                    axis.apply(&base, v)
                        .map_err(|e| CliError::Config(format!("sweep.values[{i}] ({axis} = {v}): {e}")))?;
                }
                Ok(Plan::Sweep {
                    axis,
                    base,
                    values: b.values.clone(),
                })
            }
        }
    }
}

impl OperatorSpec {
    pub fn build(&self) -> Result<HermitianOperator, Error> {
        match self {
            OperatorSpec::SigmaX => Ok(HermitianOperator::sigma_x()),
            OperatorSpec::SigmaY => Ok(HermitianOperator::sigma_y()),
            OperatorSpec::SigmaZ => Ok(HermitianOperator::sigma_z()),
            OperatorSpec::Identity(d) => HermitianOperator::identity(*d),
            OperatorSpec::Diagonal(v) => HermitianOperator::diagonal(v),
            OperatorSpec::Matrix { re, im } => {
                let d = re.len();
                if re.iter().any(|row| row.len() != d) {
                    return Err(bad("matrix", "re must be a square array of rows"));
                }
                if let Some(im) = im {
                    if im.len() != d || im.iter().any(|row| row.len() != d) {
                        return Err(bad("matrix", "im must have the same shape as re"));
                    }
                }
                let m = DMatrix::from_fn(d, d, |r, c| {
                    C64::new(re[r][c], im.as_ref().map_or(0.0, |im| im[r][c]))
                });
                HermitianOperator::new(m)
            }
        }
    }
}

impl StateSpec {
    pub fn build(&self) -> Result<StateVector, Error> {
        match self {
            StateSpec::Amplitudes { re, im } => {
                if let Some(im) = im {
                    if im.len() != re.len() {
                        return Err(bad("amplitudes", "im must have the same length as re"));
                    }
                }
                let amps: Vec<C64> = re
                    .iter()
                    .enumerate()
                    .map(|(i, &x)| C64::new(x, im.as_ref().map_or(0.0, |im| im[i])))
                    .collect();
                StateVector::normalized(nalgebra::DVector::from_vec(amps))
            }
            StateSpec::Qubit { theta, phi } => {
                if !(theta.is_finite() && phi.is_finite()) {
                    return Err(bad("qubit", "angles must be finite"));
                }
                Ok(StateVector::qubit(*theta, *phi))
            }
            StateSpec::Basis { dim, index } => StateVector::basis(*dim, *index),
        }
    }
}

impl SystemParams {
    pub fn build(&self, seed: u64) -> Result<SystemSpec, Error> {
        match self {
            SystemParams::RankOne { state, gap } => SystemSpec::rank_one(&state.build()?, *gap),
            SystemParams::Hamiltonian { matrix, protected_index } => {
                SystemSpec::with_protected_level(matrix.build()?, *protected_index)
            }
            SystemParams::RandomGapped { dim, gap } => {
                random_gapped_system(*dim, *gap, &mut run_rng(seed, SYSTEM_STREAM))
            }
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn protective_config(
    system: &SystemParams,
    observable: HermitianOperator,
    grid: &GridSpec,
    sigma_q: f64,
    schedule: &ScheduleSpec,
    steps: usize,
    sample_every: usize,
    protection: Protection,
    seed: u64,
) -> Result<ProtectiveConfig, Error> {
    if steps == 0 {
        return Err(bad("steps", "must be >= 1"));
    }
    if sample_every == 0 {
        return Err(bad("sample_every", "must be >= 1"));
    }
    let schedule = schedule.build()?;
    let cfg = ProtectiveConfig {
        system: system.build(seed)?,
        observable,
        grid: grid.build()?,
        sigma_q,
        schedule,
        dt: schedule.total_time / steps as f64,
        sample_every,
        protection,
    };
    cfg.validate()?;
    Ok(cfg)
}

impl ProtectiveBlock {
    pub fn build(&self, seed: u64) -> Result<ProtectiveConfig, Error> {
        protective_config(
            &self.system,
            self.observable.build()?,
            &self.grid,
            self.sigma_q,
            &self.schedule,
            self.steps,
            self.sample_every,
            self.protection,
            seed,
        )
    }
}

impl ZenoBlock {
    pub fn build(&self, seed: u64) -> Result<ProtectiveConfig, Error> {
        protective_config(
            &self.system,
            self.observable.build()?,
            &self.grid,
            self.sigma_q,
            &self.schedule,
            self.steps,
            self.sample_every,
            Protection::Zeno {
                n_projections: self.n_projections,
            },
            seed,
        )
    }
}

impl WeakBlock {
    pub fn build(&self, seed: u64) -> Result<ProtectiveConfig, Error> {
        protective_config(
            &self.system,
            self.observable.build()?,
            &self.grid,
            self.sigma_q,
            &self.schedule,
            self.steps,
            self.sample_every,
            self.protection,
            seed,
        )
    }
}

impl TomographyBlock {
    pub fn build(&self, seed: u64) -> Result<ProtectiveConfig, Error> {
        let system = self.system.build(seed)?;
        protective_config(
            &self.system,
            HermitianOperator::identity(system.dim())?,
            &self.grid,
            self.sigma_q,
            &self.schedule,
            self.steps,
            self.sample_every,
            self.protection,
            seed,
        )
    }
}

impl WeakValueBlock {
    pub fn build(&self) -> Result<WeakValueConfig, Error> {
        let cfg = WeakValueConfig {
            pre_state: self.pre_state.build()?,
            post_state: self.post_state.build()?,
            observable: self.observable.build()?,
            kick_strength: self.kick_strength,
            grid: self.grid.build()?,
            sigma_q: self.sigma_q,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl DecayBlock {
    pub fn build(&self) -> Result<DecayConfig, Error> {
        let cfg = DecayConfig {
            hamiltonian: self.hamiltonian.build()?,
            decay_level: self.decay_level,
            decay_rate: self.decay_rate,
            pre_state: self.pre_state.build()?,
            observable: self.observable.build()?,
            coupling: self.coupling,
            kick_strength: self.kick_strength,
            total_time: self.total_time,
            n_steps: self.steps,
            grid: self.grid.build()?,
            sigma_q: self.sigma_q,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl PotentialSpec {
    fn sample(&self, grid: &TrapGrid, mass: f64) -> Result<Vec<f64>, Error> {
        let v = match self {
            PotentialSpec::Harmonic { omega } => grid.sample(|x| 0.5 * mass * omega * omega * x * x),
            PotentialSpec::DoubleWell { a, b } => grid.sample(|x| a * x.powi(4) - b * x * x),
            PotentialSpec::Polynomial(c) => grid.sample(|x| c.iter().rev().fold(0.0, |acc, &ck| acc * x + ck)),
            PotentialSpec::Values(v) => {
                let n = grid.positions().len();
                if v.len() != n {
                    return Err(bad("potential", format!("expected {n} values, got {}", v.len())));
                }
                v.clone()
            }
        };
        if v.iter().any(|x| !x.is_finite()) {
            return Err(bad("potential", "values must be finite"));
        }
        Ok(v)
    }
}

impl PotentialBlock {
    pub fn build(&self) -> Result<PotentialPlan, Error> {
        if !(self.mass.is_finite() && self.mass > 0.0) {
            return Err(bad("mass", format!("must be > 0, got {}", self.mass)));
        }
        if !(self.threshold.is_finite() && self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(bad("threshold", format!("must lie in (0, 1), got {}", self.threshold)));
        }
        let grid = TrapGrid::new(self.n_points, self.half_width)?;
        Ok(PotentialPlan {
            potential: self.potential.sample(&grid, self.mass)?,
            grid,
            mass: self.mass,
            threshold: self.threshold,
        })
    }
}
