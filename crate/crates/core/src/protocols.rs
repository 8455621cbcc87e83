//! Experiment drivers: protective runs, weak-measurement ensembles, weak
//! values under post-selection, post-selection on a decaying system, and
//! parameter sweeps.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::dynamics::{evolve_non_hermitian, evolve_with_hamiltonian, zeno_evolve, CompositeState, Trajectory, TrajectoryPoint};
use crate::error::{invalid, Error, Result};
use crate::pointer::{gaussian_pointer, moments, PointerGrid, ReadoutSampler};
use crate::quantum::{check_same, expectation, HermitianOperator, StateVector, SystemSpec};
use crate::schedule::Schedule;

/// Post-selection probabilities below this are treated as failure.
pub const POSTSELECTION_FLOOR: f64 = 1e-12;
/// Largest admissible `Γ·t` for decay runs.
pub const MAX_DECAY_EXPONENT: f64 = 50.0;

/// Independent random stream for run `index` of an experiment seeded with `master`.
pub fn run_rng(master: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Protection {
    /// Evolve under the gapped system Hamiltonian.
    Gap,
    /// No system Hamiltonian; `n_projections` equally spaced projections onto
    /// the protected state.
    Zeno { n_projections: usize },
    /// Bare von Neumann coupling, no system Hamiltonian.
    None,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtectiveConfig {
    pub system: SystemSpec,
    pub observable: HermitianOperator,
    pub grid: PointerGrid,
    pub sigma_q: f64,
    pub schedule: Schedule,
    pub dt: f64,
    pub sample_every: usize,
    pub protection: Protection,
}

impl ProtectiveConfig {
    /// Defaults: sine-squared bump of unit area, `dt = T/2000`, gap protection.
    pub fn new(system: SystemSpec, observable: HermitianOperator, grid: PointerGrid, sigma_q: f64, total_time: f64) -> Result<Self> {
        let schedule = Schedule::sine_squared(total_time, 1.0)?;
        let cfg = Self {
            system,
            observable,
            grid,
            sigma_q,
            schedule,
            dt: total_time / 2000.0,
            sample_every: 20,
            protection: Protection::Gap,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        check_same(self.system.dim(), self.observable.dim())?;
        gaussian_pointer(self.grid, self.sigma_q)?;
        if !(self.dt.is_finite() && self.dt > 0.0 && self.dt <= self.schedule.total_time / 100.0 + 1e-15) {
            return Err(invalid("dt", format!("must lie in (0, T/100], got {}", self.dt)));
        }
        if let Protection::Zeno { n_projections } = self.protection {
            if n_projections == 0 {
                return Err(invalid("n_projections", "must be >= 1"));
            }
        }
        Ok(())
    }

    pub fn echo(&self) -> Value {
        json!({
            "kind": "protective",
            "system_dim": self.system.dim(),
            "hamiltonian": matrix_json(self.system.hamiltonian.matrix()),
            "protected_index": self.system.protected_index,
            "gap": self.system.gap,
            "observable": matrix_json(self.observable.matrix()),
            "n_points": self.grid.n_points(),
            "half_width": self.grid.half_width(),
            "sigma_q": self.sigma_q,
            "schedule": self.schedule,
            "dt": self.dt,
            "protection": self.protection,
        })
    }
}

/// Complex matrix as `[[[re, im], ...], ...]`.
pub fn matrix_json(m: &DMatrix<C64>) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|r| Value::Array((0..m.ncols()).map(|c| json!([m[(r, c)].re, m[(r, c)].im])).collect()))
            .collect(),
    )
}

pub fn vector_json(v: &DVector<C64>) -> Value {
    Value::Array(v.iter().map(|z| json!([z.re, z.im])).collect())
}

/// Readout statistics of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub q_mean: f64,
    pub q_var: f64,
    pub p_mean: f64,
    /// Pointer reading in units of the observable: `q_mean` for scheduled
    /// couplings, `q_mean / ε` for impulsive kicks.
    pub readout: f64,
    pub target: f64,
    /// `|readout - target|`.
    pub error: f64,
    /// Fidelity of the final reduced system state to the protected state.
    pub fidelity: f64,
    /// Probability of passing every projection or post-selection.
    pub survival: f64,
    pub wall_time_s: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub axis_value: Option<f64>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty", default)]
    pub extra: BTreeMap<String, f64>,
    pub config: Value,
}

impl RunRecord {
    fn is_finite(&self) -> bool {
        [
            self.q_mean,
            self.q_var,
            self.p_mean,
            self.readout,
            self.target,
            self.error,
            self.fidelity,
            self.survival,
        ]
        .iter()
        .all(|x| x.is_finite())
    }
}

#[derive(Debug, Clone)]
pub struct ProtectiveOutcome {
    pub record: RunRecord,
    pub trajectory: Trajectory,
    pub state: CompositeState,
}

/// Protective run of `cfg.observable` on the protected state of `cfg.system`.
pub fn run_protective(cfg: &ProtectiveConfig) -> Result<RunRecord> {
    Ok(protective_run(cfg)?.record)
}

pub fn protective_run(cfg: &ProtectiveConfig) -> Result<ProtectiveOutcome> {
    protective_run_from(cfg, &cfg.system.protected_state())
}

/// Protective run starting from an arbitrary system state (used when the
/// state is carried between measurements on a single system). Target and
/// fidelity still refer to the protected state.
pub fn protective_run_from(cfg: &ProtectiveConfig, initial: &StateVector) -> Result<ProtectiveOutcome> {
    cfg.validate()?;
    check_same(cfg.system.dim(), initial.dim())?;
    let start = Instant::now();
    let psi = cfg.system.protected_state();
    let init = CompositeState::product(initial, &gaussian_pointer(cfg.grid, cfg.sigma_q)?);
    let zero = HermitianOperator::zeros(cfg.system.dim())?;
    let (state, trajectory, survival) = match cfg.protection {
        Protection::Gap => {
            let (s, t) = evolve_with_hamiltonian(&init, &cfg.system.hamiltonian, &psi, &cfg.observable, &cfg.schedule, cfg.dt, cfg.sample_every)?;
            (s, t, 1.0)
        }
        Protection::None => {
            let (s, t) = evolve_with_hamiltonian(&init, &zero, &psi, &cfg.observable, &cfg.schedule, cfg.dt, cfg.sample_every)?;
            (s, t, 1.0)
        }
        Protection::Zeno { n_projections } => {
            let out = zeno_evolve(&init, &psi, &zero, &cfg.observable, &cfg.schedule, cfg.dt, n_projections, cfg.sample_every)?;
            (out.state, out.trajectory, out.survival)
        }
    };
    let m = state.pointer_moments();
    let target = cfg.schedule.area * expectation(&psi, &cfg.observable)?;
    let record = RunRecord {
        q_mean: m.q_mean,
        q_var: m.q_var,
        p_mean: m.p_mean,
        readout: m.q_mean,
        target,
        error: (m.q_mean - target).abs(),
        fidelity: state.system_fidelity(&psi)?,
        survival,
        wall_time_s: start.elapsed().as_secs_f64(),
        axis_value: None,
        extra: BTreeMap::new(),
        config: cfg.echo(),
    };
    debug_assert!(record.is_finite());
    Ok(ProtectiveOutcome {
        record,
        trajectory,
        state,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleRecord {
    pub samples: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub stderr: f64,
    pub target: f64,
    /// Moments of the single-run pointer distribution.
    pub record: RunRecord,
}

/// `n_runs` single-shot pointer readouts, each on a freshly prepared system.
///
/// The evolution is deterministic, so the final pointer distribution is
/// computed once; only the projective readouts differ between runs, each
/// drawing from its own seed stream.
pub fn run_weak_ensemble(cfg: &ProtectiveConfig, n_runs: usize, seed: u64) -> Result<EnsembleRecord> {
    if n_runs < 1 {
        return Err(invalid("n_runs", "must be >= 1"));
    }
    let outcome = protective_run(cfg)?;
    let density = outcome.state.pointer_position_density();
    let sampler = ReadoutSampler::from_density(&cfg.grid, &density)?;
    let samples: Vec<f64> = (0..n_runs as u64)
        .into_par_iter()
        .map(|i| sampler.sample(&mut run_rng(seed, i)))
        .collect();
    let (mean, std) = sample_mean_std(&samples);
    Ok(EnsembleRecord {
        mean,
        std,
        stderr: std / (n_runs as f64).sqrt(),
        target: outcome.record.target,
        samples,
        record: outcome.record,
    })
}

/// Mean and unbiased standard deviation (zero for a single sample).
pub fn sample_mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeakValueConfig {
    pub pre_state: StateVector,
    pub post_state: StateVector,
    pub observable: HermitianOperator,
    pub kick_strength: f64,
    pub grid: PointerGrid,
    pub sigma_q: f64,
}

impl WeakValueConfig {
    pub fn validate(&self) -> Result<()> {
        check_same(self.pre_state.dim(), self.post_state.dim())?;
        check_same(self.pre_state.dim(), self.observable.dim())?;
        if !(self.kick_strength.is_finite() && self.kick_strength > 0.0) {
            return Err(invalid("kick_strength", format!("must be > 0, got {}", self.kick_strength)));
        }
        let overlap = self.post_state.inner(&self.pre_state)?.norm();
        if overlap < 1e-8 {
            return Err(invalid("post_state", format!("orthogonal to pre_state (|<post|pre>| = {overlap:e})")));
        }
        gaussian_pointer(self.grid, self.sigma_q)?;
        Ok(())
    }

    pub fn echo(&self) -> Value {
        json!({
            "kind": "weak_value",
            "pre_state": vector_json(self.pre_state.amplitudes()),
            "post_state": vector_json(self.post_state.amplitudes()),
            "observable": matrix_json(self.observable.matrix()),
            "kick_strength": self.kick_strength,
            "n_points": self.grid.n_points(),
            "half_width": self.grid.half_width(),
            "sigma_q": self.sigma_q,
        })
    }
}

/// `⟨Φ|O|Ψ⟩ / ⟨Φ|Ψ⟩`.
pub fn weak_value(pre: &StateVector, post: &StateVector, obs: &HermitianOperator) -> Result<C64> {
    check_same(pre.dim(), obs.dim())?;
    check_same(pre.dim(), post.dim())?;
    let num = post.amplitudes().dotc(&(obs.matrix() * pre.amplitudes()));
    let den = post.amplitudes().dotc(pre.amplitudes());
    Ok(num / den)
}

/// Impulsive kick `exp(-i ε P⊗O)` followed by post-selection on `Φ`.
pub fn run_weak_value(cfg: &WeakValueConfig) -> Result<RunRecord> {
    cfg.validate()?;
    let start = Instant::now();
    let mut state = CompositeState::product(&cfg.pre_state, &gaussian_pointer(cfg.grid, cfg.sigma_q)?);
    state.apply_kick(&cfg.observable, cfg.kick_strength)?;
    let (pointer, prob) = state.project_system(&cfg.post_state)?;
    if prob < POSTSELECTION_FLOOR {
        return Err(Error::PostSelectionFailed {
            probability: prob,
            threshold: POSTSELECTION_FLOOR,
        });
    }
    let m = moments(&pointer);
    let w = weak_value(&cfg.pre_state, &cfg.post_state, &cfg.observable)?;
    let readout = m.q_mean / cfg.kick_strength;
    let mut extra = BTreeMap::new();
    extra.insert("weak_value_imag".to_string(), w.im);
    extra.insert("postselection_probability".to_string(), prob);
    Ok(RunRecord {
        q_mean: m.q_mean,
        q_var: m.q_var,
        p_mean: m.p_mean,
        readout,
        target: w.re,
        error: (readout - w.re).abs(),
        fidelity: 1.0,
        survival: prob,
        wall_time_s: start.elapsed().as_secs_f64(),
        axis_value: None,
        extra,
        config: cfg.echo(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DecayCoupling {
    /// Single kick of strength `ε` at `t = 0`.
    #[default]
    Kick,
    /// Sine-squared bump of area `ε` spread over the whole decay window.
    Scheduled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayConfig {
    /// Hermitian part `H₀` of the effective Hamiltonian.
    pub hamiltonian: HermitianOperator,
    pub decay_level: usize,
    /// Decay rate `Γ` (1/time) of `decay_level`.
    pub decay_rate: f64,
    pub pre_state: StateVector,
    pub observable: HermitianOperator,
    pub coupling: DecayCoupling,
    /// Total coupling `ε`.
    pub kick_strength: f64,
    pub total_time: f64,
    pub n_steps: usize,
    pub grid: PointerGrid,
    pub sigma_q: f64,
}

impl DecayConfig {
    pub fn validate(&self) -> Result<()> {
        let d = self.hamiltonian.dim();
        check_same(d, self.pre_state.dim())?;
        check_same(d, self.observable.dim())?;
        if self.decay_level >= d {
            return Err(invalid("decay_level", format!("{} >= dimension {d}", self.decay_level)));
        }
        if !(self.decay_rate.is_finite() && self.decay_rate >= 0.0) {
            return Err(invalid("decay_rate", format!("must be >= 0, got {}", self.decay_rate)));
        }
        if !(self.total_time.is_finite() && self.total_time > 0.0) {
            return Err(invalid("total_time", format!("must be > 0, got {}", self.total_time)));
        }
        if self.decay_rate * self.total_time > MAX_DECAY_EXPONENT {
            return Err(invalid(
                "decay_rate",
                format!("decay_rate * total_time = {} exceeds {MAX_DECAY_EXPONENT}", self.decay_rate * self.total_time),
            ));
        }
        if !(self.kick_strength.is_finite() && self.kick_strength > 0.0) {
            return Err(invalid("kick_strength", format!("must be > 0, got {}", self.kick_strength)));
        }
        if self.n_steps < 100 {
            return Err(invalid("n_steps", format!("must be >= 100, got {}", self.n_steps)));
        }
        gaussian_pointer(self.grid, self.sigma_q)?;
        Ok(())
    }

    /// `H_eff = H₀ - (iΓ/2) |k⟩⟨k|`.
    pub fn effective_hamiltonian(&self) -> DMatrix<C64> {
        let mut h = self.hamiltonian.matrix().clone();
        h[(self.decay_level, self.decay_level)] -= C64::new(0.0, 0.5 * self.decay_rate);
        h
    }

    fn schedule(&self) -> Result<Schedule> {
        Schedule::sine_squared(self.total_time, self.kick_strength)
    }

    pub fn echo(&self) -> Value {
        json!({
            "kind": "decay",
            "hamiltonian": matrix_json(self.hamiltonian.matrix()),
            "decay_level": self.decay_level,
            "decay_rate": self.decay_rate,
            "pre_state": vector_json(self.pre_state.amplitudes()),
            "observable": matrix_json(self.observable.matrix()),
            "coupling": self.coupling,
            "kick_strength": self.kick_strength,
            "total_time": self.total_time,
            "n_steps": self.n_steps,
            "n_points": self.grid.n_points(),
            "half_width": self.grid.half_width(),
            "sigma_q": self.sigma_q,
        })
    }
}

#[derive(Debug, Clone)]
pub struct DecayOutcome {
    pub record: RunRecord,
    /// Surviving norm of the no-decay branch over time.
    pub trajectory: Trajectory,
    /// Weak value from dense non-Hermitian propagators, averaged over the
    /// coupling schedule in scheduled mode.
    pub oracle_weak_value: C64,
    /// Weak value with respect to the slowest-decaying left eigenvector of
    /// `H_eff`; `None` without decay.
    pub asymptotic_weak_value: Option<C64>,
}

pub fn run_decay_postselected(cfg: &DecayConfig) -> Result<RunRecord> {
    Ok(decay_run(cfg)?.record)
}

/// Weak coupling during non-unitary evolution of the no-decay branch under
/// `H_eff`. The surviving branch is post-selected on the surviving evolved
/// pre-state `Φ_f ∝ U(t)Ψ`.
pub fn decay_run(cfg: &DecayConfig) -> Result<DecayOutcome> {
    cfg.validate()?;
    let start = Instant::now();
    let h_eff = cfg.effective_hamiltonian();
    let dt = cfg.total_time / cfg.n_steps as f64;
    let sample_every = (cfg.n_steps / 200).max(1);
    let mut state = CompositeState::product(&cfg.pre_state, &gaussian_pointer(cfg.grid, cfg.sigma_q)?);

    let (state, trajectory) = match cfg.coupling {
        DecayCoupling::Scheduled => {
            evolve_non_hermitian(&state, &h_eff, &cfg.pre_state, &cfg.observable, &cfg.schedule()?, dt, sample_every)?
        }
        DecayCoupling::Kick => {
            state.apply_kick(&cfg.observable, cfg.kick_strength)?;
            let step = (&h_eff * C64::new(0.0, -dt)).exp();
            let mut trajectory = Trajectory::default();
            let point = |t: f64, s: &CompositeState| TrajectoryPoint {
                time: t,
                fidelity: f64::NAN,
                survival: s.norm_sqr(),
                q_mean: f64::NAN,
                norm: s.norm_sqr().sqrt(),
            };
            trajectory.points.push(point(0.0, &state));
            for n in 1..=cfg.n_steps {
                state.apply_system_matrix(&step)?;
                if n % sample_every == 0 || n == cfg.n_steps {
                    trajectory.points.push(point(n as f64 * dt, &state));
                }
            }
            (state, trajectory)
        }
    };
    let survival = state.norm_sqr();
    if survival < POSTSELECTION_FLOOR {
        return Err(Error::PostSelectionFailed {
            probability: survival,
            threshold: POSTSELECTION_FLOOR,
        });
    }
    let step = (&h_eff * C64::new(0.0, -dt)).exp();
    let mut carried = cfg.pre_state.amplitudes().clone();
    for _ in 0..cfg.n_steps {
        carried = &step * carried;
    }
    let post_final = StateVector::normalized(carried)?;
    let (pointer, prob) = state.project_system(&post_final)?;
    let m = moments(&pointer);
    let readout = m.q_mean / cfg.kick_strength;

    let oracle = decay_oracle_weak_value(cfg)?;
    let asymptotic = if cfg.decay_rate > 0.0 {
        Some(asymptotic_decay_weak_value(cfg)?)
    } else {
        None
    };
    let mut extra = BTreeMap::new();
    extra.insert("decay_probability".to_string(), 1.0 - survival);
    extra.insert("postselection_probability".to_string(), prob);
    extra.insert("weak_value_imag".to_string(), oracle.im);
    if let Some(w) = asymptotic {
        extra.insert("asymptotic_weak_value".to_string(), w.re);
    }
    let record = RunRecord {
        q_mean: m.q_mean,
        q_var: m.q_var,
        p_mean: m.p_mean,
        readout,
        target: oracle.re,
        error: (readout - oracle.re).abs(),
        fidelity: state.system_fidelity(&post_final)?,
        survival,
        wall_time_s: start.elapsed().as_secs_f64(),
        axis_value: None,
        extra,
        config: cfg.echo(),
    };
    Ok(DecayOutcome {
        record,
        trajectory,
        oracle_weak_value: oracle,
        asymptotic_weak_value: asymptotic,
    })
}

/// Intervals of the Simpson rule in the scheduled-mode oracle.
const ORACLE_INTERVALS: usize = 2000;

/// Weak value from dense exponentials `U(t) = exp(-i H_eff t)`, with the
/// post-state `Φ_f ∝ U(T)Ψ`.
///
/// Kick: `⟨Φ_f|U(T) O|Ψ⟩ / ⟨Φ_f|U(T)|Ψ⟩`. Scheduled: the same with `O`
/// replaced by `U(T-t) O U(t)` and averaged with weight `g(t)/ε`
/// (composite Simpson rule).
pub fn decay_oracle_weak_value(cfg: &DecayConfig) -> Result<C64> {
    let h = cfg.effective_hamiltonian();
    let u = |t: f64| (&h * C64::new(0.0, -t)).exp();
    let total = cfg.total_time;
    let psi = cfg.pre_state.amplitudes();
    let u_total = u(total);
    let forward = StateVector::normalized(&u_total * psi)?;
    let phi = forward.amplitudes();
    let den = phi.dotc(&(&u_total * psi));
    let o = cfg.observable.matrix();
    let num = match cfg.coupling {
        DecayCoupling::Kick => phi.dotc(&(&u_total * (o * psi))),
        DecayCoupling::Scheduled => {
            let sch = cfg.schedule()?;
            let h_step = total / ORACLE_INTERVALS as f64;
            let mut acc = C64::default();
            for j in 0..=ORACLE_INTERVALS {
                let t = j as f64 * h_step;
                let weight = if j == 0 || j == ORACLE_INTERVALS {
                    1.0
                } else if j % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                let g = sch.value(t)? / cfg.kick_strength;
                if g != 0.0 {
                    acc += phi.dotc(&(u(total - t) * (o * (u(t) * psi)))) * (weight * g);
                }
            }
            acc * (h_step / 3.0)
        }
    };
    Ok(num / den)
}

/// Weak value with respect to the left eigenvector of `H_eff` whose
/// eigenvalue has the largest imaginary part (slowest decay).
pub fn asymptotic_decay_weak_value(cfg: &DecayConfig) -> Result<C64> {
    let h = cfg.effective_hamiltonian();
    let d = h.nrows();
    let eigenvalues = h
        .clone()
        .schur()
        .eigenvalues()
        .ok_or_else(|| Error::Decomposition("Schur form did not converge".into()))?;
    let slowest = eigenvalues
        .iter()
        .copied()
        .max_by(|a, b| a.im.total_cmp(&b.im))
        .expect("nonempty spectrum");
    // ⟨L| H_eff = λ ⟨L|  ⇔  (H_eff† - λ*) |L⟩ = 0
    let shifted = h.adjoint() - DMatrix::<C64>::identity(d, d) * slowest.conj();
    let svd = shifted.svd(false, true);
    let v_t = svd.v_t.ok_or_else(|| Error::Decomposition("SVD without V".into()))?;
    let (imin, _) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty");
    let left: DVector<C64> = v_t.row(imin).adjoint();
    weak_value(&cfg.pre_state, &StateVector::normalized(left)?, &cfg.observable)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    TotalTime,
    Area,
    SigmaQ,
    NProjections,
    Dt,
    RampFraction,
}

impl SweepAxis {
    pub const ALL: [SweepAxis; 6] = [
        SweepAxis::TotalTime,
        SweepAxis::Area,
        SweepAxis::SigmaQ,
        SweepAxis::NProjections,
        SweepAxis::Dt,
        SweepAxis::RampFraction,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::TotalTime => "total_time",
            SweepAxis::Area => "area",
            SweepAxis::SigmaQ => "sigma_q",
            SweepAxis::NProjections => "n_projections",
            SweepAxis::Dt => "dt",
            SweepAxis::RampFraction => "ramp_fraction",
        }
    }

    /// Copy of `base` with this axis set to `value`. Changing the total time
    /// keeps the number of steps, so `dt` scales with it.
    pub fn apply(self, base: &ProtectiveConfig, value: f64) -> Result<ProtectiveConfig> {
        let mut cfg = base.clone();
        match self {
            SweepAxis::TotalTime => {
                cfg.schedule = cfg.schedule.with_total_time(value)?;
                cfg.dt = base.dt * value / base.schedule.total_time;
            }
            SweepAxis::Area => cfg.schedule = cfg.schedule.with_area(value)?,
            SweepAxis::SigmaQ => cfg.sigma_q = value,
            SweepAxis::NProjections => {
                if !(value >= 1.0 && value.fract() == 0.0) {
                    return Err(invalid("n_projections", format!("must be a positive integer, got {value}")));
                }
                cfg.protection = Protection::Zeno {
                    n_projections: value as usize,
                };
            }
            SweepAxis::Dt => cfg.dt = value,
            SweepAxis::RampFraction => {
                cfg.schedule = Schedule::new(cfg.schedule.kind, cfg.schedule.total_time, cfg.schedule.area, value)?
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SweepAxis::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::UnknownAxis(s.to_string()))
    }
}

/// Independent protective runs, one per axis value, in input order.
pub fn sweep(base: &ProtectiveConfig, axis: SweepAxis, values: &[f64]) -> Result<Vec<RunRecord>> {
    let configs = values
        .iter()
        .map(|&v| axis.apply(base, v))
        .collect::<Result<Vec<_>>>()?;
    configs
        .par_iter()
        .zip(values.par_iter())
        .map(|(cfg, &v)| {
            let mut r = run_protective(cfg)?;
            r.axis_value = Some(v);
            Ok(r)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::SystemSpec;
    use std::f64::consts::PI;

    fn small(protection: Protection) -> ProtectiveConfig {
        let psi = StateVector::qubit(PI / 3.0, 0.0);
        let sys = SystemSpec::rank_one(&psi, 1.0).unwrap();
        let grid = PointerGrid::new(128, 10.0).unwrap();
        let mut cfg = ProtectiveConfig::new(sys, HermitianOperator::sigma_z(), grid, 0.2, 50.0).unwrap();
        cfg.dt = 0.05;
        cfg.protection = protection;
        cfg
    }

    #[test]
    fn eigenstate_readout_is_exact() {
        let psi = StateVector::basis(2, 1).unwrap();
        let sys = SystemSpec::rank_one(&psi, 1.0).unwrap();
        let grid = PointerGrid::new(256, 20.0).unwrap();
        let cfg = ProtectiveConfig::new(sys, HermitianOperator::sigma_z(), grid, 0.25, 50.0).unwrap();
        let r = run_protective(&cfg).unwrap();
        assert!((r.q_mean + 1.0).abs() < 1e-6, "{}", r.q_mean);
        assert!(r.fidelity >= 1.0 - 1e-9);
    }

    #[test]
    fn zero_area_leaves_pointer_at_rest() {
        let mut cfg = small(Protection::Gap);
        cfg.schedule = cfg.schedule.with_area(0.0).unwrap();
        let r = run_protective(&cfg).unwrap();
        assert!(r.q_mean.abs() < 1e-9);
        assert!((r.fidelity - 1.0).abs() < 1e-9);
    }

    #[test]
    fn records_are_deterministic() {
        let cfg = small(Protection::Zeno { n_projections: 10 });
        let mut a = run_protective(&cfg).unwrap();
        let mut b = run_protective(&cfg).unwrap();
        a.wall_time_s = 0.0;
        b.wall_time_s = 0.0;
        assert_eq!(a, b);
        assert!((a.error - (a.readout - a.target).abs()).abs() == 0.0);
    }

    #[test]
    fn ensemble_rejects_zero_runs() {
        assert!(run_weak_ensemble(&small(Protection::None), 0, 1).is_err());
    }

    #[test]
    fn weak_value_reduces_to_expectation() {
        let psi = StateVector::qubit(0.4, 0.2);
        let cfg = WeakValueConfig {
            pre_state: psi.clone(),
            post_state: psi.clone(),
            observable: HermitianOperator::sigma_z(),
            kick_strength: 1e-3,
            grid: PointerGrid::new(256, 20.0).unwrap(),
            sigma_q: 1.0,
        };
        let r = run_weak_value(&cfg).unwrap();
        let e = expectation(&psi, &HermitianOperator::sigma_z()).unwrap();
        assert!((r.target - e).abs() < 1e-12);
        assert!((r.readout - e).abs() < 1e-5);
    }

    #[test]
    fn orthogonal_post_selection_rejected() {
        let cfg = WeakValueConfig {
            pre_state: StateVector::basis(2, 0).unwrap(),
            post_state: StateVector::basis(2, 1).unwrap(),
            observable: HermitianOperator::sigma_z(),
            kick_strength: 1e-2,
            grid: PointerGrid::new(256, 20.0).unwrap(),
            sigma_q: 1.0,
        };
        assert!(run_weak_value(&cfg).is_err());
    }

    #[test]
    fn axis_names_round_trip() {
        for a in SweepAxis::ALL {
            assert_eq!(a.name().parse::<SweepAxis>().unwrap(), a);
        }
        assert!(matches!("gamma".parse::<SweepAxis>(), Err(Error::UnknownAxis(_))));
    }

    #[test]
    fn empty_sweep_is_empty() {
        let out = sweep(&small(Protection::Gap), SweepAxis::TotalTime, &[]).unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn sweep_preserves_order_and_tags_axis() {
        let out = sweep(&small(Protection::Gap), SweepAxis::Area, &[0.5, 0.0, 1.0]).unwrap();
        let axis: Vec<f64> = out.iter().map(|r| r.axis_value.unwrap()).collect();
        assert_eq!(axis, vec![0.5, 0.0, 1.0]);
        assert!((out[0].target + 0.25).abs() < 1e-12);
    }

    #[test]
    fn decay_config_guards() {
        let base = DecayConfig {
            hamiltonian: HermitianOperator::sigma_x().scaled(0.2),
            decay_level: 1,
            decay_rate: 1.0,
            pre_state: StateVector::qubit(PI / 4.0, 0.0),
            observable: HermitianOperator::sigma_z(),
            coupling: DecayCoupling::Scheduled,
            kick_strength: 0.01,
            total_time: 20.0,
            n_steps: 100,
            grid: PointerGrid::new(256, 20.0).unwrap(),
            sigma_q: 1.0,
        };
        assert!(base.validate().is_ok());
        let mut bad = base.clone();
        bad.total_time = 60.0;
        assert!(bad.validate().is_err());
        let mut bad = base;
        bad.decay_level = 2;
        assert!(bad.validate().is_err());
    }
}
