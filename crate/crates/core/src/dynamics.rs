//! Propagation of the joint system ⊗ pointer state under
//! `H(t) = H_S ⊗ I + g(t) O ⊗ P`.
//!
//! The pointer stays in the momentum representation while the state is
//! evolved: there `P` is diagonal, so the coupling is a pure phase once the
//! system is rotated into the eigenbasis of `O`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::pointer::{weighted_moments, Moments, PointerGrid, PointerState, Representation};
use crate::quantum::{
    check_same, spectral_decompose, HermitianOperator, StateVector, SystemSpec,
};
use crate::schedule::Schedule;

/// Largest flattened dimension `d·n` accepted by [`evolve_reference`].
pub const REFERENCE_DIM_LIMIT: usize = 4096;
/// Survival below this ends a Zeno run.
pub const ZENO_SURVIVAL_FLOOR: f64 = 1e-12;

/// Joint amplitudes `ψ(s, x)`, stored row-major: index `s * n + x`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeState {
    system_dim: usize,
    grid: PointerGrid,
    amplitudes: Vec<C64>,
    representation: Representation,
}

impl CompositeState {
    pub fn product(system: &StateVector, pointer: &PointerState) -> Self {
        let n = pointer.grid().n_points();
        let mut amplitudes = Vec::with_capacity(system.dim() * n);
        for a in system.amplitudes().iter() {
            amplitudes.extend(pointer.amplitudes().iter().map(|z| a * z));
        }
        Self {
            system_dim: system.dim(),
            grid: *pointer.grid(),
            amplitudes,
            representation: pointer.representation(),
        }
    }

    pub fn system_dim(&self) -> usize {
        self.system_dim
    }

    pub fn grid(&self) -> &PointerGrid {
        &self.grid
    }

    pub fn representation(&self) -> Representation {
        self.representation
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    fn n(&self) -> usize {
        self.grid.n_points()
    }

    fn measure(&self) -> f64 {
        self.grid.measure(self.representation)
    }

    pub fn to_momentum(&self) -> Self {
        let mut s = self.clone();
        if s.representation == Representation::Position {
            let n = s.n();
            for row in s.amplitudes.chunks_mut(n) {
                self.grid.forward_in_place(row);
            }
            s.representation = Representation::Momentum;
        }
        s
    }

    pub fn to_position(&self) -> Self {
        let mut s = self.clone();
        if s.representation == Representation::Momentum {
            let n = s.n();
            for row in s.amplitudes.chunks_mut(n) {
                self.grid.inverse_in_place(row);
            }
            s.representation = Representation::Position;
        }
        s
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.measure()
    }

    /// `Σ_x |⟨ψ|·⟩(x)|²` divided by the squared norm.
    pub fn system_fidelity(&self, psi: &StateVector) -> Result<f64> {
        check_same(self.system_dim, psi.dim())?;
        let n = self.n();
        let mut overlap = 0.0;
        for x in 0..n {
            let mut c = C64::default();
            for s in 0..self.system_dim {
                c += psi.amplitudes()[s].conj() * self.amplitudes[s * n + x];
            }
            overlap += c.norm_sqr();
        }
        Ok(overlap * self.measure() / self.norm_sqr())
    }

    /// Reduced system density matrix, trace-normalized.
    pub fn reduced_system_density(&self) -> DMatrix<C64> {
        let (d, n) = (self.system_dim, self.n());
        let mut rho = DMatrix::zeros(d, d);
        for a in 0..d {
            for b in a..d {
                let v: C64 = (0..n)
                    .map(|x| self.amplitudes[a * n + x] * self.amplitudes[b * n + x].conj())
                    .sum();
                rho[(a, b)] = v;
                rho[(b, a)] = v.conj();
            }
        }
        let tr: f64 = (0..d).map(|i| rho[(i, i)].re).sum();
        rho.unscale(tr)
    }

    /// Principal eigenvector of the reduced system density matrix.
    pub fn dominant_system_state(&self) -> Result<StateVector> {
        let rho = HermitianOperator::hermitian_part(&self.reduced_system_density())?;
        let spec = spectral_decompose(&rho);
        Ok(spec.eigenvector(spec.dim() - 1))
    }

    /// Pointer moments of the reduced (system-traced) pointer distribution.
    pub fn pointer_moments(&self) -> Moments {
        let pos = self.to_position();
        let mom = self.to_momentum();
        let wq = pos.marginal();
        let wp = mom.marginal();
        let (q_mean, q_var) = weighted_moments(self.grid.positions().into_iter(), &wq);
        let (p_mean, p_var) = weighted_moments(self.grid.momenta().into_iter(), &wp);
        Moments {
            q_mean,
            q_var,
            p_mean,
            p_var,
        }
    }

    /// `Σ_s |ψ(s, x)|²` on the current representation's grid.
    pub fn marginal(&self) -> Vec<f64> {
        let n = self.n();
        let mut w = vec![0.0; n];
        for row in self.amplitudes.chunks(n) {
            for (acc, z) in w.iter_mut().zip(row) {
                *acc += z.norm_sqr();
            }
        }
        w
    }

    /// Position-space pointer density with the system traced out.
    pub fn pointer_position_density(&self) -> Vec<f64> {
        self.to_position().marginal()
    }

    /// Applies a system matrix (not necessarily unitary) to every pointer component.
    pub fn apply_system_matrix(&mut self, m: &DMatrix<C64>) -> Result<()> {
        check_same(self.system_dim, m.ncols())?;
        let (d, n) = (self.system_dim, self.n());
        apply_columnwise(&mut self.amplitudes, d, n, m);
        Ok(())
    }

    /// Impulsive coupling `exp(-i ε O ⊗ P)`.
    pub fn apply_kick(&mut self, obs: &HermitianOperator, strength: f64) -> Result<()> {
        check_same(self.system_dim, obs.dim())?;
        let back = self.representation;
        let mut s = self.to_momentum();
        let spec = spectral_decompose(obs);
        let (d, n) = (self.system_dim, self.n());
        let w = &spec.eigenvectors;
        apply_columnwise(&mut s.amplitudes, d, n, &w.adjoint());
        for i in 0..d {
            let o = spec.eigenvalues[i];
            for k in 0..n {
                s.amplitudes[i * n + k] *= C64::from_polar(1.0, -strength * o * self.grid.momentum(k));
            }
        }
        apply_columnwise(&mut s.amplitudes, d, n, w);
        *self = match back {
            Representation::Position => s.to_position(),
            Representation::Momentum => s,
        };
        Ok(())
    }

    /// Projects the system onto `phi`; returns the normalized conditional
    /// pointer state and the post-selection probability relative to the
    /// current squared norm.
    pub fn project_system(&self, phi: &StateVector) -> Result<(PointerState, f64)> {
        check_same(self.system_dim, phi.dim())?;
        let n = self.n();
        let mut pointer = vec![C64::default(); n];
        for (s, a) in phi.amplitudes().iter().enumerate() {
            let ac = a.conj();
            for (x, z) in pointer.iter_mut().enumerate() {
                *z += ac * self.amplitudes[s * n + x];
            }
        }
        let prob = pointer.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.measure() / self.norm_sqr();
        let state = PointerState::from_amplitudes(self.grid, pointer, self.representation)?;
        Ok((state, prob))
    }

    /// L2 distance `(Σ |a - b|² · measure)^{1/2}` in a common representation.
    pub fn l2_distance(&self, other: &CompositeState) -> Result<f64> {
        check_same(self.system_dim, other.system_dim)?;
        check_same(self.n(), other.n())?;
        let b = match self.representation {
            Representation::Position => other.to_position(),
            Representation::Momentum => other.to_momentum(),
        };
        let s: f64 = self
            .amplitudes
            .iter()
            .zip(&b.amplitudes)
            .map(|(x, y)| (x - y).norm_sqr())
            .sum();
        Ok((s * self.measure()).sqrt())
    }

    pub(crate) fn scale(&mut self, factor: f64) {
        for z in self.amplitudes.iter_mut() {
            *z *= factor;
        }
    }
}

/// `col_x ← m · col_x` for every pointer index `x` of a row-major `d × n` array.
fn apply_columnwise(amps: &mut [C64], d: usize, n: usize, m: &DMatrix<C64>) {
    let mut col = vec![C64::default(); d];
    let mut out = vec![C64::default(); d];
    for x in 0..n {
        for s in 0..d {
            col[s] = amps[s * n + x];
        }
        for r in 0..d {
            let mut acc = C64::default();
            for c in 0..d {
                acc += m[(r, c)] * col[c];
            }
            out[r] = acc;
        }
        for s in 0..d {
            amps[s * n + x] = out[s];
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub time: f64,
    /// Fidelity of the (normalized) system to the reference state.
    pub fidelity: f64,
    /// Accumulated probability of passing every projection so far.
    pub survival: f64,
    pub q_mean: f64,
    pub norm: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub points: Vec<TrajectoryPoint>,
}

impl Trajectory {
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.time)
    }
}

/// Number of steps of size at most `dt` covering `total_time`, rounded up to a
/// multiple of `multiple`.
fn step_count(total_time: f64, dt: f64, multiple: usize) -> usize {
    let raw = ((total_time / dt) - 1e-9).ceil().max(1.0) as usize;
    raw.div_ceil(multiple) * multiple
}

fn check_dt(sch: &Schedule, dt: f64) -> Result<()> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(invalid("dt", format!("must be > 0, got {dt}")));
    }
    if dt > sch.total_time / 100.0 + 1e-15 {
        return Err(invalid(
            "dt",
            format!("{dt} exceeds T/100 = {}", sch.total_time / 100.0),
        ));
    }
    Ok(())
}

/// Strang splitting engine. Internally the system is held in the eigenbasis
/// of `O` and the pointer in momentum space.
struct SplitStep {
    d: usize,
    grid: PointerGrid,
    momenta: Vec<f64>,
    obs_values: Vec<f64>,
    obs_vectors: DMatrix<C64>,
    half_step: Option<DMatrix<C64>>,
    dt: f64,
    n_steps: usize,
}

struct Projection<'a> {
    target: &'a StateVector,
    every: usize,
}

impl SplitStep {
    fn new(
        h_s: &HermitianOperator,
        obs: &HermitianOperator,
        grid: PointerGrid,
        sch: &Schedule,
        dt: f64,
        multiple: usize,
    ) -> Result<Self> {
        check_same(h_s.dim(), obs.dim())?;
        let spec = spectral_decompose(h_s);
        let zero = h_s.matrix().iter().all(|z| *z == C64::default());
        // exp(-i H_S dt/2) from the energy eigenbasis
        Self::with_half_step(obs, grid, sch, dt, multiple, |dt| {
            (!zero).then(|| spec.propagator(0.5 * dt))
        })
    }

    /// Engine whose system half-step `half_step(dt)` (computational basis)
    /// need not be unitary.
    fn with_half_step(
        obs: &HermitianOperator,
        grid: PointerGrid,
        sch: &Schedule,
        dt: f64,
        multiple: usize,
        half_step: impl FnOnce(f64) -> Option<DMatrix<C64>>,
    ) -> Result<Self> {
        check_dt(sch, dt)?;
        let n_steps = step_count(sch.total_time, dt, multiple);
        let dt = sch.total_time / n_steps as f64;
        let obs_spec = spectral_decompose(obs);
        let half_step = half_step(dt).map(|u| obs_spec.eigenvectors.adjoint() * u * &obs_spec.eigenvectors);
        Ok(Self {
            d: obs.dim(),
            grid,
            momenta: grid.momenta(),
            obs_values: obs_spec.eigenvalues.iter().copied().collect(),
            obs_vectors: obs_spec.eigenvectors,
            half_step,
            dt,
            n_steps,
        })
    }

    fn to_obs_basis(&self, v: &StateVector) -> DVector<C64> {
        self.obs_vectors.adjoint() * v.amplitudes()
    }

    fn run(
        &self,
        init: &CompositeState,
        sch: &Schedule,
        sample_every: usize,
        reference: &StateVector,
        projection: Option<Projection<'_>>,
    ) -> Result<(CompositeState, Trajectory, f64)> {
        check_same(self.d, init.system_dim)?;
        check_same(self.grid.n_points(), init.grid.n_points())?;
        let (d, n) = (self.d, self.grid.n_points());
        let sample_every = sample_every.max(1);
        let mut state = init.to_momentum();
        apply_columnwise(&mut state.amplitudes, d, n, &self.obs_vectors.adjoint());

        let reference_o = self.to_obs_basis(reference);
        let target_o = projection.as_ref().map(|p| self.to_obs_basis(p.target));
        let mut survival = 1.0;
        let mut traj = Trajectory::default();
        traj.points.push(self.sample(&state, &reference_o, 0.0, survival));

        for step in 0..self.n_steps {
            if let Some(h) = &self.half_step {
                apply_columnwise(&mut state.amplitudes, d, n, h);
            }
            let t_mid = (step as f64 + 0.5) * self.dt;
            let theta = sch.value_unchecked(t_mid) * self.dt;
            if theta != 0.0 {
                for (i, &o) in self.obs_values.iter().enumerate() {
                    let row = &mut state.amplitudes[i * n..(i + 1) * n];
                    for (z, &p) in row.iter_mut().zip(&self.momenta) {
                        *z *= C64::from_polar(1.0, -theta * o * p);
                    }
                }
            }
            if let Some(h) = &self.half_step {
                apply_columnwise(&mut state.amplitudes, d, n, h);
            }

            let done = step + 1;
            if let (Some(p), Some(target)) = (&projection, &target_o) {
                if done % p.every == 0 {
                    let pass = project_onto(&mut state, target);
                    survival *= pass;
                    if survival < ZENO_SURVIVAL_FLOOR || pass == 0.0 {
                        return Err(Error::ZenoExtinguished { survival });
                    }
                    state.scale(1.0 / pass.sqrt());
                }
            }
            if done % sample_every == 0 || done == self.n_steps {
                let t = if done == self.n_steps {
                    sch.total_time
                } else {
                    done as f64 * self.dt
                };
                traj.points.push(self.sample(&state, &reference_o, t, survival));
            }
        }

        apply_columnwise(&mut state.amplitudes, d, n, &self.obs_vectors);
        Ok((state, traj, survival))
    }

    fn sample(&self, state: &CompositeState, reference_o: &DVector<C64>, t: f64, survival: f64) -> TrajectoryPoint {
        let n = self.grid.n_points();
        let dp = self.grid.dp();
        let norm_sq = state.norm_sqr();
        let mut overlap = 0.0;
        for k in 0..n {
            let c: C64 = (0..self.d)
                .map(|s| reference_o[s].conj() * state.amplitudes[s * n + k])
                .sum();
            overlap += c.norm_sqr();
        }
        let wq = state.to_position().marginal();
        let (q_mean, _) = weighted_moments(self.grid.positions().into_iter(), &wq);
        TrajectoryPoint {
            time: t,
            fidelity: overlap * dp / norm_sq,
            survival,
            q_mean,
            norm: norm_sq.sqrt(),
        }
    }
}

/// Replaces each pointer column by its component along `target`; returns
/// the kept fraction of the squared norm.
fn project_onto(state: &mut CompositeState, target: &DVector<C64>) -> f64 {
    let (d, n) = (state.system_dim, state.n());
    let before = state.norm_sqr();
    for x in 0..n {
        let c: C64 = (0..d).map(|s| target[s].conj() * state.amplitudes[s * n + x]).sum();
        for s in 0..d {
            state.amplitudes[s * n + x] = c * target[s];
        }
    }
    state.norm_sqr() / before
}

/// Second-order Strang evolution under `H_S ⊗ I + g(t) O ⊗ P`.
///
/// The requested `dt` is shrunk so that an integer number of steps covers
/// `[0, T]`. The returned state is in the momentum representation.
pub fn evolve_split_step(
    init: &CompositeState,
    sys: &SystemSpec,
    obs: &HermitianOperator,
    sch: &Schedule,
    dt: f64,
    sample_every: usize,
) -> Result<(CompositeState, Trajectory)> {
    let engine = SplitStep::new(&sys.hamiltonian, obs, init.grid, sch, dt, 1)?;
    let (state, traj, _) = engine.run(init, sch, sample_every, &sys.protected_state(), None)?;
    Ok((state, traj))
}

/// Same as [`evolve_split_step`] with an explicit system Hamiltonian and
/// reference state for the fidelity trace.
pub fn evolve_with_hamiltonian(
    init: &CompositeState,
    h_s: &HermitianOperator,
    reference: &StateVector,
    obs: &HermitianOperator,
    sch: &Schedule,
    dt: f64,
    sample_every: usize,
) -> Result<(CompositeState, Trajectory)> {
    let engine = SplitStep::new(h_s, obs, init.grid, sch, dt, 1)?;
    let (state, traj, _) = engine.run(init, sch, sample_every, reference, None)?;
    Ok((state, traj))
}

/// Strang evolution of the unnormalized no-decay branch under
/// `H_eff ⊗ I + g(t) O ⊗ P` with a non-Hermitian `h_eff`. The trajectory's
/// `norm` column tracks the surviving norm.
pub fn evolve_non_hermitian(
    init: &CompositeState,
    h_eff: &DMatrix<C64>,
    reference: &StateVector,
    obs: &HermitianOperator,
    sch: &Schedule,
    dt: f64,
    sample_every: usize,
) -> Result<(CompositeState, Trajectory)> {
    if h_eff.nrows() != h_eff.ncols() {
        return Err(Error::NotSquare {
            rows: h_eff.nrows(),
            cols: h_eff.ncols(),
        });
    }
    check_same(obs.dim(), h_eff.nrows())?;
    let engine = SplitStep::with_half_step(obs, init.grid, sch, dt, 1, |dt| {
        Some((h_eff * C64::new(0.0, -0.5 * dt)).exp())
    })?;
    let (state, traj, _) = engine.run(init, sch, sample_every, reference, None)?;
    Ok((state, traj))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZenoOutcome {
    /// Conditional state given that every projection succeeded.
    pub state: CompositeState,
    pub survival: f64,
    pub trajectory: Trajectory,
}

/// Split-step evolution interleaved with `n_projections` equally spaced
/// projections onto `protected`, the last one at `t = T`.
#[allow(clippy::too_many_arguments)]
pub fn zeno_evolve(
    init: &CompositeState,
    protected: &StateVector,
    h_s: &HermitianOperator,
    obs: &HermitianOperator,
    sch: &Schedule,
    dt: f64,
    n_projections: usize,
    sample_every: usize,
) -> Result<ZenoOutcome> {
    if n_projections < 1 {
        return Err(invalid("n_projections", "must be >= 1"));
    }
    let engine = SplitStep::new(h_s, obs, init.grid, sch, dt, n_projections)?;
    let every = engine.n_steps / n_projections;
    let (state, trajectory, survival) = engine.run(
        init,
        sch,
        sample_every,
        protected,
        Some(Projection {
            target: protected,
            every,
        }),
    )?;
    Ok(ZenoOutcome {
        state,
        survival,
        trajectory,
    })
}

/// Validation oracle: time-ordered product of exact exponentials of the
/// midpoint Hamiltonian `H(t_mid)·dt_fine`.
///
/// In the pointer momentum basis the full `(d·n) × (d·n)` Hamiltonian is block
/// diagonal with blocks `H_S + g p_k O`, so its exponential is taken block by
/// block with a Padé scaling-and-squaring matrix exponential. No operator
/// splitting is involved.
pub fn evolve_reference(
    init: &CompositeState,
    sys: &SystemSpec,
    obs: &HermitianOperator,
    sch: &Schedule,
    dt_fine: f64,
) -> Result<CompositeState> {
    reference_with_hamiltonian(init, &sys.hamiltonian, obs, sch, dt_fine)
}

pub fn reference_with_hamiltonian(
    init: &CompositeState,
    h_s: &HermitianOperator,
    obs: &HermitianOperator,
    sch: &Schedule,
    dt_fine: f64,
) -> Result<CompositeState> {
    let (d, n) = (init.system_dim, init.n());
    check_same(d, h_s.dim())?;
    check_same(d, obs.dim())?;
    if d * n > REFERENCE_DIM_LIMIT {
        return Err(Error::ReferenceTooLarge {
            dim: d * n,
            limit: REFERENCE_DIM_LIMIT,
        });
    }
    if !(dt_fine.is_finite() && dt_fine > 0.0) {
        return Err(invalid("dt_fine", format!("must be > 0, got {dt_fine}")));
    }
    let n_steps = step_count(sch.total_time, dt_fine, 1);
    let dt = sch.total_time / n_steps as f64;
    let g_mid: Vec<f64> = (0..n_steps)
        .map(|s| sch.value_unchecked((s as f64 + 0.5) * dt))
        .collect();

    let mut state = init.to_momentum();
    let minus_i_dt = C64::new(0.0, -dt);
    let hs = h_s.matrix() * minus_i_dt;
    let o = obs.matrix() * minus_i_dt;
    let mut block = DVector::<C64>::zeros(d);
    for k in 0..n {
        let p = init.grid.momentum(k);
        for s in 0..d {
            block[s] = state.amplitudes[s * n + k];
        }
        for &g in &g_mid {
            let u = (&hs + &o * C64::new(g * p, 0.0)).exp();
            block = u * block;
        }
        for s in 0..d {
            state.amplitudes[s * n + k] = block[s];
        }
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pointer::{gaussian_pointer, moments};
    use std::f64::consts::PI;

    fn setup(n: usize, l: f64, sigma: f64, psi: &StateVector) -> CompositeState {
        let grid = PointerGrid::new(n, l).unwrap();
        CompositeState::product(psi, &gaussian_pointer(grid, sigma).unwrap())
    }

    #[test]
    fn decoupled_evolution_is_free() {
        let psi = StateVector::qubit(0.4, 0.3);
        let init = setup(64, 10.0, 1.5, &psi);
        let h = HermitianOperator::from_real(2, &[0.3, 0.5, 0.5, -0.2]).unwrap();
        let sys = SystemSpec::with_protected_level(h.clone(), 0).unwrap();
        let sch = Schedule::sine_squared(5.0, 0.0).unwrap();
        let (fin, _) = evolve_split_step(&init, &sys, &HermitianOperator::sigma_z(), &sch, 0.01, 100).unwrap();
        let expected_sys = psi.apply_unitary(&spectral_decompose(&h).propagator(5.0)).unwrap();
        let expected = CompositeState::product(&expected_sys, &gaussian_pointer(*init.grid(), 1.5).unwrap());
        assert!(fin.l2_distance(&expected).unwrap() < 1e-12);
    }

    #[test]
    fn identity_observable_translates_by_area() {
        let psi = StateVector::qubit(PI / 3.0, 0.0);
        let init = setup(256, 20.0, 1.0, &psi);
        let sys = SystemSpec::rank_one(&psi, 1.0).unwrap();
        let sch = Schedule::sine_squared(20.0, 1.0).unwrap();
        let id = HermitianOperator::identity(2).unwrap();
        let (fin, _) = evolve_split_step(&init, &sys, &id, &sch, 0.01, 10).unwrap();
        assert!((fin.pointer_moments().q_mean - 1.0).abs() < 1e-9);
        assert!((fin.norm_sqr() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn commuting_case_split_matches_reference() {
        // [H_S, O] = 0: Strang splitting is exact.
        let psi = StateVector::qubit(0.3, 0.0);
        let init = setup(64, 8.0, 1.0, &psi);
        let h = HermitianOperator::diagonal(&[-0.5, 0.7]).unwrap();
        let sys = SystemSpec::with_protected_level(h, 0).unwrap();
        let sch = Schedule::sine_squared(4.0, 1.0).unwrap();
        let obs = HermitianOperator::sigma_z();
        let (split, _) = evolve_split_step(&init, &sys, &obs, &sch, 0.04, 10).unwrap();
        let reference = evolve_reference(&init, &sys, &obs, &sch, 0.04).unwrap();
        assert!(split.l2_distance(&reference).unwrap() < 1e-10);
    }

    #[test]
    fn reference_guard() {
        let psi = StateVector::qubit(0.3, 0.0);
        let init = setup(4096, 200.0, 4.0, &psi);
        let sys = SystemSpec::rank_one(&psi, 1.0).unwrap();
        let sch = Schedule::sine_squared(1.0, 1.0).unwrap();
        let r = evolve_reference(&init, &sys, &HermitianOperator::sigma_z(), &sch, 0.1);
        assert!(matches!(r, Err(Error::ReferenceTooLarge { dim: 8192, .. })));
    }

    #[test]
    fn dt_guard() {
        let psi = StateVector::qubit(0.3, 0.0);
        let init = setup(64, 8.0, 1.0, &psi);
        let sys = SystemSpec::rank_one(&psi, 1.0).unwrap();
        let sch = Schedule::sine_squared(1.0, 1.0).unwrap();
        assert!(evolve_split_step(&init, &sys, &HermitianOperator::sigma_z(), &sch, 0.02, 1).is_err());
    }

    #[test]
    fn trajectory_is_ordered_and_finite() {
        let psi = StateVector::qubit(PI / 3.0, 0.0);
        let init = setup(128, 10.0, 0.7, &psi);
        let sys = SystemSpec::rank_one(&psi, 1.0).unwrap();
        let sch = Schedule::sine_squared(10.0, 1.0).unwrap();
        let (_, traj) = evolve_split_step(&init, &sys, &HermitianOperator::sigma_z(), &sch, 0.01, 7).unwrap();
        assert!(traj.points.windows(2).all(|w| w[1].time > w[0].time));
        assert_eq!(traj.points.last().unwrap().time, 10.0);
        for p in &traj.points {
            assert!(p.fidelity.is_finite() && p.q_mean.is_finite() && p.norm.is_finite());
        }
    }

    #[test]
    fn zeno_eigenstate_survives_exactly() {
        let psi = StateVector::basis(2, 1).unwrap();
        let init = setup(128, 10.0, 0.7, &psi);
        let zero = HermitianOperator::zeros(2).unwrap();
        let sch = Schedule::sine_squared(10.0, 1.0).unwrap();
        let out = zeno_evolve(&init, &psi, &zero, &HermitianOperator::sigma_z(), &sch, 0.01, 20, 50).unwrap();
        assert!((out.survival - 1.0).abs() < 1e-12);
        assert!((out.state.pointer_moments().q_mean + 1.0).abs() < 1e-9);
    }

    #[test]
    fn zeno_single_projection_negative_control() {
        let psi = StateVector::qubit(PI / 3.0, 0.0);
        let init = setup(256, 10.0, 0.4, &psi);
        let zero = HermitianOperator::zeros(2).unwrap();
        let sch = Schedule::sine_squared(10.0, 1.0).unwrap();
        let out = zeno_evolve(&init, &psi, &zero, &HermitianOperator::sigma_z(), &sch, 0.01, 1, 100).unwrap();
        assert!(out.survival < 0.9);
        let q = out.state.pointer_moments().q_mean;
        assert!((q + 0.5).abs() > 0.05, "conditional q_mean {q}");
        assert!(zeno_evolve(&init, &psi, &zero, &HermitianOperator::sigma_z(), &sch, 0.01, 0, 100).is_err());
    }

    #[test]
    fn kick_and_projection() {
        let psi = StateVector::qubit(PI / 3.0, 0.0);
        let mut st = setup(256, 20.0, 1.0, &psi);
        st.apply_kick(&HermitianOperator::sigma_z(), 0.5).unwrap();
        assert!((st.pointer_moments().q_mean + 0.25).abs() < 1e-9);
        let (ptr, prob) = st.project_system(&StateVector::basis(2, 0).unwrap()).unwrap();
        assert!((prob - 0.25).abs() < 1e-12);
        assert!((moments(&ptr).q_mean - 0.5).abs() < 1e-9);
    }
}
