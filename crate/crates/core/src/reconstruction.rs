//! Wave-function tomography from sequential protective measurements on one
//! system, and inversion of a trap ground state into its potential.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::protocols::{protective_run_from, ProtectiveConfig, RunRecord};
use crate::quantum::{
    check_dim, check_same, expectation, fidelity, fix_phase, spectral_decompose, HermitianOperator, StateVector,
};

/// Tomography is abandoned once the carried state's fidelity to the
/// protected state drops below this.
pub const PROTECTION_FAILURE_FIDELITY: f64 = 0.5;
/// Relative amplitude threshold for the potential mask.
pub const DEFAULT_MASK_THRESHOLD: f64 = 1e-3;
/// Minimum number of masked-in points for a potential estimate.
pub const MIN_SUPPORT: usize = 8;

/// Which element of the basis an operator is.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisLabel {
    Projector(usize),
    X(usize, usize),
    Y(usize, usize),
}

impl BasisLabel {
    pub fn name(self) -> String {
        match self {
            BasisLabel::Projector(n) => format!("P{n}"),
            BasisLabel::X(n, m) => format!("X{n}{m}"),
            BasisLabel::Y(n, m) => format!("Y{n}{m}"),
        }
    }
}

/// `d²` Hermitian operators: all `|n⟩⟨n|`, then `X_nm = |n⟩⟨m| + |m⟩⟨n|`,
/// then `Y_nm = i(|m⟩⟨n| - |n⟩⟨m|)`, pairs `n < m` in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianBasis {
    dim: usize,
    labels: Vec<BasisLabel>,
    operators: Vec<HermitianOperator>,
}

impl HermitianBasis {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.operators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operators.is_empty()
    }

    pub fn operators(&self) -> &[HermitianOperator] {
        &self.operators
    }

    pub fn labels(&self) -> &[BasisLabel] {
        &self.labels
    }

    /// Exact expectation values of every element in `state`.
    pub fn expectations(&self, state: &StateVector) -> Result<Vec<f64>> {
        self.operators.iter().map(|o| expectation(state, o)).collect()
    }
}

pub fn hermitian_basis(d: usize) -> Result<HermitianBasis> {
    check_dim(d)?;
    let one = C64::new(1.0, 0.0);
    let i = C64::i();
    let pairs: Vec<(usize, usize)> = (0..d).flat_map(|n| (n + 1..d).map(move |m| (n, m))).collect();
    let mut labels = Vec::with_capacity(d * d);
    let mut operators = Vec::with_capacity(d * d);
    let mut push = |label, fill: &dyn Fn(&mut DMatrix<C64>)| -> Result<()> {
        let mut m = DMatrix::zeros(d, d);
        fill(&mut m);
        labels.push(label);
        operators.push(HermitianOperator::new(m)?);
        Ok(())
    };
    for n in 0..d {
        push(BasisLabel::Projector(n), &|m| m[(n, n)] = one)?;
    }
    for &(n, m) in &pairs {
        push(BasisLabel::X(n, m), &|a| {
            a[(n, m)] = one;
            a[(m, n)] = one;
        })?;
    }
    for &(n, m) in &pairs {
        push(BasisLabel::Y(n, m), &|a| {
            a[(m, n)] = i;
            a[(n, m)] = -i;
        })?;
    }
    Ok(HermitianBasis { dim: d, labels, operators })
}

/// Density matrix assembled from basis expectations (unit trace, Hermitian,
/// not yet positive).
pub fn assemble_density(expectations: &[f64], basis: &HermitianBasis) -> Result<DMatrix<C64>> {
    let d = basis.dim();
    check_same(d * d, expectations.len())?;
    if expectations.iter().any(|x| !x.is_finite()) {
        return Err(crate::error::invalid("expectations", "non-finite value"));
    }
    if expectations.iter().all(|&x| x == 0.0) {
        return Err(Error::UninformativeData);
    }
    let mut rho = DMatrix::<C64>::zeros(d, d);
    for (label, &value) in basis.labels().iter().zip(expectations) {
        match *label {
            BasisLabel::Projector(n) => rho[(n, n)] = C64::new(value, 0.0),
            // ⟨X_nm⟩ = 2 Re ρ_nm, ⟨Y_nm⟩ = -2 Im ρ_nm with ρ_nm = ⟨n|ρ|m⟩
            BasisLabel::X(n, m) => rho[(n, m)].re = value / 2.0,
            BasisLabel::Y(n, m) => rho[(n, m)].im = -value / 2.0,
        }
    }
    for n in 0..d {
        for m in n + 1..d {
            rho[(m, n)] = rho[(n, m)].conj();
        }
    }
    let trace: f64 = (0..d).map(|n| rho[(n, n)].re).sum();
    if trace.is_nan() || trace <= 1e-12 {
        return Err(Error::UninformativeData);
    }
    Ok(rho.unscale(trace))
}

/// Closest unit-trace positive semidefinite matrix obtained by clipping
/// negative eigenvalues.
pub fn project_psd(rho: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    let spec = spectral_decompose(&HermitianOperator::hermitian_part(rho)?);
    let clipped: Vec<f64> = spec.eigenvalues.iter().map(|&x| x.max(0.0)).collect();
    let total: f64 = clipped.iter().sum();
    if total.is_nan() || total <= 0.0 {
        return Err(Error::UninformativeData);
    }
    let u = &spec.eigenvectors;
    let diag = DVector::from_iterator(clipped.len(), clipped.iter().map(|&x| C64::new(x / total, 0.0)));
    Ok(u * DMatrix::from_diagonal(&diag) * u.adjoint())
}

/// Principal eigenvector of a density matrix, phase-fixed.
pub fn principal_state(rho: &DMatrix<C64>) -> Result<StateVector> {
    let spec = spectral_decompose(&HermitianOperator::hermitian_part(rho)?);
    let mut v: Vec<C64> = spec.eigenvector(spec.dim() - 1).into_amplitudes().iter().copied().collect();
    fix_phase(&mut v);
    StateVector::from_slice(&v)
}

pub fn reconstruct_density(expectations: &[f64], basis: &HermitianBasis) -> Result<DMatrix<C64>> {
    project_psd(&assemble_density(expectations, basis)?)
}

pub fn reconstruct_state(expectations: &[f64], basis: &HermitianBasis) -> Result<StateVector> {
    principal_state(&reconstruct_density(expectations, basis)?)
}

#[derive(Debug, Clone)]
pub struct TomographyReport {
    pub reconstructed: StateVector,
    /// Fidelity of the reconstruction to the protected state.
    pub fidelity: f64,
    pub records: Vec<RunRecord>,
    /// Measured expectation values (`q_mean / area`), in basis order.
    pub measured: Vec<f64>,
    pub labels: Vec<String>,
    /// `1 -` fidelity of the carried system state after the last run.
    pub cumulative_disturbance: f64,
    pub density: DMatrix<C64>,
}

/// Protective measurement of every basis element in turn on one system. The
/// post-measurement system state of each run (principal eigenvector of the
/// reduced density) is the initial state of the next.
pub fn tomography_via_protective(base: &ProtectiveConfig) -> Result<TomographyReport> {
    let area = base.schedule.area;
    if area.is_nan() || area <= 0.0 {
        return Err(crate::error::invalid("area", "must be > 0 for tomography"));
    }
    let basis = hermitian_basis(base.system.dim())?;
    let truth = base.system.protected_state();
    let mut carried = truth.clone();
    let mut records = Vec::with_capacity(basis.len());
    let mut measured = Vec::with_capacity(basis.len());
    for op in basis.operators() {
        let mut cfg = base.clone();
        cfg.observable = op.clone();
        let outcome = protective_run_from(&cfg, &carried)?;
        carried = outcome.state.dominant_system_state()?;
        let f = fidelity(&carried, &truth)?;
        if f < PROTECTION_FAILURE_FIDELITY {
            return Err(Error::ProtectionFailure {
                fidelity: f,
                threshold: PROTECTION_FAILURE_FIDELITY,
            });
        }
        measured.push(outcome.record.q_mean / area);
        records.push(outcome.record);
    }
    let density = reconstruct_density(&measured, &basis)?;
    let reconstructed = principal_state(&density)?;
    Ok(TomographyReport {
        fidelity: fidelity(&reconstructed, &truth)?,
        cumulative_disturbance: 1.0 - fidelity(&carried, &truth)?,
        labels: basis.labels().iter().map(|l| l.name()).collect(),
        reconstructed,
        records,
        measured,
        density,
    })
}

/// Potential recovered up to an additive constant.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialEstimate {
    /// `V_j - E` where `mask[j]`, zero elsewhere.
    pub values: Vec<f64>,
    pub mask: Vec<bool>,
}

impl PotentialEstimate {
    pub fn support(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    /// Values with the masked mean subtracted; unmasked entries stay zero.
    pub fn aligned(&self) -> Vec<f64> {
        let mean = masked_mean(&self.values, &self.mask);
        self.values
            .iter()
            .zip(&self.mask)
            .map(|(&v, &m)| if m { v - mean } else { 0.0 })
            .collect()
    }

    /// Full-grid potential: unmasked entries take the nearest masked value.
    pub fn filled(&self) -> Vec<f64> {
        let idx: Vec<usize> = (0..self.values.len()).filter(|&j| self.mask[j]).collect();
        (0..self.values.len())
            .map(|j| {
                let k = idx.partition_point(|&i| i < j);
                let nearest = match (k.checked_sub(1).map(|p| idx[p]), idx.get(k)) {
                    (Some(a), Some(&b)) => {
                        if j - a <= b - j {
                            a
                        } else {
                            b
                        }
                    }
                    (Some(a), None) => a,
                    (None, Some(&b)) => b,
                    (None, None) => unreachable!("support checked at construction"),
                };
                self.values[nearest]
            })
            .collect()
    }
}

fn masked_mean(values: &[f64], mask: &[bool]) -> f64 {
    let (sum, count) = values
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .fold((0.0, 0usize), |(s, c), (&v, _)| (s + v, c + 1));
    sum / count as f64
}

/// RMS difference over `mask` after removing the masked mean of each.
pub fn aligned_rms_error(estimate: &[f64], truth: &[f64], mask: &[bool]) -> f64 {
    let (me, mt) = (masked_mean(estimate, mask), masked_mean(truth, mask));
    let (sum, count) = estimate
        .iter()
        .zip(truth)
        .zip(mask)
        .filter(|(_, &m)| m)
        .fold((0.0, 0usize), |(s, c), ((&e, &t), _)| (s + ((e - me) - (t - mt)).powi(2), c + 1));
    (sum / count as f64).sqrt()
}

pub fn recover_potential(psi: &[f64], mass: f64, dx: f64) -> Result<PotentialEstimate> {
    recover_potential_with_threshold(psi, mass, dx, DEFAULT_MASK_THRESHOLD)
}

/// `V_j - E = ψ''_j / (2m ψ_j)` with the three-point second difference, at
/// interior points where `|ψ_j| > threshold · max|ψ|`.
pub fn recover_potential_with_threshold(psi: &[f64], mass: f64, dx: f64, threshold: f64) -> Result<PotentialEstimate> {
    use crate::error::invalid;
    if !(mass.is_finite() && mass > 0.0) {
        return Err(invalid("mass", format!("must be > 0, got {mass}")));
    }
    if !(dx.is_finite() && dx > 0.0) {
        return Err(invalid("dx", format!("must be > 0, got {dx}")));
    }
    if !(threshold.is_finite() && threshold > 0.0 && threshold < 1.0) {
        return Err(invalid("threshold", format!("must lie in (0, 1), got {threshold}")));
    }
    if psi.iter().any(|x| !x.is_finite()) {
        return Err(invalid("psi", "non-finite amplitude"));
    }
    let n = psi.len();
    let peak = psi.iter().fold(0.0_f64, |a, &x| a.max(x.abs()));
    let cut = threshold * peak;
    let mut values = vec![0.0; n];
    let mut mask = vec![false; n];
    for j in 1..n.saturating_sub(1) {
        if psi[j].abs() > cut {
            let curvature = psi[j - 1] - 2.0 * psi[j] + psi[j + 1];
            values[j] = curvature / (2.0 * mass * dx * dx * psi[j]);
            mask[j] = true;
        }
    }
    let count = mask.iter().filter(|&&m| m).count();
    if count < MIN_SUPPORT {
        return Err(Error::InsufficientSupport { count, min: MIN_SUPPORT });
    }
    Ok(PotentialEstimate { values, mask })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::{trap_ground_state, TrapGrid};
    use std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn qubit_basis_is_pauli() {
        let b = hermitian_basis(2).unwrap();
        assert_eq!(b.len(), 4);
        assert_eq!(b.operators()[2], HermitianOperator::sigma_x());
        assert_eq!(b.operators()[3], HermitianOperator::sigma_y());
        let names: Vec<String> = b.labels().iter().map(|l| l.name()).collect();
        assert_eq!(names, ["P0", "P1", "X01", "Y01"]);
    }

    #[test]
    fn basis_counts_and_orthogonality() {
        for d in 2..6 {
            let b = hermitian_basis(d).unwrap();
            assert_eq!(b.len(), d * d);
            let ops = b.operators();
            for i in d..ops.len() {
                for j in d..ops.len() {
                    let tr = (ops[i].matrix() * ops[j].matrix()).trace();
                    let expected = if i == j { 2.0 } else { 0.0 };
                    assert!((tr - C64::new(expected, 0.0)).norm() < 1e-12);
                }
            }
        }
        assert!(hermitian_basis(1).is_err());
    }

    #[test]
    fn plus_state_round_trip() {
        let plus = StateVector::qubit(std::f64::consts::FRAC_PI_4, 0.0);
        let b = hermitian_basis(2).unwrap();
        let e = b.expectations(&plus).unwrap();
        assert!((e[0] - 0.5).abs() < 1e-15 && (e[2] - 1.0).abs() < 1e-15);
        let r = reconstruct_state(&e, &b).unwrap();
        assert!((fidelity(&r, &plus).unwrap() - 1.0).abs() < 1e-12);
        assert!((r.amplitudes()[0].re - FRAC_1_SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn y_sign_matches_complex_phase() {
        // (|0⟩ + i|1⟩)/√2 has ⟨σ_y⟩ = +1
        let s = StateVector::qubit(std::f64::consts::FRAC_PI_4, std::f64::consts::FRAC_PI_2);
        let b = hermitian_basis(2).unwrap();
        let e = b.expectations(&s).unwrap();
        assert!((e[3] - 1.0).abs() < 1e-12);
        let r = reconstruct_state(&e, &b).unwrap();
        assert!((fidelity(&r, &s).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_data_is_uninformative() {
        let b = hermitian_basis(3).unwrap();
        assert_eq!(reconstruct_state(&[0.0; 9], &b), Err(Error::UninformativeData));
        assert!(matches!(reconstruct_state(&[0.0; 4], &b), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn flat_box_gives_constant_potential() {
        let grid = TrapGrid::new(200, 5.0).unwrap();
        let v = vec![0.0; 200];
        let (_, psi) = trap_ground_state(&v, 1.0, grid.dx()).unwrap();
        let est = recover_potential(&psi, 1.0, grid.dx()).unwrap();
        let aligned = est.aligned();
        assert!(aligned.iter().all(|x| x.abs() < 1e-6));
    }

    #[test]
    fn sparse_support_rejected() {
        let mut psi = vec![0.0; 64];
        psi[30] = 1.0;
        psi[31] = 0.5;
        assert!(matches!(
            recover_potential(&psi, 1.0, 0.1),
            Err(Error::InsufficientSupport { count: 2, .. })
        ));
    }

    #[test]
    fn fill_holds_nearest_value() {
        let est = PotentialEstimate {
            values: vec![0.0, 1.0, 2.0, 0.0, 0.0, 5.0, 0.0],
            mask: vec![false, true, true, false, false, true, false],
        };
        assert_eq!(est.filled(), vec![1.0, 1.0, 2.0, 2.0, 5.0, 5.0, 5.0]);
    }
}
