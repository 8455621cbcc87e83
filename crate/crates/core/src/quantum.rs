//! Finite-dimensional states, Hermitian observables and spectral machinery,
//! plus the finite-difference Hamiltonian of a particle in a 1D trap.
//!
//! Units: ħ = 1 throughout, observables are dimensionless.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64 as C64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Normalization tolerance for [`StateVector`].
pub const NORM_TOLERANCE: f64 = 1e-10;
/// Hermiticity tolerance for [`HermitianOperator`] (max-norm of `A - A†`).
pub const HERMITICITY_TOLERANCE: f64 = 1e-12;
/// Minimum spectral gap for a level to count as nondegenerate.
pub const GAP_TOLERANCE: f64 = 1e-10;

/// Normalized pure state of a `d`-level system, `d >= 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amplitudes: DVector<C64>,
}

impl StateVector {
    /// Wraps already-normalized amplitudes.
    pub fn new(amplitudes: DVector<C64>) -> Result<Self> {
        check_dim(amplitudes.len())?;
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::NotNormalized {
                norm,
                tolerance: NORM_TOLERANCE,
            });
        }
        Ok(Self { amplitudes })
    }

    /// Normalizes arbitrary nonzero amplitudes.
    pub fn normalized(amplitudes: DVector<C64>) -> Result<Self> {
        check_dim(amplitudes.len())?;
        let norm = amplitudes.norm();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::ZeroNorm);
        }
        Ok(Self {
            amplitudes: amplitudes.unscale(norm),
        })
    }

    pub fn from_slice(amplitudes: &[C64]) -> Result<Self> {
        Self::normalized(DVector::from_column_slice(amplitudes))
    }

    /// Computational basis state `|index⟩`.
    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        check_dim(dim)?;
        if index >= dim {
            return Err(invalid("index", format!("{index} >= dimension {dim}")));
        }
        let mut v = DVector::zeros(dim);
        v[index] = C64::new(1.0, 0.0);
        Ok(Self { amplitudes: v })
    }

    /// `cos θ |0⟩ + e^{iφ} sin θ |1⟩`.
    pub fn qubit(theta: f64, phi: f64) -> Self {
        Self {
            amplitudes: DVector::from_column_slice(&[
                C64::new(theta.cos(), 0.0),
                C64::from_polar(theta.sin(), phi),
            ]),
        }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> DVector<C64> {
        self.amplitudes
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        check_same(self.dim(), other.dim())?;
        Ok(self.amplitudes.dotc(&other.amplitudes))
    }

    /// Applies a unitary; the result is renormalized to absorb rounding.
    pub fn apply_unitary(&self, unitary: &DMatrix<C64>) -> Result<Self> {
        check_same(self.dim(), unitary.ncols())?;
        Self::normalized(unitary * &self.amplitudes)
    }

    /// Same state with the largest-magnitude amplitude made real positive.
    pub fn phase_fixed(&self) -> Self {
        let mut v = self.amplitudes.clone();
        fix_phase(v.as_mut_slice());
        Self { amplitudes: v }
    }

    /// Projector `|ψ⟩⟨ψ|`.
    pub fn projector(&self) -> HermitianOperator {
        HermitianOperator {
            matrix: &self.amplitudes * self.amplitudes.adjoint(),
        }
    }
}

/// Hermitian matrix representing an observable or Hamiltonian.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    matrix: DMatrix<C64>,
}

impl HermitianOperator {
    pub fn new(matrix: DMatrix<C64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::NotSquare {
                rows: matrix.nrows(),
                cols: matrix.ncols(),
            });
        }
        check_dim(matrix.nrows())?;
        if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(invalid("matrix", "non-finite entry"));
        }
        let deviation = hermiticity_deviation(&matrix);
        if deviation > HERMITICITY_TOLERANCE {
            return Err(Error::NotHermitian {
                deviation,
                tolerance: HERMITICITY_TOLERANCE,
            });
        }
        Ok(Self { matrix })
    }

    /// Takes the Hermitian part `(A + A†)/2`, removing rounding asymmetry.
    pub fn hermitian_part(matrix: &DMatrix<C64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::NotSquare {
                rows: matrix.nrows(),
                cols: matrix.ncols(),
            });
        }
        Self::new((matrix + matrix.adjoint()).scale(0.5))
    }

    pub fn from_real(rows: usize, data_row_major: &[f64]) -> Result<Self> {
        let m = DMatrix::from_row_iterator(
            rows,
            rows,
            data_row_major.iter().map(|&x| C64::new(x, 0.0)),
        );
        Self::new(m)
    }

    pub fn diagonal(values: &[f64]) -> Result<Self> {
        let v = DVector::from_iterator(values.len(), values.iter().map(|&x| C64::new(x, 0.0)));
        Self::new(DMatrix::from_diagonal(&v))
    }

    pub fn identity(dim: usize) -> Result<Self> {
        Self::new(DMatrix::identity(dim, dim))
    }

    pub fn zeros(dim: usize) -> Result<Self> {
        Self::new(DMatrix::zeros(dim, dim))
    }

    pub fn sigma_x() -> Self {
        Self::from_real(2, &[0.0, 1.0, 1.0, 0.0]).expect("valid")
    }

    pub fn sigma_y() -> Self {
        let i = C64::i();
        Self {
            matrix: DMatrix::from_row_slice(2, 2, &[C64::default(), -i, i, C64::default()]),
        }
    }

    pub fn sigma_z() -> Self {
        Self::from_real(2, &[1.0, 0.0, 0.0, -1.0]).expect("valid")
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            matrix: self.matrix.scale(factor),
        }
    }

    pub fn add(&self, other: &HermitianOperator) -> Result<Self> {
        check_same(self.dim(), other.dim())?;
        Ok(Self {
            matrix: &self.matrix + &other.matrix,
        })
    }

    pub fn is_real(&self) -> bool {
        self.matrix.iter().all(|z| z.im == 0.0)
    }

    /// Largest absolute eigenvalue.
    pub fn spectral_radius(&self) -> f64 {
        let spec = spectral_decompose(self);
        spec.eigenvalues
            .iter()
            .fold(0.0_f64, |acc, &x| acc.max(x.abs()))
    }
}

fn hermiticity_deviation(m: &DMatrix<C64>) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0_f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Ascending eigenvalues and the matching orthonormal eigenvectors (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDecomposition {
    pub eigenvalues: DVector<f64>,
    pub eigenvectors: DMatrix<C64>,
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvector(&self, index: usize) -> StateVector {
        StateVector {
            amplitudes: self.eigenvectors.column(index).into_owned(),
        }
    }

    /// `U diag(o) U†`.
    pub fn reconstruct(&self) -> DMatrix<C64> {
        let diag = DVector::from_iterator(
            self.dim(),
            self.eigenvalues.iter().map(|&x| C64::new(x, 0.0)),
        );
        &self.eigenvectors * DMatrix::from_diagonal(&diag) * self.eigenvectors.adjoint()
    }

    /// `U f(o) U†` for a scalar function of the eigenvalues.
    pub fn map_function(&self, f: impl Fn(f64) -> C64) -> DMatrix<C64> {
        let diag = DVector::from_iterator(self.dim(), self.eigenvalues.iter().map(|&x| f(x)));
        &self.eigenvectors * DMatrix::from_diagonal(&diag) * self.eigenvectors.adjoint()
    }

    /// Unitary `exp(-i A τ)`.
    pub fn propagator(&self, tau: f64) -> DMatrix<C64> {
        self.map_function(|e| C64::from_polar(1.0, -e * tau))
    }
}

/// Diagonalizes a Hermitian operator.
///
/// Eigenvalues come out ascending (stable order for ties) and every
/// eigenvector is rotated so that its largest-magnitude component is real
/// and positive, which makes the output reproducible bit for bit.
pub fn spectral_decompose(op: &HermitianOperator) -> SpectralDecomposition {
    let n = op.dim();
    let (values, vectors): (Vec<f64>, DMatrix<C64>) = if op.is_real() {
        // Real symmetric input: the real solver is several times cheaper.
        let real = op.matrix.map(|z| z.re);
        let eig = SymmetricEigen::new(real);
        let vectors = eig.eigenvectors.map(|x| C64::new(x, 0.0));
        (eig.eigenvalues.iter().copied().collect(), vectors)
    } else {
        let eig = SymmetricEigen::new(op.matrix.clone());
        (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
    };

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));

    let eigenvalues = DVector::from_iterator(n, order.iter().map(|&i| values[i]));
    let mut eigenvectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col: Vec<C64> = vectors.column(src).iter().copied().collect();
        fix_phase(&mut col);
        eigenvectors.set_column(dst, &DVector::from_vec(col));
    }
    SpectralDecomposition {
        eigenvalues,
        eigenvectors,
    }
}

/// Rotates a vector so that its first largest-magnitude component is real positive.
pub(crate) fn fix_phase(v: &mut [C64]) {
    let mut best = 0;
    let mut best_mag = -1.0;
    for (i, z) in v.iter().enumerate() {
        let m = z.norm();
        if m > best_mag {
            best_mag = m;
            best = i;
        }
    }
    if best_mag <= 0.0 {
        return;
    }
    let phase = v[best].conj() / best_mag;
    for z in v.iter_mut() {
        *z *= phase;
    }
    v[best] = C64::new(best_mag, 0.0);
}

/// `⟨ψ|O|ψ⟩`; the imaginary residue of the quadratic form is discarded.
pub fn expectation(state: &StateVector, op: &HermitianOperator) -> Result<f64> {
    check_same(state.dim(), op.dim())?;
    let v = state.amplitudes.dotc(&(&op.matrix * &state.amplitudes));
    Ok(v.re)
}

/// Born probabilities `|⟨o_i|ψ⟩|²` in the order of `spec.eigenvalues`.
pub fn born_probabilities(
    state: &StateVector,
    spec: &SpectralDecomposition,
) -> Result<DVector<f64>> {
    check_same(state.dim(), spec.dim())?;
    Ok(DVector::from_iterator(
        spec.dim(),
        spec.eigenvectors
            .column_iter()
            .map(|c| c.dotc(&state.amplitudes).norm_sqr()),
    ))
}

/// `|⟨a|b⟩|²`.
pub fn fidelity(a: &StateVector, b: &StateVector) -> Result<f64> {
    Ok(a.inner(b)?.norm_sqr())
}

/// Hamiltonian together with its protected nondegenerate eigenstate.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    pub hamiltonian: HermitianOperator,
    pub spectrum: SpectralDecomposition,
    pub protected_index: usize,
    pub gap: f64,
}

impl SystemSpec {
    /// Protects eigenstate `index` (ascending order) of `h`.
    pub fn with_protected_level(h: HermitianOperator, index: usize) -> Result<Self> {
        let spectrum = spectral_decompose(&h);
        if index >= spectrum.dim() {
            return Err(invalid(
                "protected_index",
                format!("{index} >= dimension {}", spectrum.dim()),
            ));
        }
        let e = spectrum.eigenvalues[index];
        let gap = spectrum
            .eigenvalues
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != index)
            .map(|(_, &x)| (x - e).abs())
            .fold(f64::INFINITY, f64::min);
        if gap <= GAP_TOLERANCE {
            return Err(Error::NoProtectiveGap {
                gap,
                tolerance: GAP_TOLERANCE,
            });
        }
        Ok(Self {
            hamiltonian: h,
            spectrum,
            protected_index: index,
            gap,
        })
    }

    /// `H = -Δ |ψ⟩⟨ψ|`: `ψ` is the ground state, separated by `Δ` from the rest.
    pub fn rank_one(state: &StateVector, gap: f64) -> Result<Self> {
        if !(gap.is_finite() && gap > GAP_TOLERANCE) {
            return Err(invalid("gap", format!("must be > {GAP_TOLERANCE:e}, got {gap}")));
        }
        let h = HermitianOperator::hermitian_part(&state.projector().matrix.scale(-gap))?;
        ground_system(h)
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.dim()
    }

    pub fn protected_state(&self) -> StateVector {
        self.spectrum.eigenvector(self.protected_index)
    }

    pub fn protected_energy(&self) -> f64 {
        self.spectrum.eigenvalues[self.protected_index]
    }
}

/// Protects the ground state of `h`.
pub fn ground_system(h: HermitianOperator) -> Result<SystemSpec> {
    let spectrum = spectral_decompose(&h);
    let gap = spectrum.eigenvalues[1] - spectrum.eigenvalues[0];
    if gap <= GAP_TOLERANCE {
        return Err(Error::NoProtectiveGap {
            gap,
            tolerance: GAP_TOLERANCE,
        });
    }
    Ok(SystemSpec {
        hamiltonian: h,
        spectrum,
        protected_index: 0,
        gap,
    })
}

/// Uniform 1D grid `x_j = -L + j·dx`, `dx = 2L/(n-1)`, for trap Hamiltonians.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrapGrid {
    pub n_points: usize,
    pub half_width: f64,
}

impl TrapGrid {
    pub fn new(n_points: usize, half_width: f64) -> Result<Self> {
        if n_points < 8 {
            return Err(invalid("n_points", format!("need at least 8 points, got {n_points}")));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(invalid("half_width", format!("must be > 0, got {half_width}")));
        }
        Ok(Self {
            n_points,
            half_width,
        })
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_width / (self.n_points - 1) as f64
    }

    pub fn positions(&self) -> Vec<f64> {
        let dx = self.dx();
        (0..self.n_points)
            .map(|j| -self.half_width + j as f64 * dx)
            .collect()
    }

    pub fn sample(&self, potential: impl Fn(f64) -> f64) -> Vec<f64> {
        self.positions().into_iter().map(potential).collect()
    }
}

/// `H = -(1/2m) D² / dx² + diag(V)` with Dirichlet boundaries.
pub fn build_trap_hamiltonian(potential: &[f64], mass: f64, dx: f64) -> Result<HermitianOperator> {
    let n = potential.len();
    if n < 8 {
        return Err(invalid("potential", format!("need at least 8 grid points, got {n}")));
    }
    if !(mass.is_finite() && mass > 0.0) {
        return Err(invalid("mass", format!("must be > 0, got {mass}")));
    }
    if !(dx.is_finite() && dx > 0.0) {
        return Err(invalid("dx", format!("must be > 0, got {dx}")));
    }
    if let Some(j) = potential.iter().position(|v| !v.is_finite()) {
        return Err(invalid("potential", format!("non-finite entry at index {j}")));
    }
    let kin = 1.0 / (2.0 * mass * dx * dx);
    let mut m = DMatrix::<C64>::zeros(n, n);
    for j in 0..n {
        m[(j, j)] = C64::new(2.0 * kin + potential[j], 0.0);
        if j + 1 < n {
            m[(j, j + 1)] = C64::new(-kin, 0.0);
            m[(j + 1, j)] = C64::new(-kin, 0.0);
        }
    }
    HermitianOperator::new(m)
}

/// Ground energy and real, phase-fixed ground-state amplitudes
/// (normalized so that `Σ ψ_j² = 1`) of a trap Hamiltonian.
pub fn trap_ground_state(potential: &[f64], mass: f64, dx: f64) -> Result<(f64, Vec<f64>)> {
    let system = ground_system(build_trap_hamiltonian(potential, mass, dx)?)?;
    let psi = system.protected_state();
    Ok((
        system.protected_energy(),
        psi.amplitudes().iter().map(|z| z.re).collect(),
    ))
}

/// Haar-random pure state (normalized complex Gaussian vector).
pub fn random_state<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<StateVector> {
    check_dim(dim)?;
    let v = DVector::from_fn(dim, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    StateVector::normalized(v)
}

/// Haar-random unitary from the QR decomposition of a Ginibre matrix.
pub fn random_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<DMatrix<C64>> {
    check_dim(dim)?;
    let z = DMatrix::from_fn(dim, dim, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let qr = z.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..dim {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..dim {
            q[(i, j)] *= phase;
        }
    }
    Ok(q)
}

/// Random eigenbasis with spectrum `{0, Δ, 1.5Δ, 2Δ, ...}`; the ground state
/// is protected with gap `Δ`.
pub fn random_gapped_system<R: Rng + ?Sized>(dim: usize, gap: f64, rng: &mut R) -> Result<SystemSpec> {
    if !(gap.is_finite() && gap > GAP_TOLERANCE) {
        return Err(invalid("gap", format!("must be > {GAP_TOLERANCE:e}, got {gap}")));
    }
    let u = random_unitary(dim, rng)?;
    let energies = DVector::from_fn(dim, |i, _| {
        if i == 0 {
            C64::new(0.0, 0.0)
        } else {
            C64::new(gap * (1.0 + 0.5 * (i - 1) as f64), 0.0)
        }
    });
    let h = &u * DMatrix::from_diagonal(&energies) * u.adjoint();
    ground_system(HermitianOperator::hermitian_part(&h)?)
}

pub(crate) fn check_dim(d: usize) -> Result<()> {
    if d < 2 {
        Err(Error::DimensionTooSmall { found: d, min: 2 })
    } else {
        Ok(())
    }
}

pub(crate) fn check_same(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        Err(Error::DimensionMismatch { expected, found })
    } else {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn pauli_z_spectrum() {
        let spec = spectral_decompose(&HermitianOperator::sigma_z());
        assert_eq!(spec.eigenvalues.as_slice(), &[-1.0, 1.0]);
        // |1⟩ for -1, |0⟩ for +1, both real positive by convention
        assert_eq!(spec.eigenvectors[(1, 0)], c(1.0));
        assert_eq!(spec.eigenvectors[(0, 1)], c(1.0));
    }

    #[test]
    fn identity_spectrum_is_flat() {
        let spec = spectral_decompose(&HermitianOperator::identity(3).unwrap());
        for &e in spec.eigenvalues.iter() {
            assert!((e - 1.0).abs() < 1e-14);
        }
        let gram = spec.eigenvectors.adjoint() * &spec.eigenvectors;
        assert!((gram - DMatrix::<C64>::identity(3, 3)).iter().all(|z| z.norm() < 1e-12));
    }

    #[test]
    fn non_hermitian_rejected() {
        let m = DMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(0.0), c(0.0)]);
        match HermitianOperator::new(m) {
            Err(Error::NotHermitian { tolerance, .. }) => {
                assert_eq!(tolerance, HERMITICITY_TOLERANCE)
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn expectation_examples() {
        let z = HermitianOperator::sigma_z();
        let zero = StateVector::basis(2, 0).unwrap();
        assert_eq!(expectation(&zero, &z).unwrap(), 1.0);

        let psi = StateVector::qubit(PI / 3.0, 0.0);
        let id = HermitianOperator::identity(2).unwrap();
        assert!((expectation(&psi, &id).unwrap() - 1.0).abs() < 1e-15);
        // cos²θ - sin²θ at θ = π/3
        assert!((expectation(&psi, &z).unwrap() + 0.5).abs() < 1e-12);

        let three = StateVector::basis(3, 0).unwrap();
        assert!(matches!(
            expectation(&three, &z),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn born_examples() {
        let z = HermitianOperator::sigma_z();
        let spec = spectral_decompose(&z);
        let zero = StateVector::basis(2, 0).unwrap();
        let p = born_probabilities(&zero, &spec).unwrap();
        // eigenvalues ascending (-1, +1)
        assert!((p[0] - 0.0).abs() < 1e-15 && (p[1] - 1.0).abs() < 1e-15);

        let plus = StateVector::from_slice(&[c(1.0), c(1.0)]).unwrap();
        let p = born_probabilities(&plus, &spec).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-12 && (p[1] - 0.5).abs() < 1e-12);

        let psi = StateVector::qubit(PI / 3.0, 0.0);
        let p = born_probabilities(&psi, &spec).unwrap();
        let mean: f64 = p.iter().zip(spec.eigenvalues.iter()).map(|(a, b)| a * b).sum();
        assert!((mean + 0.5).abs() < 1e-10);
        assert!((p.sum() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn fidelity_examples() {
        let zero = StateVector::basis(2, 0).unwrap();
        let one = StateVector::basis(2, 1).unwrap();
        let plus = StateVector::from_slice(&[c(FRAC_1_SQRT_2), c(FRAC_1_SQRT_2)]).unwrap();
        assert!((fidelity(&plus, &plus).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(fidelity(&zero, &one).unwrap(), 0.0);
        assert!((fidelity(&zero, &plus).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn ground_system_examples() {
        let h = HermitianOperator::sigma_z().scaled(-0.5);
        let sys = ground_system(h).unwrap();
        assert_eq!(sys.protected_index, 0);
        assert!((sys.gap - 1.0).abs() < 1e-14);
        let zero = StateVector::basis(2, 0).unwrap();
        assert_eq!(sys.protected_state(), zero);

        let psi = StateVector::qubit(PI / 3.0, 0.7);
        let sys = SystemSpec::rank_one(&psi, 1.0).unwrap();
        assert!((sys.gap - 1.0).abs() < 1e-12);
        assert!((fidelity(&sys.protected_state(), &psi).unwrap() - 1.0).abs() < 1e-12);

        let degenerate = HermitianOperator::identity(2).unwrap();
        assert!(matches!(
            ground_system(degenerate),
            Err(Error::NoProtectiveGap { .. })
        ));
    }

    #[test]
    fn zero_potential_stencil() {
        let dx = 0.25;
        let m = 2.0;
        let h = build_trap_hamiltonian(&[0.0; 10], m, dx).unwrap();
        let diag = 1.0 / (m * dx * dx);
        let off = -1.0 / (2.0 * m * dx * dx);
        for j in 0..10 {
            assert!((h.matrix()[(j, j)].re - diag).abs() < 1e-12);
            if j + 1 < 10 {
                assert!((h.matrix()[(j, j + 1)].re - off).abs() < 1e-12);
            }
            if j + 2 < 10 {
                assert_eq!(h.matrix()[(j, j + 2)], C64::default());
            }
        }
    }

    #[test]
    fn trap_hamiltonian_rejects_bad_input() {
        assert!(build_trap_hamiltonian(&[0.0; 4], 1.0, 0.1).is_err());
        assert!(build_trap_hamiltonian(&[0.0; 8], 0.0, 0.1).is_err());
        let mut v = vec![0.0; 8];
        v[3] = f64::NAN;
        assert!(build_trap_hamiltonian(&v, 1.0, 0.1).is_err());
    }

    #[test]
    fn harmonic_trap_ground_energy_and_gap() {
        let grid = TrapGrid::new(512, 8.0).unwrap();
        let v = grid.sample(|x| 0.5 * x * x);
        let sys = ground_system(build_trap_hamiltonian(&v, 1.0, grid.dx()).unwrap()).unwrap();
        assert!((sys.protected_energy() - 0.5).abs() < 1e-3);
        assert!((sys.gap - 1.0).abs() < 1e-3);
    }

    #[test]
    fn constant_shift_moves_spectrum() {
        let grid = TrapGrid::new(64, 5.0).unwrap();
        let v = grid.sample(|x| 0.5 * x * x);
        let shifted: Vec<f64> = v.iter().map(|x| x + 3.25).collect();
        let a = spectral_decompose(&build_trap_hamiltonian(&v, 1.0, grid.dx()).unwrap());
        let b = spectral_decompose(&build_trap_hamiltonian(&shifted, 1.0, grid.dx()).unwrap());
        for (x, y) in a.eigenvalues.iter().zip(b.eigenvalues.iter()) {
            assert!((y - x - 3.25).abs() < 1e-9);
        }
    }

    #[test]
    fn decomposition_is_bit_reproducible() {
        let h = HermitianOperator::new(DMatrix::from_row_slice(
            3,
            3,
            &[
                c(1.0),
                C64::new(0.2, 0.3),
                c(0.0),
                C64::new(0.2, -0.3),
                c(-0.5),
                C64::new(0.0, 0.7),
                c(0.0),
                C64::new(0.0, -0.7),
                c(2.0),
            ],
        ))
        .unwrap();
        let a = spectral_decompose(&h);
        let b = spectral_decompose(&h);
        assert_eq!(a, b);
    }
}
