//! Discretized measuring-device pointer.
//!
//! The pointer coordinate `Q` lives on a periodic grid of `n` points over
//! `[-L, L)`; its conjugate momentum `P` lives on the matching FFT grid.
//! Amplitudes are normalized as wavefunction samples:
//! `Σ_j |φ_j|² dq = 1` in position, `Σ_k |φ̃_k|² dp = 1` in momentum.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64 as C64;
use rand::Rng;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub const MIN_POINTS: usize = 64;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// In-place unnormalized forward DFT, `X_k = Σ_j x_j e^{-2πi jk/n}`.
pub(crate) fn fft_forward(buf: &mut [C64]) {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(buf.len()).process(buf));
}

/// In-place unnormalized inverse DFT, `x_j = Σ_k X_k e^{+2πi jk/n}`.
pub(crate) fn fft_inverse(buf: &mut [C64]) {
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(buf.len()).process(buf));
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Representation {
    Position,
    Momentum,
}

impl Representation {
    pub fn name(self) -> &'static str {
        match self {
            Representation::Position => "position",
            Representation::Momentum => "momentum",
        }
    }
}

impl fmt::Display for Representation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointerGrid {
    n_points: usize,
    half_width: f64,
}

impl PointerGrid {
    pub fn new(n_points: usize, half_width: f64) -> Result<Self> {
        if n_points < MIN_POINTS || !n_points.is_power_of_two() {
            return Err(invalid(
                "n_points",
                format!("must be a power of two >= {MIN_POINTS}, got {n_points}"),
            ));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(invalid("half_width", format!("must be > 0, got {half_width}")));
        }
        Ok(Self {
            n_points,
            half_width,
        })
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn dq(&self) -> f64 {
        2.0 * self.half_width / self.n_points as f64
    }

    pub fn dp(&self) -> f64 {
        2.0 * PI / (self.n_points as f64 * self.dq())
    }

    pub fn position(&self, j: usize) -> f64 {
        -self.half_width + j as f64 * self.dq()
    }

    /// Momentum of FFT bin `k`, negative for `k >= n/2`.
    pub fn momentum(&self, k: usize) -> f64 {
        let n = self.n_points as i64;
        let k = k as i64;
        let signed = if k < n / 2 { k } else { k - n };
        signed as f64 * self.dp()
    }

    pub fn positions(&self) -> Vec<f64> {
        (0..self.n_points).map(|j| self.position(j)).collect()
    }

    pub fn momenta(&self) -> Vec<f64> {
        (0..self.n_points).map(|k| self.momentum(k)).collect()
    }

    pub fn measure(&self, rep: Representation) -> f64 {
        match rep {
            Representation::Position => self.dq(),
            Representation::Momentum => self.dp(),
        }
    }

    /// Position amplitudes → momentum amplitudes, in place.
    ///
    /// `φ̃_k = (dq/√2π) Σ_j φ_j e^{-i p_k q_j}`; with `q_0 = -L` the grid
    /// offset contributes the factor `(-1)^k`.
    pub(crate) fn forward_in_place(&self, buf: &mut [C64]) {
        fft_forward(buf);
        let scale = self.dq() / (2.0 * PI).sqrt();
        for (k, z) in buf.iter_mut().enumerate() {
            *z *= if k % 2 == 0 { scale } else { -scale };
        }
    }

    /// Momentum amplitudes → position amplitudes, in place.
    pub(crate) fn inverse_in_place(&self, buf: &mut [C64]) {
        let scale = self.dp() / (2.0 * PI).sqrt();
        for (k, z) in buf.iter_mut().enumerate() {
            *z *= if k % 2 == 0 { scale } else { -scale };
        }
        fft_inverse(buf);
    }
}

/// Pointer wavefunction in either representation.
#[derive(Debug, Clone, PartialEq)]
pub struct PointerState {
    grid: PointerGrid,
    amplitudes: Vec<C64>,
    representation: Representation,
}

impl PointerState {
    /// Normalizes arbitrary nonzero samples.
    pub fn from_amplitudes(
        grid: PointerGrid,
        mut amplitudes: Vec<C64>,
        representation: Representation,
    ) -> Result<Self> {
        if amplitudes.len() != grid.n_points() {
            return Err(Error::DimensionMismatch {
                expected: grid.n_points(),
                found: amplitudes.len(),
            });
        }
        let w = grid.measure(representation);
        let norm = (amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>() * w).sqrt();
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::ZeroNorm);
        }
        for z in amplitudes.iter_mut() {
            *z /= norm;
        }
        Ok(Self {
            grid,
            amplitudes,
            representation,
        })
    }

    pub fn grid(&self) -> &PointerGrid {
        &self.grid
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amplitudes
    }

    pub fn representation(&self) -> Representation {
        self.representation
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|z| z.norm_sqr()).sum::<f64>()
            * self.grid.measure(self.representation)
    }

    /// Multiplies position amplitudes by `e^{i k q}` (momentum boost by `k`).
    pub fn boosted(&self, k: f64) -> Result<Self> {
        let mut s = self.require(Representation::Position)?.clone();
        for (j, z) in s.amplitudes.iter_mut().enumerate() {
            *z *= C64::from_polar(1.0, k * self.grid.position(j));
        }
        Ok(s)
    }

    /// Translation `φ(q) → φ(q - a)` applied as `e^{-i a p}` in momentum space.
    pub fn translated(&self, a: f64) -> Self {
        let mut s = match self.representation {
            Representation::Position => to_momentum(self).expect("position state"),
            Representation::Momentum => self.clone(),
        };
        for (k, z) in s.amplitudes.iter_mut().enumerate() {
            *z *= C64::from_polar(1.0, -a * self.grid.momentum(k));
        }
        match self.representation {
            Representation::Position => to_position(&s).expect("momentum state"),
            Representation::Momentum => s,
        }
    }

    fn require(&self, rep: Representation) -> Result<&Self> {
        if self.representation != rep {
            return Err(Error::WrongRepresentation {
                expected: rep.name(),
                found: self.representation.name(),
            });
        }
        Ok(self)
    }

    fn in_position(&self) -> PointerState {
        match self.representation {
            Representation::Position => self.clone(),
            Representation::Momentum => to_position(self).expect("momentum state"),
        }
    }

    fn in_momentum(&self) -> PointerState {
        match self.representation {
            Representation::Momentum => self.clone(),
            Representation::Position => to_momentum(self).expect("position state"),
        }
    }
}

/// Smallest admissible `σ_Q`: the conjugate width `σ_P = 1/(2σ_Q)` must fit
/// four times inside the momentum half-range `π/dq`.
pub fn min_sigma_q(grid: &PointerGrid) -> f64 {
    2.0 * grid.dq() / PI
}

/// Largest admissible `σ_Q`: four widths inside the position half-range `L`.
pub fn max_sigma_q(grid: &PointerGrid) -> f64 {
    grid.half_width() / 4.0
}

/// Position-space Gaussian `φ(q) ∝ exp(-q²/(4σ²))` centred at zero.
pub fn gaussian_pointer(grid: PointerGrid, sigma_q: f64) -> Result<PointerState> {
    let lower = min_sigma_q(&grid);
    let upper = max_sigma_q(&grid);
    if !sigma_q.is_finite() || sigma_q < lower {
        return Err(invalid(
            "sigma_q",
            format!("{sigma_q} is below the resolution bound 2*dq/pi = {lower}"),
        ));
    }
    if sigma_q > upper {
        return Err(invalid(
            "sigma_q",
            format!("{sigma_q} exceeds the truncation bound L/4 = {upper}"),
        ));
    }
    let amps = grid
        .positions()
        .into_iter()
        .map(|q| C64::new((-q * q / (4.0 * sigma_q * sigma_q)).exp(), 0.0))
        .collect();
    PointerState::from_amplitudes(grid, amps, Representation::Position)
}

pub fn to_momentum(s: &PointerState) -> Result<PointerState> {
    s.require(Representation::Position)?;
    let mut amplitudes = s.amplitudes.clone();
    s.grid.forward_in_place(&mut amplitudes);
    Ok(PointerState {
        grid: s.grid,
        amplitudes,
        representation: Representation::Momentum,
    })
}

pub fn to_position(s: &PointerState) -> Result<PointerState> {
    s.require(Representation::Momentum)?;
    let mut amplitudes = s.amplitudes.clone();
    s.grid.inverse_in_place(&mut amplitudes);
    Ok(PointerState {
        grid: s.grid,
        amplitudes,
        representation: Representation::Position,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub q_mean: f64,
    pub q_var: f64,
    pub p_mean: f64,
    pub p_var: f64,
}

/// Mean and variance of a sampled density `w_j` over abscissae `x_j`.
pub(crate) fn weighted_moments(xs: impl Iterator<Item = f64>, weights: &[f64]) -> (f64, f64) {
    let total: f64 = weights.iter().sum();
    let (mut s1, mut s2) = (0.0, 0.0);
    for (x, &w) in xs.zip(weights) {
        s1 += w * x;
        s2 += w * x * x;
    }
    let mean = s1 / total;
    (mean, (s2 / total - mean * mean).max(0.0))
}

pub fn moments(s: &PointerState) -> Moments {
    let pos = s.in_position();
    let mom = s.in_momentum();
    let wq: Vec<f64> = pos.amplitudes.iter().map(|z| z.norm_sqr()).collect();
    let wp: Vec<f64> = mom.amplitudes.iter().map(|z| z.norm_sqr()).collect();
    let (q_mean, q_var) = weighted_moments(s.grid.positions().into_iter(), &wq);
    let (p_mean, p_var) = weighted_moments(s.grid.momenta().into_iter(), &wp);
    Moments {
        q_mean,
        q_var,
        p_mean,
        p_var,
    }
}

/// Inverse-CDF sampler over the grid points of a position density.
#[derive(Debug, Clone)]
pub struct ReadoutSampler {
    positions: Vec<f64>,
    cdf: Vec<f64>,
}

impl ReadoutSampler {
    /// `density[j]` is proportional to the probability of reading `q_j`.
    pub fn from_density(grid: &PointerGrid, density: &[f64]) -> Result<Self> {
        if density.len() != grid.n_points() {
            return Err(Error::DimensionMismatch {
                expected: grid.n_points(),
                found: density.len(),
            });
        }
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = density
            .iter()
            .map(|&w| {
                acc += w.max(0.0);
                acc
            })
            .collect();
        if !(acc > 0.0 && acc.is_finite()) {
            return Err(Error::ZeroNorm);
        }
        for c in cdf.iter_mut() {
            *c /= acc;
        }
        Ok(Self {
            positions: grid.positions(),
            cdf,
        })
    }

    pub fn cdf(&self) -> &[f64] {
        &self.cdf
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let u: f64 = rng.random();
        let j = self.cdf.partition_point(|&c| c <= u);
        self.positions[j.min(self.positions.len() - 1)]
    }
}

/// One projective readout of the pointer position.
pub fn sample_readout<R: Rng + ?Sized>(s: &PointerState, rng: &mut R) -> Result<f64> {
    let pos = s.in_position();
    let density: Vec<f64> = pos.amplitudes.iter().map(|z| z.norm_sqr()).collect();
    Ok(ReadoutSampler::from_density(&s.grid, &density)?.sample(rng))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid() -> PointerGrid {
        PointerGrid::new(256, 20.0).unwrap()
    }

    #[test]
    fn grid_conjugacy() {
        for &(n, l) in &[(64, 1.0), (256, 20.0), (1024, 80.0)] {
            let g = PointerGrid::new(n, l).unwrap();
            assert!((g.dq() * g.dp() * n as f64 - 2.0 * PI).abs() < 1e-12);
        }
        assert!(PointerGrid::new(100, 1.0).is_err());
        assert!(PointerGrid::new(32, 1.0).is_err());
        assert!(PointerGrid::new(64, 0.0).is_err());
    }

    #[test]
    fn gaussian_has_zero_means_and_set_width() {
        let s = gaussian_pointer(grid(), 1.0).unwrap();
        let m = moments(&s);
        assert!(m.q_mean.abs() < 1e-10);
        assert!(m.p_mean.abs() < 1e-10);
        assert!((m.q_var - 1.0).abs() < 1e-6);
        assert!((m.p_var - 0.25).abs() < 1e-4);
        assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn gaussian_bounds_enforced() {
        let g = grid();
        for bad in [-1.0, 0.05, 6.0, f64::NAN] {
            match gaussian_pointer(g, bad) {
                Err(Error::InvalidParameter { name, .. }) => assert_eq!(name, "sigma_q"),
                other => panic!("sigma {bad}: {other:?}"),
            }
        }
    }

    #[test]
    fn momentum_width_is_conjugate() {
        for sigma in [0.7, 1.0, 2.5] {
            let s = gaussian_pointer(grid(), sigma).unwrap();
            let p = to_momentum(&s).unwrap();
            let m = moments(&p);
            assert!((m.p_var.sqrt() - 1.0 / (2.0 * sigma)).abs() < 1e-4);
            assert!((m.q_var.sqrt() * m.p_var.sqrt() - 0.5).abs() < 1e-4);
        }
    }

    #[test]
    fn impulse_has_flat_spectrum() {
        let g = PointerGrid::new(64, 16.0).unwrap();
        let mut a = vec![C64::default(); 64];
        a[32] = C64::new(1.0, 0.0);
        let s = PointerState::from_amplitudes(g, a, Representation::Position).unwrap();
        let p = to_momentum(&s).unwrap();
        let first = p.amplitudes()[0].norm();
        for z in p.amplitudes() {
            assert!((z.norm() - first).abs() < 1e-12);
        }
    }

    #[test]
    fn wrong_representation_is_an_error() {
        let s = gaussian_pointer(grid(), 1.0).unwrap();
        assert!(matches!(to_position(&s), Err(Error::WrongRepresentation { .. })));
        let p = to_momentum(&s).unwrap();
        assert!(matches!(to_momentum(&p), Err(Error::WrongRepresentation { .. })));
    }

    #[test]
    fn translation_and_boost() {
        let s = gaussian_pointer(grid(), 1.0).unwrap();
        let shifted = s.translated(0.7);
        assert!((moments(&shifted).q_mean - 0.7).abs() < 1e-9);
        let boosted = s.boosted(0.3).unwrap();
        assert!((moments(&boosted).p_mean - 0.3).abs() < 1e-6);
    }

    #[test]
    fn delta_pointer_always_reads_its_position() {
        let g = PointerGrid::new(64, 16.0).unwrap();
        let mut a = vec![C64::default(); 64];
        let j = 33; // q = -16 + 33 * 0.5 = 0.5
        a[j] = C64::new(1.0, 0.0);
        let s = PointerState::from_amplitudes(g, a, Representation::Position).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            assert_eq!(sample_readout(&s, &mut rng).unwrap(), 0.5);
        }
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let s = gaussian_pointer(grid(), 2.0).unwrap();
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..50)
                .map(|_| sample_readout(&s, &mut rng).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(11), draw(11));
        assert_ne!(draw(11), draw(12));
    }

    #[test]
    fn wide_gaussian_sample_spread() {
        let g = PointerGrid::new(512, 80.0).unwrap();
        let s = gaussian_pointer(g, 10.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let xs: Vec<f64> = (0..10_000)
            .map(|_| sample_readout(&s, &mut rng).unwrap())
            .collect();
        let mean = xs.iter().sum::<f64>() / xs.len() as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (xs.len() - 1) as f64;
        assert!((var.sqrt() - 10.0).abs() < 0.5);
    }

    #[test]
    fn sampled_cdf_passes_ks() {
        let s = gaussian_pointer(grid(), 1.5).unwrap();
        let density: Vec<f64> = s.amplitudes().iter().map(|z| z.norm_sqr()).collect();
        let sampler = ReadoutSampler::from_density(s.grid(), &density).unwrap();
        let n = 100_000;
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut counts = vec![0usize; s.grid().n_points()];
        let dq = s.grid().dq();
        for _ in 0..n {
            let q = sampler.sample(&mut rng);
            let j = ((q + s.grid().half_width()) / dq).round() as usize;
            counts[j] += 1;
        }
        let mut acc = 0usize;
        let mut d = 0.0_f64;
        for (j, c) in counts.iter().enumerate() {
            acc += c;
            d = d.max((acc as f64 / n as f64 - sampler.cdf()[j]).abs());
        }
        // 1% critical value of the one-sample KS statistic
        assert!(d < 1.628 / (n as f64).sqrt(), "KS statistic {d}");
    }
}
