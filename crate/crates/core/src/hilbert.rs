//! Fock-space foundations: cutoffs, coherent-state coefficients, Hermite
//! functions, validated density matrices and the Hermitian eigensolver used by
//! the quantum Fisher information.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Reduced Planck constant in J·s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant in J/K.
pub const K_B: f64 = 1.380_649e-23;

/// Default allowed probability mass outside the Fock truncation.
pub const DEFAULT_TAIL_TOL: f64 = 1e-12;
/// `|Tr ρ − 1|` allowed for a constructed state.
pub const TRACE_TOL: f64 = 1e-9;
/// Largest element of `ρ − ρ†` accepted as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Eigenvalues down to this value are treated as numerical zeros.
pub const PSD_TOL: f64 = -1e-10;

/// Photon-number truncation: states live in span{|0⟩, …, |n_max⟩}.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FockCutoff {
    n_max: usize,
}

impl FockCutoff {
    pub fn new(n_max: usize) -> Result<Self> {
        if n_max < 1 {
            return Err(Error::Domain("Fock cutoff n_max must be at least 1".into()));
        }
        Ok(Self { n_max })
    }

    /// Default rule `n_max = ceil(α² + 8α + 10)`.
    ///
    /// For α ≤ 4 the coherent-state tail beyond this cutoff is below 1e-12.
    pub fn for_alpha(alpha: f64) -> Self {
        let a = alpha.abs();
        let n_max = (a * a + 8.0 * a + 10.0).ceil() as usize;
        Self { n_max }
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn dim(&self) -> usize {
        self.n_max + 1
    }

    /// Cutoff with twice the photon number range, used by convergence audits.
    pub fn doubled(&self) -> Self {
        Self {
            n_max: 2 * self.n_max,
        }
    }
}

/// Real amplitude of the coherent input field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoherentAmplitude(f64);

impl CoherentAmplitude {
    pub fn new(alpha: f64) -> Result<Self> {
        if !alpha.is_finite() || alpha < 0.0 {
            return Err(Error::Domain(format!(
                "coherent amplitude must be real, finite and non-negative, got {alpha}"
            )));
        }
        Ok(Self(alpha))
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

/// Thermal state of the mechanical oscillator, described by its mean phonon
/// number.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OscillatorSpec {
    nbar: f64,
}

impl OscillatorSpec {
    pub fn new(nbar: f64) -> Result<Self> {
        if !nbar.is_finite() || nbar < 0.0 {
            return Err(Error::Domain(format!(
                "mean phonon number must be finite and non-negative, got {nbar}"
            )));
        }
        Ok(Self { nbar })
    }

    /// Oscillator at temperature `t` (kelvin) with angular frequency `omega`
    /// (rad/s).
    pub fn from_temperature(t: f64, omega: f64) -> Result<Self> {
        Self::new(nbar_from_temperature(t, omega)?)
    }

    pub fn nbar(&self) -> f64 {
        self.nbar
    }
}

/// Bose–Einstein occupancy `1/(e^x − 1)` for `x = ħΩ/(k_B T)`.
pub fn nbar_from_energy_ratio(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::Domain(format!(
            "energy ratio ħΩ/k_BT must be positive, got {x}"
        )));
    }
    Ok(1.0 / x.exp_m1())
}

/// Mean phonon number of an oscillator of angular frequency `omega` (rad/s)
/// at temperature `t` (kelvin).
pub fn nbar_from_temperature(t: f64, omega: f64) -> Result<f64> {
    if !(t > 0.0) || !(omega > 0.0) {
        return Err(Error::Domain(format!(
            "temperature and frequency must be positive, got T = {t}, Omega = {omega}"
        )));
    }
    nbar_from_energy_ratio(HBAR * omega / (K_B * t))
}

/// Inverse of [`nbar_from_temperature`].
pub fn temperature_from_nbar(nbar: f64, omega: f64) -> Result<f64> {
    if !(nbar > 0.0) || !(omega > 0.0) {
        return Err(Error::Domain(format!(
            "nbar and frequency must be positive, got nbar = {nbar}, Omega = {omega}"
        )));
    }
    Ok(HBAR * omega / (K_B * (1.0 / nbar).ln_1p()))
}

/// `d nbar / d T` at temperature `t`, for converting Fisher information in
/// `nbar` to Fisher information in temperature.
pub fn dnbar_dtemperature(t: f64, omega: f64) -> Result<f64> {
    let nbar = nbar_from_temperature(t, omega)?;
    let x = HBAR * omega / (K_B * t);
    Ok(nbar * (nbar + 1.0) * x / t)
}

/// Coherent-state Fock amplitudes `c_n = e^{−α²/2} αⁿ/√(n!)` for n ≤ n_max.
///
/// Fails when the truncation discards more than `tail_tol` of the photon
/// number distribution.
pub fn coherent_coefficients(
    alpha: CoherentAmplitude,
    cutoff: FockCutoff,
    tail_tol: f64,
) -> Result<Vec<Complex64>> {
    let a = alpha.value();
    let mut c = Vec::with_capacity(cutoff.dim());
    let mut cn = (-0.5 * a * a).exp();
    let mut mass = 0.0;
    for n in 0..cutoff.dim() {
        if n > 0 {
            cn *= a / (n as f64).sqrt();
        }
        mass += cn * cn;
        c.push(Complex64::new(cn, 0.0));
    }
    let tail = (1.0 - mass).max(0.0);
    if tail > tail_tol {
        return Err(Error::Truncation {
            n_max: cutoff.n_max(),
            tail,
            tolerance: tail_tol,
        });
    }
    Ok(c)
}

/// Normalized Hermite functions `ψ_n(x) = ⟨x|n⟩` for n = 0..=n_max.
///
/// Uses the recurrence on normalized functions, so no factorials appear.
pub fn hermite_functions(x: f64, cutoff: FockCutoff) -> Vec<f64> {
    let mut psi = vec![0.0; cutoff.dim()];
    fill_hermite_functions(x, &mut psi);
    psi
}

/// Writes `ψ_0(x) … ψ_{len−1}(x)` into `out`.
pub fn fill_hermite_functions(x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    out[0] = PI.powf(-0.25) * (-0.5 * x * x).exp();
    if out.len() > 1 {
        out[1] = std::f64::consts::SQRT_2 * x * out[0];
    }
    for n in 1..out.len().saturating_sub(1) {
        let nf = n as f64;
        out[n + 1] =
            (2.0 / (nf + 1.0)).sqrt() * x * out[n] - (nf / (nf + 1.0)).sqrt() * out[n - 1];
    }
}

/// Largest modulus of `m − m†`.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Density matrix of the optical probe in the Fock basis.
///
/// Construction checks Hermiticity, unit trace and positivity; a state
/// that loses trace to truncation is rejected rather than renormalized.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeState {
    rho: CMatrix,
}

impl ProbeState {
    pub fn new(rho: CMatrix) -> Result<Self> {
        if rho.nrows() != rho.ncols() || rho.nrows() < 2 {
            return Err(Error::Contract(format!(
                "density matrix must be square with dimension >= 2, got {}x{}",
                rho.nrows(),
                rho.ncols()
            )));
        }
        if rho.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Numerical("density matrix has non-finite entries".into()));
        }
        let defect = hermiticity_defect(&rho);
        if defect > HERMITIAN_TOL {
            return Err(Error::Contract(format!(
                "density matrix is not Hermitian (defect {defect:.3e})"
            )));
        }
        let tr = rho.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::Truncation {
                n_max: rho.nrows() - 1,
                tail: (tr - Complex64::new(1.0, 0.0)).norm(),
                tolerance: TRACE_TOL,
            });
        }
        let spec = hermitian_eigen(&rho)?;
        let min = spec.values.last().copied().unwrap_or(0.0);
        if min < PSD_TOL {
            return Err(Error::Contract(format!(
                "density matrix is not positive semidefinite (min eigenvalue {min:.3e})"
            )));
        }
        Ok(Self { rho })
    }

    /// Pure state `|ψ⟩⟨ψ|` from Fock amplitudes.
    pub fn pure(amplitudes: &[Complex64]) -> Result<Self> {
        let n = amplitudes.len();
        Self::new(CMatrix::from_fn(n, n, |i, j| {
            amplitudes[i] * amplitudes[j].conj()
        }))
    }

    /// Coherent projector `|α⟩⟨α|` truncated at `cutoff`.
    pub fn coherent(alpha: CoherentAmplitude, cutoff: FockCutoff) -> Result<Self> {
        Self::pure(&coherent_coefficients(alpha, cutoff, DEFAULT_TAIL_TOL)?)
    }

    /// Fock state `|k⟩⟨k|`.
    pub fn fock(k: usize, cutoff: FockCutoff) -> Result<Self> {
        if k > cutoff.n_max() {
            return Err(Error::Domain(format!(
                "Fock state |{k}> lies above cutoff {}",
                cutoff.n_max()
            )));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); cutoff.dim()];
        amps[k] = Complex64::new(1.0, 0.0);
        Self::pure(&amps)
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    pub fn cutoff(&self) -> FockCutoff {
        FockCutoff {
            n_max: self.dim() - 1,
        }
    }

    pub fn elements(&self) -> &CMatrix {
        &self.rho
    }

    pub fn into_elements(self) -> CMatrix {
        self.rho
    }

    pub fn trace(&self) -> f64 {
        self.rho.trace().re
    }

    /// Mean photon number `Tr[ρ a†a]`.
    pub fn mean_photon_number(&self) -> f64 {
        (0..self.dim()).map(|n| n as f64 * self.rho[(n, n)].re).sum()
    }

    /// Largest elementwise modulus of `self − other`.
    pub fn max_distance(&self, other: &ProbeState) -> f64 {
        max_abs_diff(&self.rho, &other.rho)
    }
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Eigen-decomposition `ρ = Σ ϱ_n |ψ_n⟩⟨ψ_n|` with eigenvalues in descending
/// order; `vectors` holds `|ψ_n⟩` as columns.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub vectors: CMatrix,
    /// Number of slightly negative eigenvalues (≥ −1e-10) reset to zero.
    pub clipped: usize,
}

impl Spectrum {
    /// `V diag(ϱ) V†`.
    pub fn reconstruct(&self) -> CMatrix {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for (j, &v) in self.values.iter().enumerate() {
            scaled.column_mut(j).scale_mut(v);
        }
        let out = &scaled * self.vectors.adjoint();
        debug_assert_eq!(out.nrows(), n);
        out
    }
}

/// Eigensystem of a Hermitian matrix, eigenvalues sorted descending, no
/// clipping.
pub fn hermitian_eigen(m: &CMatrix) -> Result<Spectrum> {
    if m.nrows() != m.ncols() {
        return Err(Error::Contract("eigendecomposition needs a square matrix".into()));
    }
    let defect = hermiticity_defect(m);
    let scale = m.iter().map(|z| z.norm()).fold(1.0, f64::max);
    if defect > HERMITIAN_TOL * scale {
        return Err(Error::Contract(format!(
            "matrix is not Hermitian (defect {defect:.3e})"
        )));
    }
    let eig = SymmetricEigen::try_new(m.clone(), f64::EPSILON, 0).ok_or_else(|| {
        Error::Numerical("Hermitian eigensolver did not converge".into())
    })?;
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(Spectrum {
        values,
        vectors,
        clipped: 0,
    })
}

/// Spectral decomposition of a density matrix. Eigenvalues between −1e-10
/// and 0 are set to zero and counted in [`Spectrum::clipped`].
pub fn eigendecompose_hermitian(rho: &ProbeState) -> Result<Spectrum> {
    let mut spec = hermitian_eigen(rho.elements())?;
    for v in spec.values.iter_mut() {
        if *v < 0.0 && *v >= PSD_TOL {
            *v = 0.0;
            spec.clipped += 1;
        }
    }
    Ok(spec)
}
