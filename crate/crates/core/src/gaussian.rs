//! Linearized optomechanics in the covariance-matrix picture.
//!
//! Phase-space ordering is `(X, Y, Q, P)`: cavity fluctuation quadratures
//! first, mechanics second. The covariance matrix is
//! `σ = Tr[ρ {r − r̄, (r − r̄)ᵀ}]`, so the vacuum has `σ = 1` and a thermal
//! mode `σ = (2 nbar + 1) 1`. Time is the dimensionless `τ = Ω t`.

use nalgebra::{DMatrix, DVector, Matrix2, Matrix4};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{hermitian_eigen, CMatrix};
use crate::metrology::{DerivativeScheme, FisherMethod, FisherResult, Numerics};
use crate::SystemParams;

pub const SYMMETRY_TOL: f64 = 1e-12;
pub const UNCERTAINTY_TOL: f64 = -1e-10;
pub const SYMPLECTIC_TOL: f64 = 1e-10;
/// Squeezing used for the homodyne limit of a general-dyne measurement.
pub const HOMODYNE_Z: f64 = 1e-6;
/// Second squeezing value for the consistency check of that limit.
pub const HOMODYNE_Z_CHECK: f64 = 1e-7;

/// `⊕ [[0, 1], [−1, 0]]` over `modes` modes.
pub fn symplectic_form(modes: usize) -> DMatrix<f64> {
    let mut w = DMatrix::zeros(2 * modes, 2 * modes);
    for j in 0..modes {
        w[(2 * j, 2 * j + 1)] = 1.0;
        w[(2 * j + 1, 2 * j)] = -1.0;
    }
    w
}

fn omega4() -> Matrix4<f64> {
    Matrix4::from_iterator(symplectic_form(2).iter().cloned())
}

/// First moments and covariance of a one- or two-mode Gaussian state.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceState {
    first_moments: DVector<f64>,
    cov: DMatrix<f64>,
}

impl CovarianceState {
    /// Checks symmetry and the uncertainty relation `σ + iω ⪰ 0`.
    pub fn new(first_moments: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let n = cov.nrows();
        if !(n == 2 || n == 4) || cov.ncols() != n || first_moments.len() != n {
            return Err(Error::Contract(format!(
                "covariance must be 2×2 or 4×4 with matching moments, got {}×{} and {}",
                n,
                cov.ncols(),
                first_moments.len()
            )));
        }
        let asym = (&cov - cov.transpose()).amax();
        if asym > SYMMETRY_TOL {
            return Err(Error::Contract(format!("covariance asymmetric by {asym:.3e}")));
        }
        let w = symplectic_form(n / 2);
        let m = CMatrix::from_fn(n, n, |i, j| Complex64::new(cov[(i, j)], w[(i, j)]));
        let min = hermitian_eigen(&m)?.values.iter().cloned().fold(f64::INFINITY, f64::min);
        if min < UNCERTAINTY_TOL {
            return Err(Error::Contract(format!(
                "covariance violates the uncertainty relation (min eigenvalue of σ + iω is {min:.3e})"
            )));
        }
        Ok(Self { first_moments, cov })
    }

    /// Coherent light (zero fluctuation moments) and a thermal oscillator.
    pub fn initial(nbar: f64) -> Result<Self> {
        if !(nbar >= 0.0) {
            return Err(Error::Domain(format!("nbar must be non-negative, got {nbar}")));
        }
        let t = 2.0 * nbar + 1.0;
        Self::new(DVector::zeros(4), DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0, t, t])))
    }

    pub fn first_moments(&self) -> &DVector<f64> {
        &self.first_moments
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn modes(&self) -> usize {
        self.cov.nrows() / 2
    }

    /// The optical `2×2` block: the partial trace over the mechanics.
    pub fn reduced_optical(&self) -> Result<Self> {
        Self::new(
            self.first_moments.rows(0, 2).into_owned(),
            self.cov.view((0, 0), (2, 2)).into_owned(),
        )
    }

    /// `1/√det σ` for one mode.
    pub fn purity(&self) -> f64 {
        1.0 / self.cov.determinant().sqrt()
    }
}

/// `H_lin` of `H = ½ rᵀ H_lin r` with `Ω = 1`: unit frequency on both
/// mechanical quadratures and `−2gα` coupling `X` to `Q`.
pub fn linearized_hamiltonian_matrix(g: f64, alpha: f64) -> Matrix4<f64> {
    let c = -2.0 * g * alpha;
    Matrix4::new(
        0.0, 0.0, c, 0.0, //
        0.0, 0.0, 0.0, 0.0, //
        c, 0.0, 1.0, 0.0, //
        0.0, 0.0, 0.0, 1.0,
    )
}

/// `S(τ) = exp(ω H_lin τ)`, checked to be symplectic.
pub fn symplectic_propagator(g: f64, alpha: f64, tau: f64) -> Result<Matrix4<f64>> {
    if !(tau >= 0.0) || !g.is_finite() || !alpha.is_finite() {
        return Err(Error::Domain(format!("need finite g, alpha and tau ≥ 0, got {g}, {alpha}, {tau}")));
    }
    let w = omega4();
    let s = (w * linearized_hamiltonian_matrix(g, alpha) * tau).exp();
    let residual = (s * w * s.transpose() - w).amax();
    if residual > SYMPLECTIC_TOL {
        return Err(Error::Numerical(format!("propagator symplectic residual {residual:.3e}")));
    }
    Ok(s)
}

/// `σ(τ) = S σ(0) Sᵀ`, `r̄(τ) = S r̄(0)` for a two-mode state.
pub fn evolve_covariance(sigma0: &CovarianceState, g: f64, alpha: f64, tau: f64) -> Result<CovarianceState> {
    if sigma0.modes() != 2 {
        return Err(Error::Contract("evolution needs the joint two-mode covariance".into()));
    }
    let s = DMatrix::from_iterator(4, 4, symplectic_propagator(g, alpha, tau)?.iter().cloned());
    let cov = &s * sigma0.cov() * s.transpose();
    // Symmetrize away rounding so validation tests physics, not round-off.
    let cov = (&cov + cov.transpose()) * 0.5;
    CovarianceState::new(&s * sigma0.first_moments(), cov)
}

/// `f = 4g²α²(τ − sin τ)`.
pub fn shear(g: f64, alpha: f64, tau: f64) -> f64 {
    4.0 * g * g * alpha * alpha * (tau - tau.sin())
}

/// `h = 8g²α²(1 − cos τ)(2 nbar + 1)`.
pub fn heating(g: f64, alpha: f64, nbar: f64, tau: f64) -> f64 {
    8.0 * g * g * alpha * alpha * (1.0 - tau.cos()) * (2.0 * nbar + 1.0)
}

/// `σ_L = [[1, f], [f, 1 + h + f²]]`.
pub fn sigma_l_closed_form(g: f64, alpha: f64, nbar: f64, tau: f64) -> Matrix2<f64> {
    let f = shear(g, alpha, tau);
    let h = heating(g, alpha, nbar, tau);
    Matrix2::new(1.0, f, f, 1.0 + h + f * f)
}

/// `∂σ_L/∂nbar`; only `h` depends on `nbar`.
pub fn dsigma_l_closed_form(g: f64, alpha: f64, tau: f64) -> Matrix2<f64> {
    Matrix2::new(0.0, 0.0, 0.0, 16.0 * g * g * alpha * alpha * (1.0 - tau.cos()))
}

fn invert(m: &Matrix2<f64>) -> Result<Matrix2<f64>> {
    m.try_inverse()
        .filter(|i| i.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::Domain(format!("singular covariance {m:?}")))
}

/// Single-mode Gaussian QFI,
/// `Tr[(σ⁻¹∂σ)²]/(2(1 + μ²)) + 2(∂μ)²/(1 − μ⁴)` with `μ = 1/√det σ`.
///
/// For pure states (`1 − μ⁴ < 1e-12`) the second term is dropped, which
/// requires `∂μ = 0`.
pub fn gaussian_qfi(sigma: &Matrix2<f64>, dsigma: &Matrix2<f64>) -> Result<f64> {
    let inv = invert(sigma)?;
    let a = inv * dsigma;
    let mu = 1.0 / sigma.determinant().sqrt();
    let dmu = -0.5 * mu * a.trace();
    let first = (a * a).trace() / (2.0 * (1.0 + mu * mu));
    let gap = 1.0 - mu.powi(4);
    let second = if gap < 1e-12 {
        if dmu.abs() > 1e-12 {
            return Err(Error::Numerical(format!("pure state with purity derivative {dmu:.3e}")));
        }
        0.0
    } else {
        2.0 * dmu * dmu / gap
    };
    Ok(first + second)
}

/// `8g²α²(cos τ − 1)/[(2 nbar + 1)(4g²α²(2 nbar + 1)(cos τ − 1) − 1)]`.
pub fn gaussian_qfi_closed_form(g: f64, alpha: f64, nbar: f64, tau: f64) -> f64 {
    let k = g * g * alpha * alpha;
    let c = tau.cos() - 1.0;
    let t = 2.0 * nbar + 1.0;
    8.0 * k * c / (t * (4.0 * k * t * c - 1.0))
}

/// Gaussian measurement with covariance `σ_M = R(θ) diag(z, 1/z) R(θ)ᵀ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneralDyneSetting {
    z: f64,
    theta: f64,
}

impl GeneralDyneSetting {
    pub fn new(z: f64, theta: f64) -> Result<Self> {
        if !(z > 0.0 && z.is_finite()) || !theta.is_finite() {
            return Err(Error::Domain(format!("general-dyne needs z > 0 and finite θ, got {z}, {theta}")));
        }
        Ok(Self { z, theta })
    }

    /// Heterodyne: projection on coherent states.
    pub fn heterodyne() -> Self {
        Self { z: 1.0, theta: 0.0 }
    }

    /// Near-homodyne measurement of `cos θ X − sin θ Y`.
    pub fn homodyne(theta: f64) -> Result<Self> {
        Self::new(HOMODYNE_Z, theta)
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn sigma_m(&self) -> Matrix2<f64> {
        let (s, c) = self.theta.sin_cos();
        let r = Matrix2::new(c, s, -s, c);
        r * Matrix2::new(self.z, 0.0, 0.0, 1.0 / self.z) * r.transpose()
    }
}

/// `½ Tr[(Σ⁻¹∂Σ)²]` with `Σ = (σ_L + σ_M)/2`.
pub fn generaldyne_cfi(sigma_l: &Matrix2<f64>, dsigma_l: &Matrix2<f64>, setting: GeneralDyneSetting) -> Result<f64> {
    let big = (sigma_l + setting.sigma_m()) * 0.5;
    let a = invert(&big)? * (dsigma_l * 0.5);
    Ok(0.5 * (a * a).trace())
}

/// Homodyne limit of [`generaldyne_cfi`] at `z = 1e-6`, together with its
/// relative change from `z = 1e-7`.
pub fn homodyne_limit_cfi(sigma_l: &Matrix2<f64>, dsigma_l: &Matrix2<f64>, theta: f64) -> Result<(f64, f64)> {
    let v = generaldyne_cfi(sigma_l, dsigma_l, GeneralDyneSetting::new(HOMODYNE_Z, theta)?)?;
    let w = generaldyne_cfi(sigma_l, dsigma_l, GeneralDyneSetting::new(HOMODYNE_Z_CHECK, theta)?)?;
    let scale = v.abs().max(w.abs());
    Ok((v, if scale > 0.0 { (v - w).abs() / scale } else { 0.0 }))
}

/// Homodyne Fisher information at `τ = π`,
/// `2(4gα sin θ)⁴ / [cos²θ − 4πg²α² sin 2θ + (1 + 16g²α²(1 + 2 nbar) + 16π²g⁴α⁴) sin²θ]²`.
pub fn homodyne_cfi_closed_form(g: f64, alpha: f64, nbar: f64, theta: f64) -> f64 {
    use std::f64::consts::PI;
    let k = g * g * alpha * alpha;
    let (s, c) = theta.sin_cos();
    let num = 2.0 * (4.0 * g * alpha * s).powi(4);
    let den = c * c - 4.0 * PI * k * (2.0 * theta).sin()
        + (1.0 + 16.0 * k * (1.0 + 2.0 * nbar) + 16.0 * PI * PI * k * k) * s * s;
    num / (den * den)
}

/// Linearized probe at fixed `(g, α, τ)` as a function of `nbar`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearizedProbe {
    pub g: f64,
    pub alpha: f64,
    pub tau: f64,
}

impl LinearizedProbe {
    pub fn new(g: f64, alpha: f64, tau: f64) -> Result<Self> {
        if !(g >= 0.0 && alpha >= 0.0 && tau >= 0.0) || !(g + alpha + tau).is_finite() {
            return Err(Error::Domain(format!("need g, alpha, tau ≥ 0, got {g}, {alpha}, {tau}")));
        }
        Ok(Self { g, alpha, tau })
    }

    fn params(&self, nbar: f64) -> SystemParams {
        SystemParams {
            alpha: self.alpha,
            nbar,
            g: self.g,
            tau: self.tau,
            chi: 0.0,
            n_max: 0,
        }
    }

    pub fn sigma_l(&self, nbar: f64) -> Matrix2<f64> {
        sigma_l_closed_form(self.g, self.alpha, nbar, self.tau)
    }

    pub fn dsigma_l(&self) -> Matrix2<f64> {
        dsigma_l_closed_form(self.g, self.alpha, self.tau)
    }

    /// `σ_L` and `∂σ_L` from the matrix exponential. The joint covariance is
    /// affine in `nbar`, so `∂σ = S diag(0, 0, 2, 2) Sᵀ` exactly.
    pub fn sigma_l_numeric(&self, nbar: f64) -> Result<(Matrix2<f64>, Matrix2<f64>)> {
        let evolved = evolve_covariance(&CovarianceState::initial(nbar)?, self.g, self.alpha, self.tau)?;
        let s = symplectic_propagator(self.g, self.alpha, self.tau)?;
        let d = s * Matrix4::from_diagonal(&nalgebra::Vector4::new(0.0, 0.0, 2.0, 2.0)) * s.transpose();
        let block = evolved.cov();
        Ok((
            Matrix2::new(block[(0, 0)], block[(0, 1)], block[(1, 0)], block[(1, 1)]),
            Matrix2::new(d[(0, 0)], d[(0, 1)], d[(1, 0)], d[(1, 1)]),
        ))
    }

    fn result(&self, nbar: f64, value: f64, method: FisherMethod, err: Option<f64>) -> FisherResult {
        FisherResult {
            value,
            params: self.params(nbar),
            method,
            numerics: Numerics {
                quadrature_error: err,
                ..Numerics::with_derivative(DerivativeScheme::Analytic)
            },
        }
    }

    /// Gaussian QFI from the closed-form covariance.
    pub fn qfi(&self, nbar: f64) -> Result<FisherResult> {
        let v = gaussian_qfi(&self.sigma_l(nbar), &self.dsigma_l())?;
        Ok(self.result(nbar, v, FisherMethod::GaussianCovariance, None))
    }

    /// Gaussian QFI from the matrix-exponential covariance.
    pub fn qfi_numeric(&self, nbar: f64) -> Result<FisherResult> {
        let (s, d) = self.sigma_l_numeric(nbar)?;
        let v = gaussian_qfi(&s, &d)?;
        Ok(self.result(nbar, v, FisherMethod::GaussianCovariance, None))
    }

    pub fn generaldyne_cfi(&self, nbar: f64, setting: GeneralDyneSetting) -> Result<FisherResult> {
        let v = generaldyne_cfi(&self.sigma_l(nbar), &self.dsigma_l(), setting)?;
        Ok(self.result(nbar, v, FisherMethod::GeneralDyne, None))
    }

    /// Homodyne limit; `quadrature_error` carries the `z` consistency check.
    pub fn homodyne_cfi(&self, nbar: f64, theta: f64) -> Result<FisherResult> {
        let (v, err) = homodyne_limit_cfi(&self.sigma_l(nbar), &self.dsigma_l(), theta)?;
        Ok(self.result(nbar, v, FisherMethod::GeneralDyne, Some(err)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrology::{qfi, ProbeModel, QfiOptions};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    #[test]
    fn hamiltonian_shape() {
        let h = linearized_hamiltonian_matrix(0.3, 2.0);
        assert_eq!(h, h.transpose());
        assert!((h[(0, 2)] + 1.2).abs() < 1e-15);
        assert!((h[(2, 0)] + 1.2).abs() < 1e-15);
        let free = linearized_hamiltonian_matrix(0.0, 2.0);
        assert_eq!(free.fixed_view::<2, 2>(0, 2).amax(), 0.0);
    }

    #[test]
    fn zero_time_is_identity() {
        let s = symplectic_propagator(0.4, 3.0, 0.0).unwrap();
        assert!((s - Matrix4::identity()).amax() < 1e-15);
    }

    #[test]
    fn free_evolution_rotates_mechanics() {
        let s = symplectic_propagator(0.0, 2.0, 0.8).unwrap();
        let (sn, cs) = 0.8f64.sin_cos();
        assert!((s.fixed_view::<2, 2>(0, 0) - Matrix2::identity()).amax() < 1e-14);
        assert!((s.fixed_view::<2, 2>(2, 2) - Matrix2::new(cs, sn, -sn, cs)).amax() < 1e-14);
    }

    #[test]
    fn closed_form_values() {
        let s = sigma_l_closed_form(0.1, 2.0, 1.0, PI);
        assert!((s[(0, 1)] - 0.502_654_824_574_366_9).abs() < 1e-12);
        assert!((s[(1, 1)] - (1.0 + 1.92 + s[(0, 1)].powi(2))).abs() < 1e-12);
        assert_eq!(sigma_l_closed_form(0.4, 2.0, 1.0, 0.0), Matrix2::identity());
    }

    #[test]
    fn pure_state_branch() {
        let v = gaussian_qfi(&Matrix2::identity(), &Matrix2::zeros()).unwrap();
        assert_eq!(v, 0.0);
        assert_eq!(LinearizedProbe::new(0.0, 2.0, PI).unwrap().qfi(1.0).unwrap().value, 0.0);
    }

    #[test]
    fn singular_covariance_is_a_domain_error() {
        let err = gaussian_qfi(&Matrix2::zeros(), &Matrix2::identity()).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
    }

    #[test]
    fn large_alpha_limit() {
        for nbar in [0.0f64, 0.5, 2.0] {
            let limit = 2.0 / (1.0 + 2.0 * nbar).powi(2);
            let v = LinearizedProbe::new(0.3, 1e3, PI).unwrap().qfi(nbar).unwrap().value;
            assert!((v - limit).abs() < 1e-5 * limit);
        }
    }

    #[test]
    fn homodyne_closed_form_special_angles() {
        assert_eq!(homodyne_cfi_closed_form(0.2, 2.0, 1.0, 0.0), 0.0);
        let (g, a, n) = (0.2f64, 2.0f64, 1.0f64);
        let k = g * g * a * a;
        let expected = 2.0 * (4.0 * g * a).powi(4) / (1.0 + 16.0 * k * (1.0 + 2.0 * n) + 16.0 * PI * PI * k * k).powi(2);
        assert!((homodyne_cfi_closed_form(g, a, n, PI / 2.0) - expected).abs() < 1e-14);
    }

    #[test]
    fn heterodyne_and_static_covariance() {
        let p = LinearizedProbe::new(0.2, 2.0, PI).unwrap();
        assert_eq!(generaldyne_cfi(&p.sigma_l(1.0), &Matrix2::zeros(), GeneralDyneSetting::heterodyne()).unwrap(), 0.0);
        assert!(GeneralDyneSetting::new(0.0, 0.0).is_err());
    }

    #[test]
    fn homodyne_decays_with_alpha() {
        let vals: Vec<f64> = [2.0, 4.0, 8.0, 16.0]
            .iter()
            .map(|&a| homodyne_cfi_closed_form(0.3, a, 0.5, 0.4))
            .collect();
        assert!(vals.windows(2).all(|w| w[1] < w[0]), "{vals:?}");
        assert!(vals[3] < 1e-3 * vals[0]);
    }

    #[test]
    fn invalid_covariance_rejected() {
        let bad = DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 0.5]));
        assert!(CovarianceState::new(DVector::zeros(2), bad).is_err());
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        assert!(CovarianceState::new(DVector::zeros(2), asym).is_err());
    }

    #[test]
    fn agrees_with_full_state_at_small_coupling() {
        // The two formalisms only meet asymptotically; 15% is a sanity band.
        for alpha in [3.0, 4.0] {
            for g in [0.02, 0.05] {
                let full = qfi(&ProbeModel::from_values(alpha, g, PI).unwrap(), 0.5, &QfiOptions::default())
                    .unwrap()
                    .value;
                let lin = LinearizedProbe::new(g, alpha, PI).unwrap().qfi(0.5).unwrap().value;
                assert!((full - lin).abs() <= 0.15 * lin, "α {alpha} g {g}: {full} vs {lin}");
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn evolution_matches_closed_form(g in 0.0..1.0f64, alpha in 0.0..4.0f64, tau in 0.0..7.0f64, nbar in 0.0..3.0f64) {
            let p = LinearizedProbe::new(g, alpha, tau).unwrap();
            let (s, d) = p.sigma_l_numeric(nbar).unwrap();
            let scale = 1.0 + p.sigma_l(nbar).amax();
            prop_assert!((s - p.sigma_l(nbar)).amax() <= 1e-10 * scale);
            prop_assert!((d - p.dsigma_l()).amax() <= 1e-10 * scale);
        }

        #[test]
        fn qfi_matches_closed_form(g in 0.01..1.0f64, alpha in 0.5..4.0f64, tau in 0.1..6.2f64, nbar in 0.0..3.0f64) {
            let p = LinearizedProbe::new(g, alpha, tau).unwrap();
            let v = p.qfi(nbar).unwrap().value;
            let c = gaussian_qfi_closed_form(g, alpha, nbar, tau);
            prop_assert!((v - c).abs() <= 1e-10 * c.abs().max(1e-300));
        }

        #[test]
        fn measurements_bounded_by_qfi(g in 0.0..1.0f64, alpha in 0.0..4.0f64, tau in 0.0..6.3f64, nbar in 0.0..3.0f64,
                                      lz in -6.0..6.0f64, theta in 0.0..PI) {
            let p = LinearizedProbe::new(g, alpha, tau).unwrap();
            let q = p.qfi(nbar).unwrap().value;
            let c = p.generaldyne_cfi(nbar, GeneralDyneSetting::new(10f64.powf(lz), theta).unwrap()).unwrap().value;
            prop_assert!(c <= q + 1e-8);
        }

        // Finite z leaks O(z/sin²θ) of the orthogonal quadrature into the
        // signal, so angles near 0 and π are kept out.
        #[test]
        fn homodyne_limit_matches_closed_form(g in 0.05..0.6f64, alpha in 0.5..4.0f64, nbar in 0.0..2.0f64, theta in 0.3..2.85f64) {
            let p = LinearizedProbe::new(g, alpha, PI).unwrap();
            let r = p.homodyne_cfi(nbar, theta).unwrap();
            let c = homodyne_cfi_closed_form(g, alpha, nbar, theta);
            prop_assert!((r.value - c).abs() <= 1e-4 * c);
        }

        #[test]
        fn evolved_states_respect_uncertainty(g in 0.0..1.0f64, alpha in 0.0..4.0f64, tau in 0.0..7.0f64, nbar in 0.0..3.0f64) {
            let s = evolve_covariance(&CovarianceState::initial(nbar).unwrap(), g, alpha, tau);
            prop_assert!(s.is_ok());
            prop_assert!(s.unwrap().reduced_optical().is_ok());
        }
    }
}
