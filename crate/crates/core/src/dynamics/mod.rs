//! Construction of the optical probe state after the optomechanical
//! interaction.
//!
//! The reduced state in the Fock basis is
//!
//! ```text
//! ρ_nm = c_n c_m* · exp[i g²(n² − m²)(τ − sin τ)] · exp[g²(m − n)²(1 + 2 nbar)(cos τ − 1)]
//! ```
//!
//! The first factor is a Kerr-like coherent phase independent of temperature,
//! the second a phase-diffusion damping that carries all the dependence on
//! `nbar`. [`oracle`] evolves the joint light–mechanics system by brute force
//! and is used to validate this closed form.

pub mod oracle;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{
    coherent_coefficients, CMatrix, CoherentAmplitude, FockCutoff, OscillatorSpec, ProbeState,
    DEFAULT_TAIL_TOL,
};

pub use oracle::{bipartite_oracle, BipartiteOracle, MechanicalCutoff};

/// Dimensionless coupling `g = g₀/Ω` and interaction time `τ = Ωt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingParams {
    g: f64,
    tau: f64,
}

impl CouplingParams {
    pub fn new(g: f64, tau: f64) -> Result<Self> {
        if !g.is_finite() || g < 0.0 || !tau.is_finite() || tau < 0.0 {
            return Err(Error::Domain(format!(
                "coupling and time must be finite and non-negative, got g = {g}, tau = {tau}"
            )));
        }
        Ok(Self { g, tau })
    }

    pub fn g(&self) -> f64 {
        self.g
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// `η = 1 − e^{−iτ}`.
    pub fn eta(&self) -> Complex64 {
        Complex64::new(1.0 - self.tau.cos(), self.tau.sin())
    }

    /// Coefficient of `(n² − m²)` in the coherent phase, `g²(τ − sin τ)`.
    pub fn coherent_phase_rate(&self) -> f64 {
        self.g * self.g * (self.tau - self.tau.sin())
    }

    /// Coefficient of `(m − n)²(1 + 2 nbar)` in the damping exponent,
    /// `g²(cos τ − 1)` (non-positive).
    pub fn damping_rate(&self) -> f64 {
        self.g * self.g * (self.tau.cos() - 1.0)
    }
}

/// Width `Δ` of a phase-diffusion channel, which damps `|n⟩⟨m|` by
/// `exp(−2(n − m)²Δ²)`. This is a Gaussian random phase rotation whose
/// angle has standard deviation `2Δ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiffusionWidth(f64);

impl DiffusionWidth {
    pub fn new(delta: f64) -> Result<Self> {
        if !delta.is_finite() || delta < 0.0 {
            return Err(Error::Domain(format!(
                "diffusion width must be finite and non-negative, got {delta}"
            )));
        }
        Ok(Self(delta))
    }

    pub fn value(&self) -> f64 {
        self.0
    }

    /// Standard deviation of the random rotation angle.
    pub fn angle_std(&self) -> f64 {
        2.0 * self.0
    }
}

/// Kerr parameter `χ` of `U_K = exp[−i(χ/2)(a†a)²]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KerrStrength(f64);

impl KerrStrength {
    pub fn new(chi: f64) -> Result<Self> {
        if !chi.is_finite() {
            return Err(Error::Domain(format!("Kerr strength must be finite, got {chi}")));
        }
        Ok(Self(chi))
    }

    pub const fn zero() -> Self {
        Self(0.0)
    }

    /// `χ = 2πg²`, which removes the coherent phase at `τ = π`.
    pub fn cancelling(g: f64) -> Self {
        Self(2.0 * std::f64::consts::PI * g * g)
    }

    /// `χ = 2g²(τ − sin τ)`, which removes the coherent phase at any `τ`.
    pub fn cancelling_at(cpl: &CouplingParams) -> Self {
        Self(2.0 * cpl.coherent_phase_rate())
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

fn coefficients(alpha: CoherentAmplitude, cutoff: FockCutoff) -> Result<Vec<Complex64>> {
    coherent_coefficients(alpha, cutoff, DEFAULT_TAIL_TOL)
}

/// Elementwise state `c_n c_m* · f(n, m)`; `f` must be Hermitian in (n, m).
pub(crate) fn modulated_coherent(
    alpha: CoherentAmplitude,
    cutoff: FockCutoff,
    factor: impl Fn(usize, usize) -> Complex64,
) -> Result<CMatrix> {
    let c = coefficients(alpha, cutoff)?;
    let dim = cutoff.dim();
    Ok(CMatrix::from_fn(dim, dim, |n, m| c[n] * c[m].conj() * factor(n, m)))
}

/// Exact-form element factor `C_{n,m}` (without the coherent amplitudes).
pub(crate) fn exact_factor(nbar: f64, cpl: &CouplingParams, chi: f64, n: usize, m: usize) -> Complex64 {
    let (nf, mf) = (n as f64, m as f64);
    let sq = nf * nf - mf * mf;
    let d2 = (mf - nf) * (mf - nf);
    let phase = sq * (cpl.coherent_phase_rate() - 0.5 * chi);
    let damping = d2 * (1.0 + 2.0 * nbar) * cpl.damping_rate();
    Complex64::from_polar(damping.exp(), phase)
}

/// Small-τ element factor `exp[−(gτ)²(m − n)²(1 + 2 nbar)/2]`.
pub(crate) fn small_tau_factor(nbar: f64, cpl: &CouplingParams, chi: f64, n: usize, m: usize) -> Complex64 {
    let (nf, mf) = (n as f64, m as f64);
    let gt = cpl.g() * cpl.tau();
    let d2 = (mf - nf) * (mf - nf);
    let damping = -0.5 * gt * gt * d2 * (1.0 + 2.0 * nbar);
    Complex64::from_polar(damping.exp(), -0.5 * chi * (nf * nf - mf * mf))
}

/// Reduced optical state after interaction time `τ` with a thermal
/// oscillator.
pub fn probe_state(
    alpha: CoherentAmplitude,
    osc: OscillatorSpec,
    cpl: CouplingParams,
    cutoff: FockCutoff,
) -> Result<ProbeState> {
    let nbar = osc.nbar();
    ProbeState::new(modulated_coherent(alpha, cutoff, |n, m| {
        exact_factor(nbar, &cpl, 0.0, n, m)
    })?)
}

/// Short-time form of [`probe_state`]: pure phase diffusion with width set by
/// `gτ`, no coherent phase. Meant for `τ ≪ 1`; not enforced.
pub fn probe_state_small_tau(
    alpha: CoherentAmplitude,
    osc: OscillatorSpec,
    cpl: CouplingParams,
    cutoff: FockCutoff,
) -> Result<ProbeState> {
    let nbar = osc.nbar();
    ProbeState::new(modulated_coherent(alpha, cutoff, |n, m| {
        small_tau_factor(nbar, &cpl, 0.0, n, m)
    })?)
}

/// Coherent state carrying only the Kerr-like phase `e^{i g² n²(τ − sin τ)}`.
pub fn kerr_phased_coherent(
    alpha: CoherentAmplitude,
    cpl: CouplingParams,
    cutoff: FockCutoff,
) -> Result<ProbeState> {
    let rate = cpl.coherent_phase_rate();
    ProbeState::new(modulated_coherent(alpha, cutoff, |n, m| {
        let (nf, mf) = (n as f64, m as f64);
        Complex64::from_polar(1.0, rate * (nf * nf - mf * mf))
    })?)
}

/// Gaussian random-phase channel: `ρ_nm → ρ_nm · exp(−2(n − m)²Δ²)`.
pub fn phase_diffusion_channel(rho: &ProbeState, width: DiffusionWidth) -> Result<ProbeState> {
    let d2 = width.value() * width.value();
    let el = rho.elements();
    let dim = rho.dim();
    ProbeState::new(CMatrix::from_fn(dim, dim, |n, m| {
        let k = n as f64 - m as f64;
        el[(n, m)] * (-2.0 * k * k * d2).exp()
    }))
}

/// Diffusion width that reproduces the thermal damping of [`probe_state`]:
/// `2Δ² = g²(1 + 2 nbar)(1 − cos τ)`.
pub fn diffusion_equivalence_width(osc: OscillatorSpec, cpl: CouplingParams) -> DiffusionWidth {
    let two_d2 = -(1.0 + 2.0 * osc.nbar()) * cpl.damping_rate();
    DiffusionWidth((0.5 * two_d2.max(0.0)).sqrt())
}

/// Kerr medium `U_K ρ U_K†`: `ρ_nm → ρ_nm · exp[−i(χ/2)(n² − m²)]`.
pub fn apply_kerr(rho: &ProbeState, kerr: KerrStrength) -> Result<ProbeState> {
    let half = 0.5 * kerr.value();
    let el = rho.elements();
    let dim = rho.dim();
    ProbeState::new(CMatrix::from_fn(dim, dim, |n, m| {
        let (nf, mf) = (n as f64, m as f64);
        el[(n, m)] * Complex64::from_polar(1.0, -half * (nf * nf - mf * mf))
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{eigendecompose_hermitian, max_abs_diff};
    use std::f64::consts::PI;

    fn amp(a: f64) -> CoherentAmplitude {
        CoherentAmplitude::new(a).unwrap()
    }
    fn osc(n: f64) -> OscillatorSpec {
        OscillatorSpec::new(n).unwrap()
    }
    fn cpl(g: f64, t: f64) -> CouplingParams {
        CouplingParams::new(g, t).unwrap()
    }

    #[test]
    fn zero_coupling_gives_coherent_projector() {
        let cut = FockCutoff::for_alpha(1.3);
        let coh = ProbeState::coherent(amp(1.3), cut).unwrap();
        for &t in &[0.0, 0.7, PI, 5.0] {
            for &n in &[0.0, 0.5, 3.0] {
                let s = probe_state(amp(1.3), osc(n), cpl(0.0, t), cut).unwrap();
                assert!(s.max_distance(&coh) < 1e-15);
            }
        }
    }

    #[test]
    fn full_period_is_pure_kerr_rotated_coherent_state() {
        let cut = FockCutoff::for_alpha(1.5);
        let c = cpl(0.4, 2.0 * PI);
        let s = probe_state(amp(1.5), osc(2.0), c, cut).unwrap();
        let k = kerr_phased_coherent(amp(1.5), c, cut).unwrap();
        assert!(s.max_distance(&k) < 1e-12);
        let purity = (s.elements() * s.elements()).trace().re;
        assert!((purity - 1.0).abs() < 1e-10);
    }

    #[test]
    fn diagonal_is_photon_distribution() {
        let cut = FockCutoff::for_alpha(2.0);
        let c = coherent_coefficients(amp(2.0), cut, 1e-12).unwrap();
        let s = probe_state(amp(2.0), osc(0.7), cpl(0.35, 2.2), cut).unwrap();
        for n in 0..cut.dim() {
            assert_eq!(s.elements()[(n, n)].re, c[n].norm_sqr());
            assert_eq!(s.elements()[(n, n)].im, 0.0);
        }
    }

    #[test]
    fn small_tau_depends_only_on_product() {
        let cut = FockCutoff::for_alpha(1.0);
        let a = probe_state_small_tau(amp(1.0), osc(0.3), cpl(2.0, 0.01), cut).unwrap();
        let b = probe_state_small_tau(amp(1.0), osc(0.3), cpl(1.0, 0.02), cut).unwrap();
        assert_eq!(a.elements(), b.elements());
        let z = probe_state_small_tau(amp(1.0), osc(0.3), cpl(0.0, 0.02), cut).unwrap();
        assert!(z.max_distance(&ProbeState::coherent(amp(1.0), cut).unwrap()) < 1e-15);
    }

    #[test]
    fn small_tau_error_scales_cubically() {
        // Exact and approximate forms differ first at O(τ³) through the
        // coherent phase g²(τ − sin τ) ≈ g²τ³/6.
        let cut = FockCutoff::for_alpha(1.0);
        let err = |t: f64| {
            let e = probe_state(amp(1.0), osc(0.5), cpl(1.0, t), cut).unwrap();
            let s = probe_state_small_tau(amp(1.0), osc(0.5), cpl(1.0, t), cut).unwrap();
            e.max_distance(&s)
        };
        let (e1, e2) = (err(0.01), err(0.005));
        assert!(e1 < 1e-5, "{e1}");
        let ratio = e1 / e2;
        assert!((ratio - 8.0).abs() < 0.5, "ratio {ratio}");
    }

    #[test]
    fn diffusion_identity_and_full_dephasing() {
        let cut = FockCutoff::for_alpha(1.2);
        let rho = probe_state(amp(1.2), osc(0.2), cpl(0.3, 1.0), cut).unwrap();
        let same = phase_diffusion_channel(&rho, DiffusionWidth::new(0.0).unwrap()).unwrap();
        assert_eq!(same.elements(), rho.elements());
        let deph = phase_diffusion_channel(&rho, DiffusionWidth::new(50.0).unwrap()).unwrap();
        for n in 0..cut.dim() {
            for m in 0..cut.dim() {
                if n != m {
                    assert!(deph.elements()[(n, m)].norm() < 1e-300);
                } else {
                    assert_eq!(deph.elements()[(n, n)], rho.elements()[(n, n)]);
                }
            }
        }
        assert!(DiffusionWidth::new(-0.1).is_err());
    }

    #[test]
    fn equivalence_width_values() {
        assert!(diffusion_equivalence_width(osc(1.0), cpl(0.3, 2.0 * PI)).value() < 1e-9);
        let d = diffusion_equivalence_width(osc(1.0), cpl(0.3, PI)).value();
        assert!((d * d - 0.27).abs() < 1e-14);
    }

    #[test]
    fn diffusion_of_kerr_phased_state_rebuilds_probe_state() {
        for &(a, n, g, t) in &[(1.0, 0.5, 0.3, PI), (2.0, 1.0, 0.25, 1.3), (1.5, 0.0, 0.6, 0.4)] {
            let cut = FockCutoff::for_alpha(a);
            let c = cpl(g, t);
            let phased = kerr_phased_coherent(amp(a), c, cut).unwrap();
            let rebuilt =
                phase_diffusion_channel(&phased, diffusion_equivalence_width(osc(n), c)).unwrap();
            let direct = probe_state(amp(a), osc(n), c, cut).unwrap();
            assert!(rebuilt.max_distance(&direct) <= 1e-12);
        }
    }

    #[test]
    fn kerr_identity_cancellation_and_linearity() {
        let g = 0.38;
        let cut = FockCutoff::for_alpha(3.0);
        let rho = probe_state(amp(3.0), osc(0.25), cpl(g, PI), cut).unwrap();
        let same = apply_kerr(&rho, KerrStrength::zero()).unwrap();
        assert_eq!(same.elements(), rho.elements());

        let cancelled = apply_kerr(&rho, KerrStrength::cancelling(g)).unwrap();
        let worst_im = cancelled.elements().iter().map(|z| z.im.abs()).fold(0.0, f64::max);
        assert!(worst_im <= 1e-12, "{worst_im}");
        assert!(cancelled.elements().iter().all(|z| z.re >= 0.0));

        // χ = πg² leaves half of the coherent phase.
        let half = apply_kerr(&rho, KerrStrength::new(PI * g * g).unwrap()).unwrap();
        let rate = g * g * PI;
        for n in 0..12usize {
            for m in 0..12usize {
                let sq = (n * n) as f64 - (m * m) as f64;
                let z = half.elements()[(n, m)];
                let expect = Complex64::from_polar(1.0, 0.5 * rate * sq);
                let got = z / z.norm();
                assert!((got - expect).norm() < 1e-9, "({n},{m})");
            }
        }
    }

    #[test]
    fn cancelling_at_pi_matches_closed_value() {
        let g = 0.3;
        let a = KerrStrength::cancelling(g).value();
        let b = KerrStrength::cancelling_at(&cpl(g, PI)).value();
        assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn kerr_preserves_spectrum() {
        let cut = FockCutoff::for_alpha(1.5);
        let rho = probe_state(amp(1.5), osc(0.4), cpl(0.5, 2.0), cut).unwrap();
        let out = apply_kerr(&rho, KerrStrength::new(0.83).unwrap()).unwrap();
        let a = eigendecompose_hermitian(&rho).unwrap().values;
        let b = eigendecompose_hermitian(&out).unwrap().values;
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn gaussian_phase_average_matches_closed_form() {
        // Average of U_θ ρ U_θ† with θ ~ N(0, (2Δ)²), by trapezoid quadrature
        // over ±12 standard deviations.
        let delta = 0.3;
        let width = DiffusionWidth::new(delta).unwrap();
        let cut = FockCutoff::for_alpha(1.0);
        let rho = probe_state(amp(1.0), osc(0.5), cpl(0.3, 2.0), cut).unwrap();
        let closed = phase_diffusion_channel(&rho, width).unwrap();

        let s = width.angle_std();
        let (lim, pts) = (12.0 * s, 4001);
        let h = 2.0 * lim / (pts - 1) as f64;
        let dim = cut.dim();
        let mut avg = CMatrix::zeros(dim, dim);
        for k in 0..pts {
            let th = -lim + k as f64 * h;
            let w = (-th * th / (2.0 * s * s)).exp() / (2.0 * PI * s * s).sqrt() * h;
            for n in 0..dim {
                for m in 0..dim {
                    let rot = Complex64::from_polar(1.0, -th * (n as f64 - m as f64));
                    avg[(n, m)] += rho.elements()[(n, m)] * rot * w;
                }
            }
        }
        assert!(max_abs_diff(&avg, closed.elements()) <= 1e-8);
    }
}
