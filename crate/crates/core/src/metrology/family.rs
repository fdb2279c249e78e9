use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::qfi::DerivativeScheme;
use crate::dynamics::{exact_factor, modulated_coherent, small_tau_factor, CouplingParams, KerrStrength};
use crate::error::{Error, Result};
use crate::hilbert::{CMatrix, CoherentAmplitude, FockCutoff, ProbeState};
use crate::SystemParams;

/// A one-parameter family of probe states `nbar ↦ ρ(nbar)`.
pub trait StateFamily: Sync {
    fn state(&self, nbar: f64) -> Result<ProbeState>;

    /// Exact `∂ρ/∂nbar`, when the family knows it.
    fn analytic_derivative(&self, _nbar: f64) -> Option<CMatrix> {
        None
    }

    fn params(&self, nbar: f64) -> SystemParams;
}

/// Which closed form builds the probe state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProbeForm {
    Exact,
    SmallTau,
}

/// The optomechanical probe as a function of `nbar`, optionally followed by
/// a Kerr medium.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeModel {
    pub alpha: CoherentAmplitude,
    pub coupling: CouplingParams,
    pub kerr: KerrStrength,
    pub cutoff: FockCutoff,
    pub form: ProbeForm,
}

impl ProbeModel {
    /// Exact form, no Kerr medium, default cutoff for `alpha`.
    pub fn new(alpha: CoherentAmplitude, coupling: CouplingParams) -> Self {
        Self {
            alpha,
            coupling,
            kerr: KerrStrength::zero(),
            cutoff: FockCutoff::for_alpha(alpha.value()),
            form: ProbeForm::Exact,
        }
    }

    /// Convenience constructor from raw numbers.
    pub fn from_values(alpha: f64, g: f64, tau: f64) -> Result<Self> {
        Ok(Self::new(CoherentAmplitude::new(alpha)?, CouplingParams::new(g, tau)?))
    }

    pub fn with_kerr(mut self, kerr: KerrStrength) -> Self {
        self.kerr = kerr;
        self
    }

    pub fn with_cutoff(mut self, cutoff: FockCutoff) -> Self {
        self.cutoff = cutoff;
        self
    }

    pub fn with_form(mut self, form: ProbeForm) -> Self {
        self.form = form;
        self
    }

    fn factor(&self, nbar: f64, n: usize, m: usize) -> Complex64 {
        match self.form {
            ProbeForm::Exact => exact_factor(nbar, &self.coupling, self.kerr.value(), n, m),
            ProbeForm::SmallTau => small_tau_factor(nbar, &self.coupling, self.kerr.value(), n, m),
        }
    }

    /// `∂ ln ρ_nm / ∂nbar` per unit `(m − n)²`.
    fn log_slope(&self) -> f64 {
        match self.form {
            ProbeForm::Exact => 2.0 * self.coupling.damping_rate(),
            ProbeForm::SmallTau => {
                let gt = self.coupling.g() * self.coupling.tau();
                -gt * gt
            }
        }
    }

    fn raw(&self, nbar: f64) -> Result<CMatrix> {
        modulated_coherent(self.alpha, self.cutoff, |n, m| self.factor(nbar, n, m))
    }
}

impl StateFamily for ProbeModel {
    fn state(&self, nbar: f64) -> Result<ProbeState> {
        if !nbar.is_finite() || nbar < 0.0 {
            return Err(Error::Domain(format!("nbar must be non-negative, got {nbar}")));
        }
        ProbeState::new(self.raw(nbar)?)
    }

    fn analytic_derivative(&self, nbar: f64) -> Option<CMatrix> {
        let raw = self.raw(nbar).ok()?;
        let slope = self.log_slope();
        let dim = raw.nrows();
        Some(CMatrix::from_fn(dim, dim, |n, m| {
            let k = n as f64 - m as f64;
            raw[(n, m)] * (slope * k * k)
        }))
    }

    fn params(&self, nbar: f64) -> SystemParams {
        SystemParams {
            alpha: self.alpha.value(),
            nbar,
            g: self.coupling.g(),
            tau: self.coupling.tau(),
            chi: self.kerr.value(),
            n_max: self.cutoff.n_max(),
        }
    }
}

/// Family given by an arbitrary closure; derivatives come from finite
/// differences.
pub struct FnFamily<F> {
    build: F,
    params: SystemParams,
}

impl<F> FnFamily<F>
where
    F: Fn(f64) -> Result<ProbeState> + Sync,
{
    pub fn new(build: F, params: SystemParams) -> Self {
        Self { build, params }
    }
}

impl<F> StateFamily for FnFamily<F>
where
    F: Fn(f64) -> Result<ProbeState> + Sync,
{
    fn state(&self, nbar: f64) -> Result<ProbeState> {
        (self.build)(nbar)
    }

    fn params(&self, nbar: f64) -> SystemParams {
        SystemParams { nbar, ..self.params }
    }
}

/// `∂ρ/∂nbar` by central differences with step `step`, switching to the
/// second-order one-sided formula when `nbar − step < 0`.
pub fn derivative_finite_difference<S: StateFamily + ?Sized>(
    family: &S,
    nbar: f64,
    step: f64,
) -> Result<(CMatrix, DerivativeScheme)> {
    if !(step > 0.0) {
        return Err(Error::Domain(format!("finite-difference step must be positive, got {step}")));
    }
    if nbar - step >= 0.0 {
        let plus = family.state(nbar + step)?.into_elements();
        let minus = family.state(nbar - step)?.into_elements();
        Ok((
            (plus - minus) / Complex64::new(2.0 * step, 0.0),
            DerivativeScheme::CentralDifference { step },
        ))
    } else {
        let f0 = family.state(nbar)?.into_elements();
        let f1 = family.state(nbar + step)?.into_elements();
        let f2 = family.state(nbar + 2.0 * step)?.into_elements();
        let d = (f1 * Complex64::new(4.0, 0.0) - f0 * Complex64::new(3.0, 0.0) - f2)
            / Complex64::new(2.0 * step, 0.0);
        Ok((d, DerivativeScheme::ForwardDifference { step }))
    }
}
