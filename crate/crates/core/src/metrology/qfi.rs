use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::family::{derivative_finite_difference, StateFamily};
use crate::error::{Error, Result};
use crate::hilbert::{eigendecompose_hermitian, CMatrix, ProbeState, Spectrum};
use crate::SystemParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FisherMethod {
    SldSpectral,
    HomodyneQuadrature,
    GaussianCovariance,
    GeneralDyne,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivativeScheme {
    Analytic,
    CentralDifference { step: f64 },
    ForwardDifference { step: f64 },
}

/// Numerical bookkeeping attached to a Fisher-information value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Numerics {
    pub derivative: DerivativeScheme,
    /// Pairs with `ϱ_m + ϱ_n` at or below this were left out of the SLD sum.
    pub eigenvalue_floor: Option<f64>,
    pub excluded_pairs: usize,
    pub clipped_eigenvalues: usize,
    pub quadrature_points: Option<usize>,
    /// Relative change of the value when the quadrature grid is refined.
    pub quadrature_error: Option<f64>,
}

impl Numerics {
    pub(crate) fn with_derivative(derivative: DerivativeScheme) -> Self {
        Self {
            derivative,
            eigenvalue_floor: None,
            excluded_pairs: 0,
            clipped_eigenvalues: 0,
            quadrature_points: None,
            quadrature_error: None,
        }
    }
}

/// Fisher information with respect to `nbar` at one parameter point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FisherResult {
    pub value: f64,
    pub params: SystemParams,
    pub method: FisherMethod,
    pub numerics: Numerics,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QfiOptions {
    pub eigenvalue_floor: f64,
    /// Use finite differences even when an analytic derivative exists.
    pub force_finite_difference: bool,
    /// Finite-difference step; defaults to `1e-4 (1 + nbar)`.
    pub step: Option<f64>,
}

impl Default for QfiOptions {
    fn default() -> Self {
        Self {
            eigenvalue_floor: 1e-12,
            force_finite_difference: false,
            step: None,
        }
    }
}

/// State and its `nbar` derivative, analytic when available.
pub(crate) fn state_and_derivative<S: StateFamily + ?Sized>(
    family: &S,
    nbar: f64,
    opts: &QfiOptions,
) -> Result<(ProbeState, CMatrix, DerivativeScheme)> {
    let rho = family.state(nbar)?;
    if !opts.force_finite_difference {
        if let Some(d) = family.analytic_derivative(nbar) {
            return Ok((rho, d, DerivativeScheme::Analytic));
        }
    }
    let step = opts.step.unwrap_or(1e-4 * (1.0 + nbar));
    let (d, scheme) = derivative_finite_difference(family, nbar, step)?;
    Ok((rho, d, scheme))
}

/// `⟨ψ_m|∂ρ|ψ_n⟩` in the eigenbasis of ρ.
fn rotate(spec: &Spectrum, d: &CMatrix) -> CMatrix {
    spec.vectors.adjoint() * d * &spec.vectors
}

/// Quantum Fisher information from the spectral SLD formula
/// `F_Q = 2 Σ_{m,n} |⟨ψ_m|∂ρ|ψ_n⟩|² / (ϱ_m + ϱ_n)`.
pub fn qfi<S: StateFamily + ?Sized>(family: &S, nbar: f64, opts: &QfiOptions) -> Result<FisherResult> {
    let (rho, d, scheme) = state_and_derivative(family, nbar, opts)?;
    let spec = eigendecompose_hermitian(&rho)?;
    let rotated = rotate(&spec, &d);
    let dim = spec.values.len();
    let mut sum = 0.0;
    let mut excluded = 0;
    for m in 0..dim {
        for n in 0..dim {
            let denom = spec.values[m] + spec.values[n];
            if denom > opts.eigenvalue_floor {
                sum += rotated[(m, n)].norm_sqr() / denom;
            } else {
                excluded += 1;
            }
        }
    }
    let value = 2.0 * sum;
    if value < -1e-10 || !value.is_finite() {
        return Err(Error::Numerical(format!("quantum Fisher information evaluated to {value}")));
    }
    Ok(FisherResult {
        value: value.max(0.0),
        params: family.params(nbar),
        method: FisherMethod::SldSpectral,
        numerics: Numerics {
            eigenvalue_floor: Some(opts.eigenvalue_floor),
            excluded_pairs: excluded,
            clipped_eigenvalues: spec.clipped,
            ..Numerics::with_derivative(scheme)
        },
    })
}

/// Symmetric logarithmic derivative
/// `L = 2 Σ ⟨ψ_m|∂ρ|ψ_n⟩/(ϱ_m + ϱ_n) |ψ_m⟩⟨ψ_n|`, restricted to pairs above
/// the eigenvalue floor.
pub fn sld<S: StateFamily + ?Sized>(family: &S, nbar: f64, opts: &QfiOptions) -> Result<CMatrix> {
    let (rho, d, _) = state_and_derivative(family, nbar, opts)?;
    let spec = eigendecompose_hermitian(&rho)?;
    let rotated = rotate(&spec, &d);
    let dim = spec.values.len();
    let inner = CMatrix::from_fn(dim, dim, |m, n| {
        let denom = spec.values[m] + spec.values[n];
        if denom > opts.eigenvalue_floor {
            rotated[(m, n)] * Complex64::new(2.0 / denom, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    Ok(&spec.vectors * inner * spec.vectors.adjoint())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::KerrStrength;
    use crate::hilbert::{hermitian_eigen, max_abs_diff};
    use crate::metrology::ProbeModel;
    use std::f64::consts::PI;

    fn model(a: f64, g: f64, t: f64) -> ProbeModel {
        ProbeModel::from_values(a, g, t).unwrap()
    }

    /// Root fidelity `Tr √(√ρ σ √ρ)` from two eigendecompositions.
    fn fidelity(rho: &CMatrix, sigma: &CMatrix) -> f64 {
        let s = hermitian_eigen(rho).unwrap();
        let sqrt_vals: Vec<f64> = s.values.iter().map(|v| v.max(0.0).sqrt()).collect();
        let mut scaled = s.vectors.clone();
        for (j, v) in sqrt_vals.iter().enumerate() {
            scaled.column_mut(j).scale_mut(*v);
        }
        let root = &scaled * s.vectors.adjoint();
        let mut inner = &root * sigma * &root;
        inner = (&inner + inner.adjoint()) * Complex64::new(0.5, 0.0);
        hermitian_eigen(&inner).unwrap().values.iter().map(|v| v.max(0.0).sqrt()).sum()
    }

    #[test]
    fn zero_coupling_has_no_information() {
        let r = qfi(&model(2.0, 0.0, PI), 1.0, &QfiOptions::default()).unwrap();
        assert!(r.value.abs() < 1e-12);
        assert_eq!(r.method, FisherMethod::SldSpectral);
    }

    #[test]
    fn agrees_with_bures_fidelity_oracle() {
        // F_Q ≈ 8 (1 − F(ρ(n − h/2), ρ(n + h/2))) / h²
        let m = model(2.0, 0.3, PI);
        let n = 1.0;
        let h = 2e-3;
        let a = m.state(n - 0.5 * h).unwrap();
        let b = m.state(n + 0.5 * h).unwrap();
        let fid = fidelity(a.elements(), b.elements());
        let oracle = 8.0 * (1.0 - fid) / (h * h);
        let got = qfi(&m, n, &QfiOptions::default()).unwrap().value;
        assert!((got - oracle).abs() <= 0.01 * got, "qfi {got} vs fidelity {oracle}");
    }

    #[test]
    fn finite_difference_path_agrees_with_analytic() {
        let m = model(2.0, 0.3, PI);
        let an = qfi(&m, 0.7, &QfiOptions::default()).unwrap();
        let fd = qfi(
            &m,
            0.7,
            &QfiOptions {
                force_finite_difference: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(matches!(fd.numerics.derivative, DerivativeScheme::CentralDifference { .. }));
        assert!((an.value - fd.value).abs() < 1e-6 * an.value);
    }

    #[test]
    fn invariant_under_kerr() {
        let g = 0.38;
        let base = model(3.0, g, PI);
        for chi in [0.0, 0.3, KerrStrength::cancelling(g).value()] {
            let k = base.with_kerr(KerrStrength::new(chi).unwrap());
            let a = qfi(&base, 0.25, &QfiOptions::default()).unwrap().value;
            let b = qfi(&k, 0.25, &QfiOptions::default()).unwrap().value;
            assert!((a - b).abs() <= 1e-8, "chi {chi}: {a} vs {b}");
        }
    }

    #[test]
    fn sld_reproduces_derivative_and_qfi() {
        let m = model(1.5, 0.4, 2.0);
        let nbar = 0.3;
        let opts = QfiOptions::default();
        let l = sld(&m, nbar, &opts).unwrap();
        let rho = m.state(nbar).unwrap();
        let d = m.analytic_derivative(nbar).unwrap();
        let half = Complex64::new(0.5, 0.0);
        let lyap = (&l * rho.elements() + rho.elements() * &l) * half;
        assert!(max_abs_diff(&lyap, &d) < 1e-8);
        let f_from_l = (rho.elements() * &l * &l).trace().re;
        let f = qfi(&m, nbar, &opts).unwrap().value;
        assert!((f - f_from_l).abs() < 1e-8 * f.max(1.0));
    }

    #[test]
    fn decreases_with_temperature_at_fixed_settings() {
        let m = model(2.0, 0.3, PI);
        let vals: Vec<f64> = [0.0, 0.25, 0.5, 1.0, 2.0]
            .iter()
            .map(|&n| qfi(&m, n, &QfiOptions::default()).unwrap().value)
            .collect();
        assert!(vals.windows(2).all(|w| w[0] >= w[1]), "{vals:?}");
    }
}
