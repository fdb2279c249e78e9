use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::family::StateFamily;
use super::qfi::{qfi, state_and_derivative, FisherMethod, FisherResult, Numerics, QfiOptions};
use crate::error::{Error, Result};
use crate::hilbert::{fill_hermite_functions, CMatrix, ProbeState};

/// Below this pdf value the Fisher integrand is set to zero.
pub const DEFAULT_PDF_FLOOR: f64 = 1e-14;

/// Largest relative change tolerated when the quadrature grid is refined.
pub const QUADRATURE_TOL: f64 = 1e-4;

/// Local-oscillator phase, stored in `[0, 2π)`.
///
/// The measured quadrature is `x_Φ = (a e^{−iΦ} + a† e^{iΦ})/√2`, so the
/// vacuum variance is 1/2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HomodyneSetting {
    phi_lo: f64,
}

impl HomodyneSetting {
    pub fn new(phi_lo: f64) -> Result<Self> {
        if !phi_lo.is_finite() {
            return Err(Error::Domain(format!("local-oscillator phase must be finite, got {phi_lo}")));
        }
        Ok(Self {
            phi_lo: phi_lo.rem_euclid(TAU),
        })
    }

    pub fn phi_lo(&self) -> f64 {
        self.phi_lo
    }
}

/// Homodyne density `p(x) = Σ ρ_nm e^{iΦ(m−n)} ψ_m(x) ψ_n(x)` by direct
/// double sum.
pub fn homodyne_pdf(rho: &ProbeState, setting: HomodyneSetting, x: f64) -> f64 {
    let dim = rho.dim();
    let mut psi = vec![0.0; dim];
    fill_hermite_functions(x, &mut psi);
    let el = rho.elements();
    let mut acc = Complex64::new(0.0, 0.0);
    for n in 0..dim {
        for m in 0..dim {
            let phase = Complex64::from_polar(1.0, setting.phi_lo * (m as f64 - n as f64));
            acc += el[(n, m)] * phase * (psi[m] * psi[n]);
        }
    }
    acc.re
}

/// Uniform grid on `[−half_width, half_width]` with trapezoid weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureGrid {
    pub half_width: f64,
    pub points: usize,
}

impl QuadratureGrid {
    pub fn new(half_width: f64, points: usize) -> Result<Self> {
        if !(half_width > 0.0) || points < 3 {
            return Err(Error::Domain(format!(
                "quadrature grid needs half_width > 0 and at least 3 points, got {half_width} and {points}"
            )));
        }
        Ok(Self { half_width, points })
    }

    /// Default: `L = √2 α + 8` with 2401 points.
    pub fn for_alpha(alpha: f64) -> Self {
        Self {
            half_width: std::f64::consts::SQRT_2 * alpha + 8.0,
            points: 2401,
        }
    }

    /// Default grid sized from the state's mean photon number.
    pub fn for_state(rho: &ProbeState) -> Self {
        Self::for_alpha(rho.mean_photon_number().max(0.0).sqrt())
    }

    /// Same interval, spacing halved.
    pub fn doubled(&self) -> Self {
        Self {
            half_width: self.half_width,
            points: 2 * (self.points - 1) + 1,
        }
    }

    pub fn step(&self) -> f64 {
        2.0 * self.half_width / (self.points - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        -self.half_width + i as f64 * self.step()
    }

    pub fn weight(&self, i: usize) -> f64 {
        if i == 0 || i + 1 == self.points {
            0.5 * self.step()
        } else {
            self.step()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.points).map(|i| self.node(i)).collect()
    }
}

/// Diagonal bands of a Fock matrix projected onto the quadrature grid,
/// `B_d(x) = Σ_n M_{n,n+d} ψ_n(x) ψ_{n+d}(x)`.
///
/// For Hermitian `M` the homodyne density at any phase follows as
/// `B_0 + 2 Re Σ_{d≥1} e^{iΦd} B_d`, so a phase scan never revisits the
/// Hermite functions.
#[derive(Debug, Clone)]
pub struct BandDecomposition {
    dim: usize,
    grid: QuadratureGrid,
    /// Row-major `points × dim`.
    bands: Vec<Complex64>,
}

impl BandDecomposition {
    pub fn new(m: &CMatrix, grid: QuadratureGrid) -> Self {
        let dim = m.nrows();
        let mut bands = vec![Complex64::new(0.0, 0.0); grid.points * dim];
        bands.par_chunks_mut(dim).enumerate().for_each_init(
            || vec![0.0; dim],
            |psi, (i, row)| {
                fill_hermite_functions(grid.node(i), psi);
                for (d, slot) in row.iter_mut().enumerate() {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for n in 0..dim - d {
                        acc += m[(n, n + d)] * (psi[n] * psi[n + d]);
                    }
                    *slot = acc;
                }
            },
        );
        Self { dim, grid, bands }
    }

    pub fn grid(&self) -> QuadratureGrid {
        self.grid
    }

    /// Values on the grid at local-oscillator phase `phi`.
    pub fn evaluate(&self, phi: f64) -> Vec<f64> {
        let phases = phase_table(phi, self.dim);
        self.bands
            .chunks(self.dim)
            .map(|row| project(row, &phases))
            .collect()
    }
}

fn phase_table(phi: f64, dim: usize) -> Vec<Complex64> {
    (0..dim).map(|d| Complex64::from_polar(1.0, phi * d as f64)).collect()
}

fn project(row: &[Complex64], phases: &[Complex64]) -> f64 {
    let mut acc = row[0].re;
    for d in 1..row.len() {
        acc += 2.0 * (row[d] * phases[d]).re;
    }
    acc
}

/// Homodyne Fisher information of one state as a function of `Φ`.
#[derive(Debug, Clone)]
pub struct HomodyneFisher {
    rho: BandDecomposition,
    drho: BandDecomposition,
    pdf_floor: f64,
}

impl HomodyneFisher {
    pub fn new(rho: &CMatrix, drho: &CMatrix, grid: QuadratureGrid) -> Self {
        Self {
            rho: BandDecomposition::new(rho, grid),
            drho: BandDecomposition::new(drho, grid),
            pdf_floor: DEFAULT_PDF_FLOOR,
        }
    }

    pub fn with_pdf_floor(mut self, floor: f64) -> Self {
        self.pdf_floor = floor;
        self
    }

    /// `∫ (∂p)²/p dx` by the trapezoid rule.
    pub fn cfi(&self, phi: f64) -> f64 {
        let dim = self.rho.dim;
        let phases = phase_table(phi, dim);
        let grid = self.rho.grid;
        let mut acc = 0.0;
        for (i, (r, d)) in self
            .rho
            .bands
            .chunks(dim)
            .zip(self.drho.bands.chunks(dim))
            .enumerate()
        {
            let p = project(r, &phases);
            if p > self.pdf_floor {
                let dp = project(d, &phases);
                acc += grid.weight(i) * dp * dp / p;
            }
        }
        acc
    }

    /// `∫ p dx`, useful as a coverage check.
    pub fn norm(&self, phi: f64) -> f64 {
        self.rho
            .evaluate(phi)
            .iter()
            .enumerate()
            .map(|(i, p)| self.rho.grid.weight(i) * p)
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CfiOptions {
    /// Defaults to [`QuadratureGrid::for_state`].
    pub grid: Option<QuadratureGrid>,
    pub pdf_floor: f64,
    /// Repeat on the doubled grid and fail above [`QUADRATURE_TOL`].
    pub check_refinement: bool,
    pub qfi: QfiOptions,
}

impl Default for CfiOptions {
    fn default() -> Self {
        Self {
            grid: None,
            pdf_floor: DEFAULT_PDF_FLOOR,
            check_refinement: true,
            qfi: QfiOptions::default(),
        }
    }
}

pub(crate) fn relative_change(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale < 1e-14 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

/// Homodyne classical Fisher information with respect to `nbar`.
pub fn cfi_homodyne<S: StateFamily + ?Sized>(
    family: &S,
    nbar: f64,
    setting: HomodyneSetting,
    opts: &CfiOptions,
) -> Result<FisherResult> {
    let (rho, d, scheme) = state_and_derivative(family, nbar, &opts.qfi)?;
    let grid = opts.grid.unwrap_or_else(|| QuadratureGrid::for_state(&rho));
    let fisher = HomodyneFisher::new(rho.elements(), &d, grid).with_pdf_floor(opts.pdf_floor);
    let value = fisher.cfi(setting.phi_lo());
    let quadrature_error = if opts.check_refinement {
        let fine = HomodyneFisher::new(rho.elements(), &d, grid.doubled())
            .with_pdf_floor(opts.pdf_floor)
            .cfi(setting.phi_lo());
        let change = relative_change(value, fine);
        if change > QUADRATURE_TOL {
            return Err(Error::Precision {
                what: "homodyne Fisher information".into(),
                relative_change: change,
                tolerance: QUADRATURE_TOL,
            });
        }
        Some(change)
    } else {
        None
    };
    Ok(FisherResult {
        value: value.max(0.0),
        params: family.params(nbar),
        method: FisherMethod::HomodyneQuadrature,
        numerics: Numerics {
            quadrature_points: Some(grid.points),
            quadrature_error,
            ..Numerics::with_derivative(scheme)
        },
    })
}

/// Best local-oscillator phase and the Fisher ratio it reaches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiOptimum {
    /// In `[0, π)`; the homodyne Fisher information has period π in `Φ`.
    pub phi_star: f64,
    pub cfi: f64,
    pub qfi: f64,
    pub ratio: f64,
}

/// Scan `Φ` over `points` values in `[0, π)` and refine the best one by a
/// parabola through its periodic neighbours.
pub fn optimal_phi_lo<S: StateFamily + ?Sized>(
    family: &S,
    nbar: f64,
    points: usize,
    opts: &CfiOptions,
) -> Result<PhiOptimum> {
    if points < 3 {
        return Err(Error::Domain(format!("phase scan needs at least 3 points, got {points}")));
    }
    let (rho, d, _) = state_and_derivative(family, nbar, &opts.qfi)?;
    let grid = opts.grid.unwrap_or_else(|| QuadratureGrid::for_state(&rho));
    let fisher = HomodyneFisher::new(rho.elements(), &d, grid).with_pdf_floor(opts.pdf_floor);
    let h = PI / points as f64;
    let values: Vec<f64> = (0..points).map(|k| fisher.cfi(k as f64 * h)).collect();

    let mut best = 0;
    for (k, &v) in values.iter().enumerate() {
        if v > values[best] + 1e-12 * values[best].abs().max(1e-300) {
            best = k;
        }
    }
    let left = values[(best + points - 1) % points];
    let right = values[(best + 1) % points];
    let centre = values[best];
    let curvature = left - 2.0 * centre + right;
    let offset = if curvature < 0.0 {
        (0.5 * (left - right) / curvature).clamp(-0.5, 0.5)
    } else {
        0.0
    };
    let mut phi_star = ((best as f64 + offset) * h).rem_euclid(PI);
    let mut cfi = fisher.cfi(phi_star);
    if cfi < centre {
        phi_star = best as f64 * h;
        cfi = centre;
    }
    // Snap values that land a rounding error below π back onto 0.
    if PI - phi_star < 1e-12 {
        phi_star = 0.0;
    }
    let q = qfi(family, nbar, &opts.qfi)?.value;
    let ratio = if q > 0.0 { cfi / q } else { 0.0 };
    Ok(PhiOptimum {
        phi_star,
        cfi,
        qfi: q,
        ratio,
    })
}
