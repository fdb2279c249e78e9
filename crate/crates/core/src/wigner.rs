//! Wigner functions of Fock-basis density matrices.
//!
//! Convention: `W(q, p) = (1/π) ∫ ⟨q + x|ρ|q − x⟩ e^{−2ipx} dx` with
//! `q = (a + a†)/√2`, so the vacuum peaks at `1/π` and a coherent state
//! `|α⟩` is centred at `(√2 Re α, √2 Im α)`.

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{fill_hermite_functions, ProbeState};

/// Largest tolerated normalization deficit before a grid is rejected.
pub const COVERAGE_TOL: f64 = 1e-4;
/// Largest imaginary residue tolerated before it is discarded.
pub const IMAG_TOL: f64 = 1e-10;

/// Square phase-space grid `[−L, L]²` with `points` nodes per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub half_width: f64,
    pub points: usize,
}

impl GridSpec {
    pub fn new(half_width: f64, points: usize) -> Result<Self> {
        if !(half_width > 0.0) || points < 2 {
            return Err(Error::Domain(format!(
                "phase-space grid needs half_width > 0 and at least 2 points, got {half_width} and {points}"
            )));
        }
        Ok(Self { half_width, points })
    }

    /// 201 × 201 over `±(√2 α + 5)`.
    pub fn for_alpha(alpha: f64) -> Self {
        Self {
            half_width: SQRT_2 * alpha + 5.0,
            points: 201,
        }
    }

    pub fn for_state(rho: &ProbeState) -> Self {
        Self::for_alpha(rho.mean_photon_number().max(0.0).sqrt())
    }

    pub fn step(&self) -> f64 {
        2.0 * self.half_width / (self.points - 1) as f64
    }

    pub fn axis(&self) -> Vec<f64> {
        (0..self.points).map(|i| -self.half_width + i as f64 * self.step()).collect()
    }
}

/// Wigner function sampled on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseSpaceGrid {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    /// Row-major, `values[i * p.len() + j] = W(q[i], p[j])`.
    pub values: Vec<f64>,
    /// Largest `|Im W|` found before it was discarded.
    pub imag_residue: f64,
}

impl PhaseSpaceGrid {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.p.len() + j]
    }

    /// `Σ W Δq Δp`.
    pub fn normalization(&self) -> f64 {
        let dq = self.q[1] - self.q[0];
        let dp = self.p[1] - self.p[0];
        self.values.iter().sum::<f64>() * dq * dp
    }

    /// `(q, p, W)` rows in storage order.
    pub fn rows(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        let np = self.p.len();
        self.values
            .iter()
            .enumerate()
            .map(move |(k, &w)| (self.q[k / np], self.p[k % np], w))
    }
}

/// Fock-pair kernels share these per-state tables.
struct Kernel<'a> {
    rho: &'a ProbeState,
    /// `ln n!` for `n < dim`.
    log_fact: Vec<f64>,
}

impl<'a> Kernel<'a> {
    fn new(rho: &'a ProbeState) -> Self {
        let mut log_fact = vec![0.0; rho.dim()];
        for n in 1..rho.dim() {
            log_fact[n] = log_fact[n - 1] + (n as f64).ln();
        }
        Self { rho, log_fact }
    }

    /// Complex `W` at one point. For `m = n + d ≥ n` the Wigner kernel of
    /// `|m⟩⟨n|` is
    /// `((−1)^n/π) √(n!/m!) (√2(q − ip))^d e^{−r²} L_n^{(d)}(2r²)`,
    /// and that of `|n⟩⟨m|` is its conjugate.
    fn eval(&self, q: f64, p: f64, laguerre: &mut [f64]) -> Complex64 {
        let dim = self.rho.dim();
        let el = self.rho.elements();
        let r2 = q * q + p * p;
        let x = 2.0 * r2;
        let rho_abs = (2.0 * r2).sqrt();
        let theta = (-p).atan2(q);
        let mut total = Complex64::new(0.0, 0.0);
        for d in 0..dim {
            let count = dim - d;
            fill_laguerre(count, d as f64, x, &mut laguerre[..count]);
            let phase = Complex64::from_polar(1.0, d as f64 * theta);
            let log_pow = if d == 0 { 0.0 } else { d as f64 * rho_abs.ln() };
            let mut band = Complex64::new(0.0, 0.0);
            for n in 0..count {
                let m = n + d;
                let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                let mag = (0.5 * (self.log_fact[n] - self.log_fact[m]) + log_pow - r2).exp();
                let k = sign * mag * laguerre[n];
                if d == 0 {
                    band += el[(n, n)] * k;
                } else {
                    // ρ_mn |m⟩⟨n| + ρ_nm |n⟩⟨m|; kept separate so a
                    // non-Hermitian residue would show up as Im W.
                    let kc = phase * k;
                    band += el[(m, n)] * kc + el[(n, m)] * kc.conj();
                }
            }
            total += band;
            if d == 0 && r2 == 0.0 {
                // (√2 z)^d vanishes at the origin for every d ≥ 1.
                break;
            }
        }
        total / PI
    }
}

/// `L_k^{(a)}(x)` for `k = 0..count` by the three-term recurrence.
fn fill_laguerre(count: usize, a: f64, x: f64, out: &mut [f64]) {
    out[0] = 1.0;
    if count > 1 {
        out[1] = 1.0 + a - x;
    }
    for k in 1..count.saturating_sub(1) {
        let kf = k as f64;
        out[k + 1] = ((2.0 * kf + 1.0 + a - x) * out[k] - (kf + a) * out[k - 1]) / (kf + 1.0);
    }
}

/// Wigner function at one point via the Laguerre kernels.
pub fn wigner_point(rho: &ProbeState, q: f64, p: f64) -> f64 {
    let mut scratch = vec![0.0; rho.dim()];
    Kernel::new(rho).eval(q, p, &mut scratch).re
}

/// Wigner function on a square grid, rows evaluated in parallel.
///
/// Fails with a coverage error when `|Σ W Δq Δp − 1| > 1e-4`, and with a
/// numerical error when the discarded imaginary part exceeds `1e-10`.
pub fn wigner_grid(rho: &ProbeState, spec: GridSpec) -> Result<PhaseSpaceGrid> {
    let kernel = Kernel::new(rho);
    let axis = spec.axis();
    let np = axis.len();
    let mut values = vec![0.0; np * np];
    let residue = values
        .par_chunks_mut(np)
        .enumerate()
        .map_init(
            || vec![0.0; rho.dim()],
            |scratch, (i, row)| {
                let mut worst = 0.0f64;
                for (j, slot) in row.iter_mut().enumerate() {
                    let w = kernel.eval(axis[i], axis[j], scratch);
                    *slot = w.re;
                    worst = worst.max(w.im.abs());
                }
                worst
            },
        )
        .reduce(|| 0.0, f64::max);
    if residue > IMAG_TOL {
        return Err(Error::Numerical(format!("Wigner function has imaginary residue {residue:.3e}")));
    }
    let grid = PhaseSpaceGrid {
        q: axis.clone(),
        p: axis,
        values,
        imag_residue: residue,
    };
    let deficit = (grid.normalization() - 1.0).abs();
    if deficit > COVERAGE_TOL {
        return Err(Error::Coverage {
            deficit,
            tolerance: COVERAGE_TOL,
        });
    }
    Ok(grid)
}

pub fn wigner_min(grid: &PhaseSpaceGrid) -> f64 {
    grid.values.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// `(1/π) ∫ ⟨q + x|ρ|q − x⟩ e^{−2ipx} dx` by direct quadrature over
/// Hermite functions; slow, for validating [`wigner_grid`].
pub fn wigner_line_integral_oracle(rho: &ProbeState, q: f64, p: f64) -> f64 {
    let dim = rho.dim();
    let el = rho.elements();
    let reach = (2.0 * rho.mean_photon_number().max(0.0)).sqrt() + 12.0;
    let points = 8001;
    let h = 2.0 * reach / (points - 1) as f64;
    let mut plus = vec![0.0; dim];
    let mut minus = vec![0.0; dim];
    let mut acc = 0.0;
    for k in 0..points {
        let x = -reach + k as f64 * h;
        fill_hermite_functions(q + x, &mut plus);
        fill_hermite_functions(q - x, &mut minus);
        let mut inner = Complex64::new(0.0, 0.0);
        for n in 0..dim {
            if plus[n] == 0.0 {
                continue;
            }
            let mut row = Complex64::new(0.0, 0.0);
            for m in 0..dim {
                row += el[(n, m)] * minus[m];
            }
            inner += row * plus[n];
        }
        let w = if k == 0 || k + 1 == points { 0.5 * h } else { h };
        acc += w * (inner * Complex64::from_polar(1.0, -2.0 * p * x)).re;
    }
    acc / PI
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::KerrStrength;
    use crate::hilbert::{CMatrix, CoherentAmplitude, FockCutoff};
    use crate::metrology::{ProbeModel, StateFamily};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const INV_PI: f64 = 1.0 / PI;

    fn random_state(dim: usize, seed: u64) -> ProbeState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = CMatrix::from_fn(dim, dim, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
        let m = &a * a.adjoint();
        let tr = m.trace();
        ProbeState::new(m / tr).unwrap()
    }

    #[test]
    fn vacuum_peak() {
        let vac = ProbeState::fock(0, FockCutoff::new(3).unwrap()).unwrap();
        assert!((wigner_point(&vac, 0.0, 0.0) - INV_PI).abs() < 1e-15);
        assert!((wigner_line_integral_oracle(&vac, 0.0, 0.0) - INV_PI).abs() < 1e-8);
    }

    #[test]
    fn fock_one_reaches_lower_bound_at_origin() {
        let one = ProbeState::fock(1, FockCutoff::new(3).unwrap()).unwrap();
        assert!((wigner_point(&one, 0.0, 0.0) + INV_PI).abs() < 1e-15);
        let g = wigner_grid(&one, GridSpec::new(6.0, 121).unwrap()).unwrap();
        assert!((wigner_min(&g) + INV_PI).abs() < 1e-12);
    }

    #[test]
    fn coherent_state_is_displaced_vacuum() {
        let a = 2.0;
        let rho = ProbeState::coherent(CoherentAmplitude::new(a).unwrap(), FockCutoff::for_alpha(a)).unwrap();
        let q0 = SQRT_2 * a;
        assert!((wigner_point(&rho, q0, 0.0) - INV_PI).abs() < 1e-10);
        for (dq, dp) in [(0.3f64, 0.0f64), (0.0, -0.4), (0.5, 0.5)] {
            let expect = INV_PI * (-(dq * dq + dp * dp)).exp();
            assert!((wigner_point(&rho, q0 + dq, dp) - expect).abs() < 1e-10);
        }
        let g = wigner_grid(&rho, GridSpec::for_alpha(a)).unwrap();
        assert!(wigner_min(&g) >= -1e-9);
        assert!((g.normalization() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn imaginary_displacement_moves_along_p() {
        let amps: Vec<Complex64> = {
            let c = crate::hilbert::coherent_coefficients(CoherentAmplitude::new(1.5).unwrap(), FockCutoff::for_alpha(1.5), 1e-12).unwrap();
            c.iter().enumerate().map(|(n, v)| v * Complex64::i().powu(n as u32)).collect()
        };
        let rho = ProbeState::pure(&amps).unwrap();
        assert!((wigner_point(&rho, 0.0, SQRT_2 * 1.5) - INV_PI).abs() < 1e-10);
    }

    #[test]
    fn laguerre_path_matches_line_integral() {
        let rho = random_state(6, 42);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            let q = 6.0 * rng.random::<f64>() - 3.0;
            let p = 6.0 * rng.random::<f64>() - 3.0;
            let a = wigner_point(&rho, q, p);
            let b = wigner_line_integral_oracle(&rho, q, p);
            assert!((a - b).abs() < 1e-7, "({q}, {p}): {a} vs {b}");
        }
    }

    #[test]
    fn far_from_support_vanishes() {
        let rho = random_state(5, 1);
        assert!(wigner_line_integral_oracle(&rho, 14.0, -9.0).abs() <= 1e-12);
        assert!(wigner_point(&rho, 14.0, -9.0).abs() <= 1e-12);
    }

    #[test]
    fn small_grid_is_a_coverage_error() {
        let rho = ProbeState::coherent(CoherentAmplitude::new(3.0).unwrap(), FockCutoff::for_alpha(3.0)).unwrap();
        let err = wigner_grid(&rho, GridSpec::new(2.0, 41).unwrap()).unwrap_err();
        assert!(matches!(err, Error::Coverage { .. }));
    }

    #[test]
    fn kerr_cancellation_removes_negativity() {
        let g = 0.385;
        let m = ProbeModel::from_values(3.0, g, PI).unwrap();
        let before = wigner_grid(&m.state(0.25).unwrap(), GridSpec::for_alpha(3.0)).unwrap();
        let after = wigner_grid(
            &m.with_kerr(KerrStrength::cancelling(g)).state(0.25).unwrap(),
            GridSpec::for_alpha(3.0),
        )
        .unwrap();
        assert!(wigner_min(&before) < -0.01);
        assert!(wigner_min(&after) >= -1e-6);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn bounded_and_normalized(seed in 0u64..1000, dim in 2usize..8) {
            let rho = random_state(dim, seed);
            let g = wigner_grid(&rho, GridSpec::new(8.0, 161).unwrap()).unwrap();
            prop_assert!(wigner_min(&g) >= -INV_PI - 1e-9);
            prop_assert!(g.values.iter().all(|&w| w <= INV_PI + 1e-9));
            prop_assert!((g.normalization() - 1.0).abs() < 1e-6);
            prop_assert!(g.imag_residue <= IMAG_TOL);
        }
    }
}
