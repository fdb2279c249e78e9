//! Brute-force propagation of the joint light–mechanics system.
//!
//! The rescaled Hamiltonian `H = b†b − g a†a (b† + b)` conserves the photon
//! number, so in the truncated tensor-product space it is block diagonal with
//! one mechanical block `H_n = b†b − g n (b† + b)` per photon number `n`.
//! Each block is diagonalized numerically, the thermal oscillator is expanded
//! as the Fock mixture `p_k = nbar^k/(1 + nbar)^{k+1}`, and the mechanics is
//! traced out:
//!
//! ```text
//! ρ_nm(τ) = c_n c_m* Σ_k p_k ⟨k| U_m(τ)† U_n(τ) |k⟩,   U_n(τ) = exp(−i H_n τ)
//! ```
//!
//! Nothing here uses the closed-form displacement algebra, which makes it an
//! independent check of [`super::probe_state`].

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;

use super::CouplingParams;
use crate::error::{Error, Result};
use crate::hilbert::{
    coherent_coefficients, CMatrix, CoherentAmplitude, FockCutoff, OscillatorSpec, ProbeState,
    DEFAULT_TAIL_TOL,
};

/// Largest tolerated probability reaching the top of the mechanical basis.
pub const LEAKAGE_TOL: f64 = 1e-8;

/// Thermal populations below this are dropped (counted as leakage).
const THERMAL_TAIL: f64 = 1e-14;

/// Photon blocks with `|c_n|²` below this reuse the cutoff of the last
/// significant block; their matrix elements are bounded by `|c_n|`.
const PHOTON_WEIGHT_FLOOR: f64 = 1e-14;

/// Mechanical Fock truncation for the oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MechanicalCutoff {
    /// Same cutoff for every photon-number block.
    Fixed(FockCutoff),
    /// Per-block rule `ceil(20(nbar + 1) + d² + 8 d √(1 + 2 nbar))` with
    /// `d = 2 g n` the largest displacement reached in block `n`.
    Auto,
    /// The automatic rule with every block size multiplied by the factor,
    /// for doubling-convergence checks.
    AutoScaled(usize),
}

impl MechanicalCutoff {
    pub fn auto_n_max(nbar: f64, g: f64, n: usize) -> usize {
        let d = 2.0 * g * n as f64;
        (20.0 * (nbar + 1.0) + d * d + 8.0 * d * (1.0 + 2.0 * nbar).sqrt()).ceil() as usize
    }
}

struct Block {
    /// Eigenvalues of `H_n`.
    energies: DVector<f64>,
    /// Eigenvectors as columns.
    modes: DMatrix<f64>,
    /// Thermal-weighted population of the top of the basis.
    leakage: f64,
}

/// Diagonalized joint Hamiltonian; reusable for any interaction time.
pub struct BipartiteOracle {
    coeffs: Vec<f64>,
    thermal: Vec<f64>,
    thermal_tail: f64,
    blocks: Vec<Block>,
}

fn block_hamiltonian(g: f64, n: usize, dim: usize) -> DMatrix<f64> {
    let coupling = g * n as f64;
    DMatrix::from_fn(dim, dim, |i, j| {
        if i == j {
            i as f64
        } else if j == i + 1 {
            -coupling * (j as f64).sqrt()
        } else if i == j + 1 {
            -coupling * (i as f64).sqrt()
        } else {
            0.0
        }
    })
}

impl BipartiteOracle {
    pub fn new(
        alpha: CoherentAmplitude,
        osc: OscillatorSpec,
        g: f64,
        cutoff_light: FockCutoff,
        cutoff_mech: MechanicalCutoff,
    ) -> Result<Self> {
        if !g.is_finite() || g < 0.0 {
            return Err(Error::Domain(format!("coupling must be non-negative, got {g}")));
        }
        let coeffs: Vec<f64> = coherent_coefficients(alpha, cutoff_light, DEFAULT_TAIL_TOL)?
            .into_iter()
            .map(|z| z.re)
            .collect();
        let nbar = osc.nbar();

        // Last photon number whose weight matters.
        let n_sig = coeffs
            .iter()
            .rposition(|c| c * c >= PHOTON_WEIGHT_FLOOR)
            .unwrap_or(0);
        let dims: Vec<usize> = (0..coeffs.len())
            .map(|n| match cutoff_mech {
                MechanicalCutoff::Fixed(c) => c.dim(),
                MechanicalCutoff::Auto => MechanicalCutoff::auto_n_max(nbar, g, n.min(n_sig)) + 1,
                MechanicalCutoff::AutoScaled(k) => {
                    k * MechanicalCutoff::auto_n_max(nbar, g, n.min(n_sig)) + 1
                }
            })
            .collect();
        let max_dim = *dims.iter().max().unwrap_or(&1);

        let mut thermal = Vec::new();
        let mut mass = 0.0;
        let ratio = nbar / (1.0 + nbar);
        let mut p = 1.0 / (1.0 + nbar);
        for _ in 0..max_dim {
            thermal.push(p);
            mass += p;
            if 1.0 - mass < THERMAL_TAIL {
                break;
            }
            p *= ratio;
        }
        let thermal_tail = (1.0 - mass).max(0.0);

        let blocks = (0..coeffs.len())
            .into_par_iter()
            .map(|n| {
                let dim = dims[n];
                let eig = SymmetricEigen::try_new(block_hamiltonian(g, n, dim), f64::EPSILON, 0)
                    .ok_or_else(|| Error::Numerical(format!("block {n} eigensolver failed")))?;
                let edge = (dim / 10).max(5).min(dim);
                let k_max = thermal.len().min(dim);
                let mut leakage = 0.0;
                for l in 0..dim {
                    let edge_w: f64 = (dim - edge..dim).map(|i| eig.eigenvectors[(i, l)].powi(2)).sum();
                    if edge_w == 0.0 {
                        continue;
                    }
                    let start: f64 = (0..k_max)
                        .map(|k| thermal[k] * eig.eigenvectors[(k, l)].powi(2))
                        .sum();
                    leakage += start * edge_w;
                }
                Ok(Block {
                    energies: eig.eigenvalues,
                    modes: eig.eigenvectors,
                    leakage,
                })
            })
            .collect::<Result<Vec<_>>>()?;

        Ok(Self {
            coeffs,
            thermal,
            thermal_tail,
            blocks,
        })
    }

    /// Probability weight lost to the mechanical truncation.
    pub fn leakage(&self) -> f64 {
        self.thermal_tail
            + self
                .coeffs
                .iter()
                .zip(&self.blocks)
                .map(|(c, b)| c * c * b.leakage)
                .sum::<f64>()
    }

    /// Columns `U_n(τ)|k⟩` for the thermally populated `k`.
    fn propagated_columns(&self, n: usize, tau: f64) -> CMatrix {
        let b = &self.blocks[n];
        let dim = b.energies.len();
        let k_max = self.thermal.len().min(dim);
        let mut re = DMatrix::<f64>::zeros(dim, k_max);
        let mut im = DMatrix::<f64>::zeros(dim, k_max);
        // (V diag(e^{−iλτ}) Vᵀ)[:, k]
        let vt = b.modes.rows(0, k_max).transpose();
        let mut cos_part = vt.clone();
        let mut sin_part = vt;
        for l in 0..dim {
            let (s, c) = (-b.energies[l] * tau).sin_cos();
            cos_part.row_mut(l).scale_mut(c);
            sin_part.row_mut(l).scale_mut(s);
        }
        re.gemm(1.0, &b.modes, &cos_part, 0.0);
        im.gemm(1.0, &b.modes, &sin_part, 0.0);
        CMatrix::from_fn(dim, k_max, |i, k| Complex64::new(re[(i, k)], im[(i, k)]))
    }

    /// Reduced optical state at time `τ`.
    pub fn reduced_state(&self, tau: f64) -> Result<ProbeState> {
        let leakage = self.leakage();
        if leakage > LEAKAGE_TOL {
            return Err(Error::CutoffInsufficient {
                leakage,
                tolerance: LEAKAGE_TOL,
                context: "mechanical Fock basis of the bipartite oracle".into(),
            });
        }
        let cols: Vec<CMatrix> = (0..self.coeffs.len())
            .into_par_iter()
            .map(|n| self.propagated_columns(n, tau))
            .collect();
        let dim = self.coeffs.len();
        let mut rho = CMatrix::zeros(dim, dim);
        let entries: Vec<(usize, usize, Complex64)> = (0..dim)
            .into_par_iter()
            .flat_map_iter(|n| {
                let cols = &cols;
                (n..dim).map(move |m| {
                    let (un, um) = (&cols[n], &cols[m]);
                    let rows = un.nrows().min(um.nrows());
                    let ks = un.ncols().min(um.ncols());
                    let mut acc = Complex64::new(0.0, 0.0);
                    for k in 0..ks {
                        let mut s = Complex64::new(0.0, 0.0);
                        for i in 0..rows {
                            s += un[(i, k)] * um[(i, k)].conj();
                        }
                        acc += s * self.thermal[k];
                    }
                    (n, m, acc * self.coeffs[n] * self.coeffs[m])
                })
            })
            .collect();
        for (n, m, z) in entries {
            rho[(n, m)] = z;
            rho[(m, n)] = z.conj();
        }
        for n in 0..dim {
            rho[(n, n)].im = 0.0;
        }
        // The thermal truncation removes up to 1e-14 of the trace.
        let tr = rho.trace().re;
        if (tr - 1.0).abs() > 1e-9 {
            return Err(Error::CutoffInsufficient {
                leakage: (tr - 1.0).abs(),
                tolerance: 1e-9,
                context: "trace of the oracle's reduced state".into(),
            });
        }
        ProbeState::new(rho)
    }
}

/// One-shot oracle evaluation at the given coupling and time.
pub fn bipartite_oracle(
    alpha: CoherentAmplitude,
    osc: OscillatorSpec,
    cpl: CouplingParams,
    cutoff_light: FockCutoff,
    cutoff_mech: MechanicalCutoff,
) -> Result<ProbeState> {
    BipartiteOracle::new(alpha, osc, cpl.g(), cutoff_light, cutoff_mech)?.reduced_state(cpl.tau())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::probe_state;
    use std::f64::consts::PI;

    fn amp(a: f64) -> CoherentAmplitude {
        CoherentAmplitude::new(a).unwrap()
    }
    fn osc(n: f64) -> OscillatorSpec {
        OscillatorSpec::new(n).unwrap()
    }

    #[test]
    fn zero_coupling_leaves_coherent_state() {
        let cut = FockCutoff::for_alpha(1.0);
        let mech = MechanicalCutoff::Fixed(FockCutoff::new(40).unwrap());
        let coh = ProbeState::coherent(amp(1.0), cut).unwrap();
        for &t in &[0.3, PI, 4.0] {
            let s = bipartite_oracle(amp(1.0), osc(0.5), CouplingParams::new(0.0, t).unwrap(), cut, mech)
                .unwrap();
            assert!(s.max_distance(&coh) < 1e-12);
        }
    }

    #[test]
    fn pure_mechanics_matches_closed_form() {
        let cut = FockCutoff::for_alpha(1.0);
        let c = CouplingParams::new(0.3, PI).unwrap();
        let s = bipartite_oracle(amp(1.0), osc(0.0), c, cut, MechanicalCutoff::Auto).unwrap();
        let exact = probe_state(amp(1.0), osc(0.0), c, cut).unwrap();
        assert!(s.max_distance(&exact) <= 1e-8, "{}", s.max_distance(&exact));
    }

    #[test]
    fn thermal_mechanics_matches_with_fixed_cutoff_60() {
        let cut = FockCutoff::for_alpha(1.0);
        let c = CouplingParams::new(0.3, PI).unwrap();
        let mech = MechanicalCutoff::Fixed(FockCutoff::new(60).unwrap());
        let s = bipartite_oracle(amp(1.0), osc(1.0), c, cut, mech).unwrap();
        let exact = probe_state(amp(1.0), osc(1.0), c, cut).unwrap();
        assert!(s.max_distance(&exact) <= 1e-6, "{}", s.max_distance(&exact));
    }

    #[test]
    fn small_mechanical_basis_is_reported() {
        let cut = FockCutoff::for_alpha(1.5);
        let c = CouplingParams::new(0.6, PI).unwrap();
        let mech = MechanicalCutoff::Fixed(FockCutoff::new(8).unwrap());
        let err = bipartite_oracle(amp(1.5), osc(1.0), c, cut, mech).unwrap_err();
        assert!(matches!(err, Error::CutoffInsufficient { .. }), "{err}");
    }

    #[test]
    fn propagator_is_unitary() {
        let oracle = BipartiteOracle::new(
            amp(1.0),
            osc(0.5),
            0.4,
            FockCutoff::new(20).unwrap(),
            MechanicalCutoff::Fixed(FockCutoff::new(30).unwrap()),
        )
        .unwrap();
        for n in 0..7 {
            let b = &oracle.blocks[n];
            let dim = b.energies.len();
            let u = CMatrix::from_fn(dim, dim, |i, j| {
                (0..dim)
                    .map(|l| {
                        Complex64::from_polar(b.modes[(i, l)] * b.modes[(j, l)], -b.energies[l] * 1.7)
                    })
                    .sum()
            });
            let defect = (&u * u.adjoint() - CMatrix::identity(dim, dim))
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max);
            assert!(defect < 1e-10, "block {n}: {defect}");
        }
    }
}
