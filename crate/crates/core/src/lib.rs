//! Thermometry of a mechanical oscillator through the nonlinear optomechanical
//! interaction.
//!
//! A coherent optical probe interacts with a thermal mechanical oscillator via
//! radiation pressure. The reduced optical state carries the mean phonon number
//! `nbar` only through a phase-diffusion factor, while a temperature-independent
//! Kerr-like phase rotates it in phase space. This crate computes:
//!
//! - the reduced probe state in a truncated Fock basis ([`dynamics`]), together
//!   with a brute-force bipartite propagation used as an oracle;
//! - quantum Fisher information from the spectral SLD formula, homodyne
//!   classical Fisher information, coupling and local-oscillator optimizers and
//!   a Monte Carlo Bayesian estimator ([`metrology`]);
//! - the linearized (Gaussian) benchmark with covariance-matrix evolution
//!   ([`gaussian`]);
//! - Wigner functions of Fock-basis density matrices ([`wigner`]).
//!
//! All Fisher quantities are taken with respect to `nbar`.

// Guards are written as `!(x >= 0.0)` on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod error;
pub mod gaussian;
pub mod hilbert;
pub mod metrology;
pub mod wigner;

pub use error::{Error, Result};
pub use hilbert::{CMatrix, CoherentAmplitude, FockCutoff, OscillatorSpec, ProbeState};

use serde::{Deserialize, Serialize};

/// Snapshot of the physical configuration a result was computed at.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub alpha: f64,
    pub nbar: f64,
    pub g: f64,
    pub tau: f64,
    /// Kerr strength applied before detection (0 when absent).
    pub chi: f64,
    /// Optical Fock cutoff `n_max` (0 for covariance-matrix computations).
    pub n_max: usize,
}
