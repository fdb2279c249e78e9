use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The Fock truncation does not hold enough probability mass.
    #[error("truncation error: cutoff n_max = {n_max} leaves tail mass {tail:.3e} (tolerance {tolerance:.1e})")]
    Truncation { n_max: usize, tail: f64, tolerance: f64 },

    /// The mechanical (or other auxiliary) cutoff lets probability leak out.
    #[error("cutoff insufficient: leakage {leakage:.3e} exceeds {tolerance:.1e} ({context})")]
    CutoffInsufficient {
        leakage: f64,
        tolerance: f64,
        context: String,
    },

    /// An input violated a structural contract (Hermiticity, shape, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Numerical result failed a consistency check.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Quadrature or grid refinement did not converge.
    #[error("precision failure: {what} changed by {relative_change:.3e} on refinement (tolerance {tolerance:.1e})")]
    Precision {
        what: String,
        relative_change: f64,
        tolerance: f64,
    },

    /// A phase-space grid misses part of the state's support.
    #[error("coverage error: grid normalization deficit {deficit:.3e} exceeds {tolerance:.1e}")]
    Coverage { deficit: f64, tolerance: f64 },
}
