//! Fisher-information engines, optimizers and the Monte Carlo estimator.

mod estimation;
mod family;
mod homodyne;
mod optimize;
mod qfi;
mod sweep;

pub use estimation::{
    bayesian_estimate, sample_homodyne, EstimationRun, LikelihoodTable, PRIOR_EDGE_FRACTION,
};
pub use family::{derivative_finite_difference, FnFamily, ProbeForm, ProbeModel, StateFamily};
pub use homodyne::{
    cfi_homodyne, homodyne_pdf, optimal_phi_lo, BandDecomposition, CfiOptions, HomodyneFisher,
    HomodyneSetting, PhiOptimum, QuadratureGrid, DEFAULT_PDF_FLOOR,
};
pub use optimize::{find_gmax, golden_section_max, scan_then_refine, GmaxOptions, GmaxResult, Maximum};
pub use qfi::{qfi, sld, DerivativeScheme, FisherMethod, FisherResult, Numerics, QfiOptions};
pub use sweep::{sweep, Axis, SweepCell, SweepGrid};
