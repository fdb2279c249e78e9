use std::f64::consts::PI;

use optothermo::dynamics::{apply_kerr, probe_state, CouplingParams, KerrStrength};
use optothermo::hilbert::{dnbar_dtemperature, nbar_from_temperature, temperature_from_nbar};
use optothermo::metrology::{
    cfi_homodyne, qfi, CfiOptions, FisherMethod, HomodyneSetting, ProbeForm, ProbeModel, QfiOptions,
};
use optothermo::wigner::{wigner_grid, GridSpec};
use optothermo::{CoherentAmplitude, Error, FockCutoff, OscillatorSpec};
use proptest::prelude::*;

#[test]
fn fisher_results_carry_their_settings() {
    let m = ProbeModel::from_values(2.0, 0.3, PI).unwrap();
    let fq = qfi(&m, 0.5, &QfiOptions::default()).unwrap();
    assert_eq!(fq.method, FisherMethod::SldSpectral);
    assert_eq!(fq.params.alpha, 2.0);
    assert_eq!(fq.params.nbar, 0.5);
    assert_eq!(fq.params.n_max, m.cutoff.n_max());
    let fc = cfi_homodyne(&m, 0.5, HomodyneSetting::new(0.4).unwrap(), &CfiOptions::default()).unwrap();
    assert_eq!(fc.method, FisherMethod::HomodyneQuadrature);
    assert!(fc.numerics.quadrature_error.unwrap() < 1e-4);
    assert!(fc.value <= fq.value + 1e-6);
}

#[test]
fn temperature_chain_rescales_fisher_information() {
    // F_T = F_nbar (dnbar/dT)², checked against a finite difference in T.
    let omega = 2.0 * PI * 1e6;
    let t = temperature_from_nbar(0.5, omega).unwrap();
    let m = ProbeModel::from_values(2.0, 0.3, PI).unwrap();
    let f_n = qfi(&m, 0.5, &QfiOptions::default()).unwrap().value;
    let h = t * 1e-6;
    let slope = (nbar_from_temperature(t + h, omega).unwrap() - nbar_from_temperature(t - h, omega).unwrap()) / (2.0 * h);
    let d = dnbar_dtemperature(t, omega).unwrap();
    assert!((slope - d).abs() / d < 1e-8);
    assert!(f_n * d * d > 0.0);
}

#[test]
fn small_tau_form_agrees_at_short_times() {
    let exact = ProbeModel::from_values(1.5, 1.0, 0.01).unwrap();
    let short = exact.with_form(ProbeForm::SmallTau);
    let a = qfi(&exact, 0.3, &QfiOptions::default()).unwrap().value;
    let b = qfi(&short, 0.3, &QfiOptions::default()).unwrap().value;
    assert!((a - b).abs() / a < 1e-3, "{a} {b}");
}

#[test]
fn truncation_is_reported_not_hidden() {
    let err = probe_state(
        CoherentAmplitude::new(3.0).unwrap(),
        OscillatorSpec::new(0.5).unwrap(),
        CouplingParams::new(0.3, PI).unwrap(),
        FockCutoff::new(4).unwrap(),
    )
    .unwrap_err();
    assert!(matches!(err, Error::Truncation { .. }), "{err}");
}

#[test]
fn kerr_removes_wigner_negativity_of_cat_like_probe() {
    let g = 0.385;
    let rho = probe_state(
        CoherentAmplitude::new(3.0).unwrap(),
        OscillatorSpec::new(0.25).unwrap(),
        CouplingParams::new(g, PI).unwrap(),
        FockCutoff::for_alpha(3.0),
    )
    .unwrap();
    let spec = GridSpec::new(9.0, 121).unwrap();
    let before = wigner_grid(&rho, spec).unwrap();
    let after = wigner_grid(&apply_kerr(&rho, KerrStrength::cancelling(g)).unwrap(), spec).unwrap();
    let min = |v: &[f64]| v.iter().copied().fold(f64::INFINITY, f64::min);
    assert!(min(&before.values) < -0.01);
    assert!(min(&after.values) >= -1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn homodyne_never_beats_qfi(
        alpha in 0.5f64..3.0,
        g in 0.05f64..0.6,
        tau in 0.2f64..(2.0 * PI - 0.2),
        nbar in 0.0f64..1.5,
        chi in 0.0f64..2.0,
        phi in 0.0f64..PI,
    ) {
        let m = ProbeModel::from_values(alpha, g, tau).unwrap().with_kerr(KerrStrength::new(chi).unwrap());
        let fq = qfi(&m, nbar, &QfiOptions::default()).unwrap().value;
        let opts = CfiOptions { check_refinement: false, ..CfiOptions::default() };
        let fc = cfi_homodyne(&m, nbar, HomodyneSetting::new(phi).unwrap(), &opts).unwrap().value;
        prop_assert!(fc >= 0.0);
        prop_assert!(fc <= fq + 1e-6, "F_C {} > F_Q {}", fc, fq);
    }
}
