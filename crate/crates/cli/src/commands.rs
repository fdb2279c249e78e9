use std::f64::consts::{PI, TAU};

use optothermo::dynamics::{CouplingParams, KerrStrength};
use optothermo::gaussian::{homodyne_cfi_closed_form, GeneralDyneSetting, LinearizedProbe};
use optothermo::hilbert::{dnbar_dtemperature, nbar_from_temperature, temperature_from_nbar};
use optothermo::metrology::{
    cfi_homodyne, find_gmax, optimal_phi_lo, qfi, sample_homodyne, sweep, Axis, CfiOptions, GmaxOptions,
    HomodyneFisher, HomodyneSetting, LikelihoodTable, ProbeModel, QfiOptions, QuadratureGrid, StateFamily,
};
use optothermo::wigner::{wigner_grid, wigner_min, GridSpec};
use optothermo::{CoherentAmplitude, FockCutoff, OscillatorSpec};

use crate::config::{format_f64, Choice, Config};
use crate::output::Table;
use crate::CliError;

type Res<T> = Result<T, CliError>;

fn alpha(cfg: &Config, default: f64) -> Res<CoherentAmplitude> {
    Ok(CoherentAmplitude::new(cfg.f64("alpha", default)?)?)
}

/// `nbar` directly, or from `temperature` (K) and `omega` (rad/s).
fn nbar(cfg: &Config, default: f64) -> Res<f64> {
    match cfg.opt_f64("temperature")? {
        Some(t) => {
            let omega = cfg
                .opt_f64("omega")?
                .ok_or_else(|| CliError::Config("`temperature` needs `omega` (rad/s)".into()))?;
            let n = nbar_from_temperature(t, omega)?;
            cfg.record("nbar", format_f64(n));
            Ok(n)
        }
        None => {
            let n = cfg.f64("nbar", default)?;
            OscillatorSpec::new(n)?;
            Ok(n)
        }
    }
}

fn cutoff(cfg: &Config, alpha: CoherentAmplitude) -> Res<FockCutoff> {
    let c = match cfg.opt_usize("n_max")? {
        Some(n) => FockCutoff::new(n)?,
        None => FockCutoff::for_alpha(alpha.value()),
    };
    cfg.record("n_max", c.n_max().to_string());
    Ok(c)
}

fn gmax_options(cfg: &Config, cut: FockCutoff) -> Res<GmaxOptions> {
    let d = GmaxOptions::default();
    Ok(GmaxOptions {
        g_range: (cfg.f64("g_min", d.g_range.0)?, cfg.f64("g_max", d.g_range.1)?),
        points: cfg.usize("g_points", d.points)?,
        cutoff: Some(cut),
        ..d
    })
}

/// `g` as given, or `g_max` at `(alpha, gmax_nbar, tau)` for `g = "auto"`.
fn coupling(cfg: &Config, a: CoherentAmplitude, tau: f64, cut: FockCutoff, ref_nbar: f64) -> Res<CouplingParams> {
    let g = match cfg.choice("g", "auto", Choice::Keyword)? {
        Choice::Value(g) => g,
        Choice::Keyword => {
            let n_ref = cfg.f64("gmax_nbar", ref_nbar)?;
            let r = find_gmax(a, OscillatorSpec::new(n_ref)?, tau, &gmax_options(cfg, cut)?)?;
            if r.boundary {
                eprintln!("warning: g_max lies on the edge of the search range");
            }
            cfg.record("g_mode", "\"auto\"".into());
            r.g_max
        }
    };
    cfg.record("g", format_f64(g));
    Ok(CouplingParams::new(g, tau)?)
}

/// `chi` as given, or the value cancelling the coherent phase.
fn kerr(cfg: &Config, cpl: &CouplingParams) -> Res<KerrStrength> {
    let k = match cfg.choice("chi", "cancel", Choice::Keyword)? {
        Choice::Value(x) => KerrStrength::new(x)?,
        Choice::Keyword => {
            cfg.record("chi_mode", "\"cancel\"".into());
            KerrStrength::cancelling_at(cpl)
        }
    };
    cfg.record("chi", format_f64(k.value()));
    Ok(k)
}

fn quadrature(cfg: &Config, a: CoherentAmplitude) -> Res<QuadratureGrid> {
    let d = QuadratureGrid::for_alpha(a.value());
    let points = cfg.usize("quadrature_points", d.points)?;
    Ok(QuadratureGrid::new(d.half_width, points)?)
}

fn cfi_options(grid: QuadratureGrid) -> CfiOptions {
    CfiOptions {
        grid: Some(grid),
        ..CfiOptions::default()
    }
}

fn sld_notes(t: &mut Table) {
    let o = QfiOptions::default();
    t.note("qfi_method", "sld_spectral");
    t.note("eigenvalue_floor", format_f64(o.eigenvalue_floor));
    t.note("derivative", "analytic");
}

fn homodyne_notes(t: &mut Table, grid: QuadratureGrid) {
    t.note("cfi_method", "homodyne_quadrature");
    t.note("quadrature_half_width", format_f64(grid.half_width));
    t.note("quadrature_points", grid.points);
    t.note("pdf_floor", format_f64(CfiOptions::default().pdf_floor));
}

/// Distance of `phi` from the nearest multiple of π.
fn distance_mod_pi(phi: f64) -> f64 {
    let r = phi.rem_euclid(PI);
    r.min(PI - r)
}

pub fn qfi_map(cfg: &Config) -> Res<Table> {
    let a = alpha(cfg, 2.0)?;
    let n = nbar(cfg, 1.0)?;
    let cut = cutoff(cfg, a)?;
    let axes = vec![
        Axis::uniform("g", cfg.f64("g_min", 0.0)?, cfg.f64("g_max", 2.0)?, cfg.usize("g_points", 60)?)?,
        Axis::uniform("tau", cfg.f64("tau_min", 0.0)?, cfg.f64("tau_max", TAU)?, cfg.usize("tau_points", 60)?)?,
    ];
    let grid = sweep(axes, |p| {
        let m = ProbeModel::new(a, CouplingParams::new(p[0], p[1])?).with_cutoff(cut);
        qfi(&m, n, &QfiOptions::default())
    })?;
    let mut t = Table::new(vec!["g", "tau", "fq"]);
    sld_notes(&mut t);
    let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
    let mut excluded = 0;
    for c in &grid.cells {
        t.push_f64(&[c.point[0], c.point[1], c.value.value]);
        excluded = excluded.max(c.value.numerics.excluded_pairs);
        if c.value.value > best.0 {
            best = (c.value.value, c.point[0], c.point[1]);
        }
    }
    t.note("max_excluded_pairs", excluded);
    t.summary("fq_max", format_f64(best.0));
    t.summary("fq_max_at_g", format_f64(best.1));
    t.summary("fq_max_at_tau", format_f64(best.2));
    Ok(t)
}

pub fn qfi_vs_nbar(cfg: &Config) -> Res<Table> {
    let a = alpha(cfg, 2.0)?;
    let tau = cfg.f64("tau", PI)?;
    let cut = cutoff(cfg, a)?;
    let opts = gmax_options(cfg, cut)?;
    let axis = Axis::uniform(
        "nbar",
        cfg.f64("nbar_min", 0.0)?,
        cfg.f64("nbar_max", 2.0)?,
        cfg.usize("nbar_points", 21)?,
    )?;
    let omega = cfg.opt_f64("omega")?;
    let grid = sweep(vec![axis], |p| find_gmax(a, OscillatorSpec::new(p[0])?, tau, &opts))?;
    let mut cols = vec!["nbar", "g_max", "fq_max", "fq_limit"];
    if omega.is_some() {
        cols.extend(["temperature", "fq_temperature"]);
    }
    let mut t = Table::new(cols);
    sld_notes(&mut t);
    t.note("gmax_search", "grid scan then golden section");
    t.note("gmax_tolerance", format_f64(opts.tol));
    let mut boundary = 0;
    let mut above_limit = 0;
    for c in &grid.cells {
        let n = c.point[0];
        let r = c.value;
        let limit = 2.0 / (1.0 + 2.0 * n).powi(2);
        boundary += r.boundary as usize;
        above_limit += (r.f_q_max > limit + 1e-6) as usize;
        let mut row: Vec<String> = [n, r.g_max, r.f_q_max, limit].iter().map(|x| format_f64(*x)).collect();
        if let Some(w) = omega {
            if n > 0.0 {
                let temp = temperature_from_nbar(n, w)?;
                let d = dnbar_dtemperature(temp, w)?;
                row.push(format_f64(temp));
                row.push(format_f64(r.f_q_max * d * d));
            } else {
                row.extend([String::new(), String::new()]);
            }
        }
        t.push(row);
    }
    t.summary("boundary_maxima", boundary);
    t.summary("rows_above_limit", above_limit);
    Ok(t)
}

pub fn gmax(cfg: &Config) -> Res<Table> {
    let a = alpha(cfg, 2.0)?;
    let n = nbar(cfg, 1.0)?;
    let tau = cfg.f64("tau", PI)?;
    let cut = cutoff(cfg, a)?;
    let r = find_gmax(a, OscillatorSpec::new(n)?, tau, &gmax_options(cfg, cut)?)?;
    let temperature = cfg.opt_f64("temperature")?;
    let mut cols = vec!["alpha", "nbar", "tau", "g_max", "fq_max", "boundary"];
    if temperature.is_some() {
        cols.extend(["temperature", "fq_temperature"]);
    }
    let mut t = Table::new(cols);
    sld_notes(&mut t);
    let mut row: Vec<String> = [a.value(), n, tau, r.g_max, r.f_q_max].iter().map(|x| format_f64(*x)).collect();
    row.push(r.boundary.to_string());
    if let (Some(temp), Some(w)) = (temperature, cfg.opt_f64("omega")?) {
        let d = dnbar_dtemperature(temp, w)?;
        row.push(format_f64(temp));
        row.push(format_f64(r.f_q_max * d * d));
    }
    t.push(row);
    Ok(t)
}

pub fn fisher_ratio_map(cfg: &Config) -> Res<Table> {
    let a = alpha(cfg, 3.0)?;
    let tau = cfg.f64("tau", PI)?;
    let cut = cutoff(cfg, a)?;
    let cpl = coupling(cfg, a, tau, cut, 0.25)?;
    let chi_max = kerr(cfg, &cpl)?.value();
    let phi = cfg.choice("phi_lo", "auto", Choice::Keyword)?;
    cfg.record(
        "phi_lo",
        match phi {
            Choice::Value(x) => format_f64(x),
            Choice::Keyword => "\"auto\"".into(),
        },
    );
    let scan = cfg.usize("phi_scan_points", 64)?;
    let grid = quadrature(cfg, a)?;
    let axes = vec![
        Axis::uniform("chi", 0.0, chi_max, cfg.usize("chi_points", 11)?)?,
        Axis::uniform(
            "nbar",
            cfg.f64("nbar_min", 0.0)?,
            cfg.f64("nbar_max", 1.5)?,
            cfg.usize("nbar_points", 16)?,
        )?,
    ];
    let opts = cfi_options(grid);
    let base = ProbeModel::new(a, cpl).with_cutoff(cut);
    let cells = sweep(axes, |p| {
        let m = base.with_kerr(KerrStrength::new(p[0])?);
        match phi {
            Choice::Keyword => {
                let o = optimal_phi_lo(&m, p[1], scan, &opts)?;
                // The scan itself skips refinement; audit the winning phase.
                cfi_homodyne(&m, p[1], HomodyneSetting::new(o.phi_star)?, &opts)?;
                Ok((o.ratio, o.phi_star))
            }
            Choice::Value(x) => {
                let c = cfi_homodyne(&m, p[1], HomodyneSetting::new(x)?, &opts)?.value;
                let q = qfi(&m, p[1], &opts.qfi)?.value;
                Ok((if q > 0.0 { c / q } else { 0.0 }, x))
            }
        }
    })?;
    let mut t = Table::new(vec!["chi", "nbar", "ratio", "phi_star"]);
    sld_notes(&mut t);
    homodyne_notes(&mut t, grid);
    t.note("phi_scan_points", scan);
    let mut worst_ratio: f64 = 0.0;
    let mut cancel_min_ratio = f64::INFINITY;
    let mut cancel_phi_dev: f64 = 0.0;
    for c in &cells.cells {
        let (ratio, phi_star) = c.value;
        t.push_f64(&[c.point[0], c.point[1], ratio, phi_star]);
        worst_ratio = worst_ratio.max(ratio);
        if c.point[0] == chi_max {
            cancel_min_ratio = cancel_min_ratio.min(ratio);
            cancel_phi_dev = cancel_phi_dev.max(distance_mod_pi(phi_star));
        }
    }
    t.summary("max_ratio", format_f64(worst_ratio));
    t.summary("chi_max_min_ratio", format_f64(cancel_min_ratio));
    t.summary("chi_max_phi_star_max_offset", format_f64(cancel_phi_dev));
    Ok(t)
}

pub fn phi_sweep(cfg: &Config) -> Res<Table> {
    let a = alpha(cfg, 3.0)?;
    let tau = cfg.f64("tau", PI)?;
    let cut = cutoff(cfg, a)?;
    let cpl = coupling(cfg, a, tau, cut, 0.25)?;
    let k = kerr(cfg, &cpl)?;
    let nbars = cfg.list("nbar_values", &[0.1, 0.5, 1.0])?;
    let points = cfg.usize("phi_points", 129)?;
    let scan = cfg.usize("phi_scan_points", 64)?;
    let grid = quadrature(cfg, a)?;
    let opts = cfi_options(grid);
    let m = ProbeModel::new(a, cpl).with_cutoff(cut).with_kerr(k);
    let phis = Axis::uniform("phi", 0.0, PI, points)?;
    let mut t = Table::new(vec!["nbar", "phi", "cfi", "qfi", "ratio"]);
    sld_notes(&mut t);
    homodyne_notes(&mut t, grid);
    for &n in &nbars {
        let q = qfi(&m, n, &opts.qfi)?.value;
        let rho = m.state(n)?;
        let d = m
            .analytic_derivative(n)
            .ok_or_else(|| CliError::Config("model lacks an analytic derivative".into()))?;
        let f = HomodyneFisher::new(rho.elements(), &d, grid);
        for &phi in &phis.values {
            let c = f.cfi(phi);
            t.push_f64(&[n, phi, c, q, if q > 0.0 { c / q } else { 0.0 }]);
        }
        let o = optimal_phi_lo(&m, n, scan, &opts)?;
        cfi_homodyne(&m, n, HomodyneSetting::new(o.phi_star)?, &opts)?;
        t.summary(&format!("phi_star[nbar={}]", format_f64(n)), format_f64(o.phi_star));
        t.summary(&format!("ratio_max[nbar={}]", format_f64(n)), format_f64(o.ratio));
    }
    Ok(t)
}

pub fn wigner(cfg: &Config) -> Res<Table> {
    let a = alpha(cfg, 3.0)?;
    let n = nbar(cfg, 0.25)?;
    let tau = cfg.f64("tau", PI)?;
    let cut = cutoff(cfg, a)?;
    let cpl = coupling(cfg, a, tau, cut, n)?;
    let k = kerr(cfg, &cpl)?;
    let d = GridSpec::for_alpha(a.value());
    let spec = GridSpec::new(
        cfg.f64("wigner_half_width", d.half_width)?,
        cfg.usize("wigner_points", d.points)?,
    )?;
    let base = ProbeModel::new(a, cpl).with_cutoff(cut);
    let mut t = Table::new(vec!["variant", "q", "p", "w"]);
    t.note("wigner_method", "laguerre_kernel");
    for (name, model) in [("pre_kerr", base), ("post_kerr", base.with_kerr(k))] {
        let g = wigner_grid(&model.state(n)?, spec)?;
        for (q, p, w) in g.rows() {
            t.push(vec![name.to_string(), format_f64(q), format_f64(p), format_f64(w)]);
        }
        t.summary(&format!("min_w_{name}"), format_f64(wigner_min(&g)));
        t.summary(&format!("normalization_{name}"), format_f64(g.normalization()));
        t.summary(&format!("imag_residue_{name}"), format_f64(g.imag_residue));
    }
    Ok(t)
}

pub fn gaussian(cfg: &Config) -> Res<Table> {
    let n = nbar(cfg, 1.0)?;
    let gs = cfg.list("g_values", &[0.02, 0.05, 0.1, 0.2, 0.3])?;
    let alphas = cfg.list("alpha_values", &[1.0, 2.0, 3.0, 4.0, 5.0])?;
    let taus = cfg.list("tau_values", &[PI / 4.0, PI / 2.0, PI, 1.5 * PI, TAU])?;
    let theta = cfg.f64("theta", PI / 2.0)?;
    let setting = GeneralDyneSetting::homodyne(theta)?;
    let mut t = Table::new(vec![
        "g",
        "alpha",
        "tau",
        "sigma_max_dev",
        "fq_numeric",
        "fq_closed",
        "fq_rel_dev",
        "fc_generaldyne",
        "fc_closed",
    ]);
    t.note("covariance_convention", "vacuum = identity");
    t.note("homodyne_z", format_f64(setting.z()));
    let (mut sig_dev, mut fq_dev, mut fc_dev): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for &g in &gs {
        for &al in &alphas {
            for &tau in &taus {
                let p = LinearizedProbe::new(g, al, tau)?;
                let (s, _) = p.sigma_l_numeric(n)?;
                let dev = (s - p.sigma_l(n)).amax();
                let numeric = p.qfi_numeric(n)?.value;
                let closed = optothermo::gaussian::gaussian_qfi_closed_form(g, al, n, tau);
                let rel = if closed != 0.0 { (numeric - closed).abs() / closed.abs() } else { numeric.abs() };
                let fc = p.generaldyne_cfi(n, setting)?.value;
                let fc_closed = if (tau - PI).abs() < 1e-12 {
                    let c = homodyne_cfi_closed_form(g, al, n, theta);
                    fc_dev = fc_dev.max((fc - c).abs() / c.abs().max(1e-300));
                    format_f64(c)
                } else {
                    String::new()
                };
                sig_dev = sig_dev.max(dev);
                fq_dev = fq_dev.max(rel);
                t.push(vec![
                    format_f64(g),
                    format_f64(al),
                    format_f64(tau),
                    format_f64(dev),
                    format_f64(numeric),
                    format_f64(closed),
                    format_f64(rel),
                    format_f64(fc),
                    fc_closed,
                ]);
            }
        }
    }
    t.summary("sigma_max_dev", format_f64(sig_dev));
    t.summary("fq_max_rel_dev", format_f64(fq_dev));
    t.summary("fc_max_rel_dev_tau_pi", format_f64(fc_dev));
    Ok(t)
}

pub fn estimate(cfg: &Config) -> Res<Table> {
    let a = alpha(cfg, 3.0)?;
    let n = nbar(cfg, 0.5)?;
    let tau = cfg.f64("tau", PI)?;
    let cut = cutoff(cfg, a)?;
    let cpl = coupling(cfg, a, tau, cut, n)?;
    let k = kerr(cfg, &cpl)?;
    let grid = quadrature(cfg, a)?;
    let opts = cfi_options(grid);
    let m = ProbeModel::new(a, cpl).with_cutoff(cut).with_kerr(k);
    let phi = match cfg.choice("phi_lo", "auto", Choice::Keyword)? {
        Choice::Value(x) => x,
        Choice::Keyword => {
            cfg.record("phi_lo_mode", "\"auto\"".into());
            optimal_phi_lo(&m, n, cfg.usize("phi_scan_points", 64)?, &opts)?.phi_star
        }
    };
    cfg.record("phi_lo", format_f64(phi));
    let setting = HomodyneSetting::new(phi)?;
    let samples = cfg.usize("samples", 10_000)?;
    let seeds = cfg.u64("seeds", 50)?;
    let seed0 = cfg.u64("seed", 1)?;
    let prior = (
        cfg.f64("prior_min", (n - 0.25).max(0.0))?,
        cfg.f64("prior_max", n + 0.25)?,
    );
    let prior_points = cfg.usize("prior_points", 401)?;
    let fc = cfi_homodyne(&m, n, setting, &opts)?.value;
    let xgrid = QuadratureGrid::new(grid.half_width, 4001)?;
    let table = LikelihoodTable::build(&m, setting, prior, prior_points, xgrid)?;
    let rho = m.state(n)?;
    let mut t = Table::new(vec!["seed", "m", "estimate", "variance", "cfi", "product"]);
    homodyne_notes(&mut t, grid);
    t.note("estimator", "flat-prior posterior mean");
    t.note("sampler", "inverse cdf, chacha8 per seed");
    let (mut sum_prod, mut sum_est, mut sum_est2, mut warnings) = (0.0, 0.0, 0.0, 0);
    for s in seed0..seed0 + seeds {
        let run = table.posterior(sample_homodyne(&rho, setting, samples, s));
        let product = samples as f64 * run.variance * fc;
        sum_prod += product;
        sum_est += run.estimate;
        sum_est2 += run.estimate * run.estimate;
        warnings += run.boundary_warning as usize;
        t.push(vec![
            s.to_string(),
            samples.to_string(),
            format_f64(run.estimate),
            format_f64(run.variance),
            format_f64(fc),
            format_f64(product),
        ]);
    }
    let count = seeds.max(1) as f64;
    let mean_est = sum_est / count;
    t.summary("mean_product", format_f64(sum_prod / count));
    t.summary("mean_estimate", format_f64(mean_est));
    if seeds > 1 {
        let spread = (sum_est2 - count * mean_est * mean_est) / (count - 1.0);
        t.summary("estimate_spread_product", format_f64(samples as f64 * spread * fc));
    }
    t.summary("prior_edge_warnings", warnings);
    Ok(t)
}
