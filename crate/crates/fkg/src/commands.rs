//! Subcommands. Each one turns a validated [`Experiment`] into a [`Report`].

use fkg_core::appendix::{gu_position, large_distance_decay, momentum_scaling_window};
use fkg_core::bounds::{composite_kernel_bounds, lower_bound_kernel, upper_bound_kernel, BoundValue};
use fkg_core::exec::ChunkExecutor;
use fkg_core::green::{
    fit_scaling_exponent, green_momentum, omega, sandwich_check, GreenMethod, GreensValue, ScalingFit,
};
use fkg_core::kernel::{fk_kernel_momentum, second_moment, MomentMode};
use fkg_core::potentials::{AnalysisMode, MomentumForm};
use serde_json::{json, Value};

use crate::config::{in_window, potential_spec_of, ExperimentConfig, Experiment, Source, ValidationError};
use crate::output::{echo, PlotSeries, Provenance, Report, RowBuilder};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Validation(#[from] ValidationError),
    #[error("{context}: {source}")]
    Core {
        context: String,
        #[source]
        source: fkg_core::Error,
    },
    #[error("selftest failed: {0}")]
    Selftest(String),
}

impl CliError {
    pub fn core(context: impl Into<String>, source: fkg_core::Error) -> Self {
        CliError::Core {
            context: context.into(),
            source,
        }
    }

    /// The process exit code for this error class.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Core { source, .. } => {
                if source.is_numerical() {
                    2
                } else {
                    1
                }
            }
            CliError::Selftest(_) => 3,
        }
    }
}

trait Context<T> {
    fn ctx(self, what: impl FnOnce() -> String) -> Result<T, CliError>;
}

impl<T> Context<T> for fkg_core::Result<T> {
    fn ctx(self, what: impl FnOnce() -> String) -> Result<T, CliError> {
        self.map_err(|e| CliError::core(what(), e))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Subcommand {
    Kernel,
    Bounds,
    Green,
    Scaling,
    Moments,
    Position,
    Metric,
    Selftest,
}

impl Subcommand {
    pub fn name(self) -> &'static str {
        match self {
            Subcommand::Kernel => "kernel",
            Subcommand::Bounds => "bounds",
            Subcommand::Green => "green",
            Subcommand::Scaling => "scaling",
            Subcommand::Moments => "moments",
            Subcommand::Position => "position",
            Subcommand::Metric => "metric",
            Subcommand::Selftest => "selftest",
        }
    }
}

fn prov(ex: &Experiment) -> Option<Provenance> {
    Some(Provenance {
        seed: ex.mc.seed,
        n_paths: ex.mc.n_paths,
        n_steps: ex.mc.n_steps,
    })
}

fn mc_echo(ex: &Experiment) -> Value {
    json!({
        "dirichlet": ex.mc.dirichlet,
        "antithetic": ex.mc.antithetic,
        "chunk_size": ex.mc.chunk_size,
    })
}

fn point_label(i: usize, eta: f64, eta_p: f64) -> String {
    format!("point {i}: eta={eta} eta_p={eta_p}")
}

pub fn kernel<E: ChunkExecutor>(exec: &E, ex: &Experiment) -> Result<Report, CliError> {
    ex.require(AnalysisMode::MonteCarlo)?;
    let taus = ex.taus()?;
    let momenta = ex.momenta()?;
    let rb = RowBuilder::new(&ex.config.output.experiment_id);
    let mut report = Report::default();
    for (i, &(eta, eta_p)) in ex.points.iter().enumerate() {
        for (j, &pn) in momenta.iter().enumerate() {
            let p = ex.momentum(pn);
            let mut plot = PlotSeries::new(
                format!("kernel_point{i}_p{j}"),
                format!("tau value std_error ({}, |p|={pn})", point_label(i, eta, eta_p)),
            );
            for &tau in taus {
                let est = fk_kernel_momentum(exec, eta, eta_p, tau, &p, &ex.form, &ex.w, &ex.mc)
                    .ctx(|| format!("kernel at eta={eta}, eta_p={eta_p}, tau={tau}, |p|={pn}"))?;
                let mut inputs = echo([
                    ("eta", eta.into()),
                    ("eta_p", eta_p.into()),
                    ("tau", tau.into()),
                    ("p", json!(p)),
                    ("mc", mc_echo(ex)),
                ]);
                if ex.mc.dirichlet {
                    inputs["acceptance"] = est.acceptance.into();
                }
                report
                    .rows
                    .push(rb.row("kernel", inputs, est.mean, Some(est.std_error), "mc", prov(ex)));
                plot.push(tau, est.mean, Some(est.std_error));
            }
            report.plots.push(plot);
        }
    }
    report.summary.push(format!("{} kernel estimates", report.rows.len()));
    Ok(report)
}

fn kernel_bounds(ex: &Experiment, eta: f64, eta_p: f64, tau: f64, p: &[f64]) -> fkg_core::Result<(BoundValue, BoundValue)> {
    if matches!(ex.form, MomentumForm::Composite { .. }) {
        composite_kernel_bounds(eta, eta_p, tau, p, &ex.form, &ex.w, &ex.tol)
    } else {
        Ok((
            lower_bound_kernel(eta, eta_p, tau, p, &ex.form, &ex.w, &ex.tol)?,
            upper_bound_kernel(eta, eta_p, tau, p, &ex.form, &ex.w, &ex.tol)?,
        ))
    }
}

pub fn bounds(ex: &Experiment) -> Result<Report, CliError> {
    ex.require(AnalysisMode::LowerBound)?;
    let taus = ex.taus()?;
    let momenta = ex.momenta()?;
    let rb = RowBuilder::new(&ex.config.output.experiment_id);
    let mut report = Report::default();
    for (i, &(eta, eta_p)) in ex.points.iter().enumerate() {
        for (j, &pn) in momenta.iter().enumerate() {
            let p = ex.momentum(pn);
            let label = format!("{}, |p|={pn}", point_label(i, eta, eta_p));
            let mut lo_plot = PlotSeries::new(format!("bounds_lower_point{i}_p{j}"), format!("tau lower error ({label})"));
            let mut hi_plot = PlotSeries::new(format!("bounds_upper_point{i}_p{j}"), format!("tau upper error ({label})"));
            for &tau in taus {
                let (lo, hi) = kernel_bounds(ex, eta, eta_p, tau, &p)
                    .ctx(|| format!("bounds at eta={eta}, eta_p={eta_p}, tau={tau}, |p|={pn}"))?;
                let inputs = echo([
                    ("eta", eta.into()),
                    ("eta_p", eta_p.into()),
                    ("tau", tau.into()),
                    ("p", json!(p)),
                    ("rel_tol", ex.tol.rel.into()),
                ]);
                report
                    .rows
                    .push(rb.row("bounds", inputs.clone(), lo.value, Some(lo.abs_error_estimate), "lower", None));
                report
                    .rows
                    .push(rb.row("bounds", inputs, hi.value, Some(hi.abs_error_estimate), "upper", None));
                lo_plot.push(tau, lo.value, Some(lo.abs_error_estimate));
                hi_plot.push(tau, hi.value, Some(hi.abs_error_estimate));
            }
            report.plots.push(lo_plot);
            report.plots.push(hi_plot);
        }
    }
    report.summary.push(format!("{} bound values", report.rows.len()));
    Ok(report)
}

fn green_echo(ex: &Experiment, v: &GreensValue) -> Value {
    echo([
        ("eta", v.eta.into()),
        ("eta_p", v.eta_p.into()),
        ("p", json!(v.p)),
        ("rel_tol", ex.tol.rel.into()),
        ("lambda", ex.config.fits.lambda.into()),
    ])
}

pub fn green<E: ChunkExecutor>(exec: &E, ex: &Experiment) -> Result<Report, CliError> {
    ex.require(AnalysisMode::LowerBound)?;
    let momenta = ex.momenta()?;
    let lambda = ex.config.fits.lambda;
    let rb = RowBuilder::new(&ex.config.output.experiment_id);
    let mut report = Report::default();
    let mut failures = 0;
    for (i, &(eta, eta_p)) in ex.points.iter().enumerate() {
        let rows = sandwich_check(exec, &momenta, &ex.form, &ex.w, eta, eta_p, lambda, &ex.green)
            .ctx(|| format!("green sandwich at eta={eta}, eta_p={eta_p}"))?;
        let mut plots: Vec<PlotSeries> = ["lower", "mc", "upper"]
            .iter()
            .map(|m| PlotSeries::new(format!("green_{m}_point{i}"), format!("p {m} error ({})", point_label(i, eta, eta_p))))
            .collect();
        let mut free_plot = PlotSeries::new(format!("green_free_field_point{i}"), format!("p free_field ({})", point_label(i, eta, eta_p)));
        for row in rows {
            let mut mc_inputs = green_echo(ex, &row.mc);
            mc_inputs["tau_points"] = ex.green.tau_points.into();
            mc_inputs["tau_span"] = ex.green.tau_span.into();
            mc_inputs["mc"] = mc_echo(ex);
            report
                .rows
                .push(rb.row("green", green_echo(ex, &row.lower), row.lower.value, Some(row.lower.error), "lower", None));
            report
                .rows
                .push(rb.row("green", mc_inputs, row.mc.value, Some(row.mc.error), "mc", prov(ex)));
            report
                .rows
                .push(rb.row("green", green_echo(ex, &row.upper), row.upper.value, Some(row.upper.error), "upper", None));
            for (k, v) in [&row.lower, &row.mc, &row.upper].into_iter().enumerate() {
                plots[k].push(row.p_norm, v.value, Some(v.error));
            }
            if let Some(tl) = row.theorem_lower {
                report
                    .rows
                    .push(rb.row("green", green_echo(ex, &row.lower), tl, None, "theorem_lower", None));
            }
            if let Some(tu) = row.theorem_upper {
                report
                    .rows
                    .push(rb.row("green", green_echo(ex, &row.upper), tu, None, "theorem_upper", None));
            }
            match green_momentum(exec, eta, eta_p, &row.lower.p, &ex.form, &ex.w, GreenMethod::FreeField, &ex.green) {
                Ok(v) => {
                    report.rows.push(rb.row("green", green_echo(ex, &v), v.value, Some(0.0), "free_field", None));
                    free_plot.push(row.p_norm, v.value, None);
                }
                Err(fkg_core::Error::Domain(_)) => {}
                Err(e) => return Err(CliError::core(format!("free-field green at |p|={}", row.p_norm), e)),
            }
            let pass = row.pass();
            if !pass {
                failures += 1;
            }
            let mut inputs = green_echo(ex, &row.mc);
            inputs["mc_inside"] = row.mc_inside.into();
            inputs["theorem_holds"] = row.theorem_holds.into();
            report.rows.push(rb.row(
                "sandwich",
                inputs,
                if pass { 1.0 } else { 0.0 },
                None,
                if pass { "pass" } else { "fail" },
                prov(ex),
            ));
            report.summary.push(format!(
                "{} |p|={}: lower {:.6e} <= mc {:.6e} +- {:.1e} <= upper {:.6e}: {}",
                point_label(i, eta, eta_p),
                row.p_norm,
                row.lower.value,
                row.mc.value,
                row.mc.error,
                row.upper.value,
                if pass { "ok" } else { "VIOLATED" }
            ));
        }
        report.plots.extend(plots);
        if !free_plot.points.is_empty() {
            report.plots.push(free_plot);
        }
    }
    report.summary.push(format!("sandwich violations: {failures}"));
    Ok(report)
}

fn fit_echo(fit: &ScalingFit, extra: Value) -> Value {
    let mut v = extra;
    v["window"] = json!([fit.window.0, fit.window.1]);
    v["n_points"] = fit.n_points.into();
    v["amplitude"] = fit.amplitude.into();
    v
}

/// `ν` of a scale-invariant form, if there is one.
fn scale_nu(form: &MomentumForm) -> Option<f64> {
    form.scale_exponent().map(|e| 0.5 * e)
}

pub fn scaling<E: ChunkExecutor>(exec: &E, ex: &Experiment) -> Result<Report, CliError> {
    let g = &ex.config.grids;
    let has_p = g.p.is_some() || g.p_log.is_some();
    let has_dx = g.dx.is_some();
    if !has_p && !has_dx {
        return Err(ValidationError::new("grids.p", "scaling needs grids.p, grids.p_log or grids.dx").into());
    }
    let rb = RowBuilder::new(&ex.config.output.experiment_id);
    let mut report = Report::default();
    let nu = scale_nu(&ex.form);
    if has_p {
        ex.require(AnalysisMode::LowerBound)?;
        let momenta: Vec<f64> = ex
            .momenta()?
            .into_iter()
            .filter(|p| in_window(*p, ex.config.fits.p_window))
            .collect();
        for (i, &(eta, eta_p)) in ex.points.iter().enumerate() {
            let base = echo([("eta", eta.into()), ("eta_p", eta_p.into()), ("rel_tol", ex.tol.rel.into())]);
            for (method, gm) in [("lower_fit", GreenMethod::Lower), ("upper_fit", GreenMethod::Upper)] {
                let mut plot = PlotSeries::new(
                    format!("scaling_{}_point{i}", gm.name()),
                    format!("p G_{} error ({})", gm.name(), point_label(i, eta, eta_p)),
                );
                let mut samples = Vec::with_capacity(momenta.len());
                for &pn in &momenta {
                    let v = green_momentum(exec, eta, eta_p, &ex.momentum(pn), &ex.form, &ex.w, gm, &ex.green)
                        .ctx(|| format!("{} green at |p|={pn}", gm.name()))?;
                    samples.push((pn, v.value, v.error));
                    plot.push(pn, v.value, Some(v.error));
                }
                let fit = fit_scaling_exponent(&samples).ctx(|| format!("{method} over p"))?;
                report.rows.push(rb.row(
                    "scaling_momentum",
                    fit_echo(&fit, base.clone()),
                    fit.exponent,
                    Some(fit.residual_rms),
                    method,
                    None,
                ));
                report.summary.push(format!("{} {method}: slope {:.5}", point_label(i, eta, eta_p), fit.exponent));
                report.plots.push(plot);
            }
            if let Some(nu) = nu {
                let om = omega(nu).ctx(|| "omega".into())?;
                if eta == 0.0 && eta_p == 0.0 {
                    report
                        .rows
                        .push(rb.row("scaling_momentum", base.clone(), -2.0 * om, None, "predicted", None));
                    report.summary.push(format!("predicted momentum slope -2ω = {:.5}", -2.0 * om));
                }
                if nu > -0.5 && ex.w.is_zero() {
                    let fit = momentum_scaling_window(nu, eta, eta_p, &momenta, &ex.form, &ex.tol)
                        .ctx(|| format!("scaling window at theta={eta}, theta_p={eta_p}"))?;
                    let inputs = fit_echo(&fit, echo([("theta", eta.into()), ("theta_p", eta_p.into()), ("nu", nu.into())]));
                    report
                        .rows
                        .push(rb.row("scaling_window", inputs, fit.exponent, Some(fit.residual_rms), "upper_fit", None));
                    report.summary.push(format!("window theta={eta} theta_p={eta_p}: slope {:.5}", fit.exponent));
                }
            }
        }
    }
    if has_dx {
        ex.require(AnalysisMode::UpperBound)?;
        let d = ex.form.dim();
        let dx: Vec<f64> = ex.dx()?.into_iter().filter(|r| in_window(*r, ex.config.fits.dx_window)).collect();
        for (i, &(eta, eta_p)) in ex.points.iter().enumerate() {
            let decay = large_distance_decay(&ex.form, eta, eta_p, &dx, &ex.tol)
                .ctx(|| format!("position slope at eta={eta}, eta_p={eta_p}"))?;
            let mut base = echo([("eta", eta.into()), ("eta_p", eta_p.into()), ("rel_tol", ex.tol.rel.into())]);
            base["inconclusive"] = decay.inconclusive.into();
            report.rows.push(rb.row(
                "scaling_position",
                fit_echo(&decay.fit, base.clone()),
                decay.fit.exponent,
                Some(decay.fit.residual_rms),
                "upper_fit",
                None,
            ));
            report
                .rows
                .push(rb.row("scaling_position", base.clone(), decay.predicted, None, "large_distance_predicted", None));
            let short = match nu {
                Some(nu) if eta == 0.0 && eta_p == 0.0 => Some(-(d as f64) + 1.0 / (1.0 + nu)),
                _ if eta == eta_p => Some(1.0 - d as f64),
                _ => None,
            };
            if let Some(s) = short {
                report
                    .rows
                    .push(rb.row("scaling_position", base, s, None, "short_distance_predicted", None));
            }
            report.summary.push(format!(
                "{} position slope {:.5}{} (large-distance prediction {:.5}{})",
                point_label(i, eta, eta_p),
                decay.fit.exponent,
                if decay.inconclusive { ", inconclusive" } else { "" },
                decay.predicted,
                short.map(|s| format!(", short-distance {s:.5}")).unwrap_or_default()
            ));
        }
    }
    Ok(report)
}

pub fn moments<E: ChunkExecutor>(exec: &E, ex: &Experiment) -> Result<Report, CliError> {
    ex.require(AnalysisMode::MonteCarlo)?;
    let taus = ex.taus()?;
    let rb = RowBuilder::new(&ex.config.output.experiment_id);
    let mut report = Report::default();
    let nu = if ex.w.is_zero() { scale_nu(&ex.form) } else { None };
    for (mode, name, shift) in [
        (MomentMode::IntegratedEndpoint, "integrated", 1.0),
        (MomentMode::FixedEndpoint, "fixed", 0.5),
    ] {
        let mut plot = PlotSeries::new(format!("moments_{name}"), format!("tau second_moment std_error ({name} endpoint)"));
        let mut samples = Vec::new();
        for &tau in taus {
            let m = second_moment(exec, tau, &ex.form, &ex.w, mode, &ex.mc)
                .ctx(|| format!("{name} second moment at tau={tau}"))?;
            let inputs = echo([("tau", tau.into()), ("mode", name.into()), ("mc", mc_echo(ex))]);
            report
                .rows
                .push(rb.row("moments", inputs, m.value, Some(m.std_error), "mc", prov(ex)));
            plot.push(tau, m.value, Some(m.std_error));
            if in_window(tau, ex.config.fits.tau_window) {
                samples.push((tau, m.value, m.std_error));
            }
        }
        report.plots.push(plot);
        if samples.len() >= 3 {
            let fit = fit_scaling_exponent(&samples).ctx(|| format!("{name} moment fit"))?;
            let inputs = fit_echo(&fit, echo([("mode", name.into())]));
            report
                .rows
                .push(rb.row("moments_fit", inputs, fit.exponent, Some(fit.residual_rms), "fit", prov(ex)));
            report.summary.push(format!("{name} moment exponent {:.5}", fit.exponent));
        } else {
            report.summary.push(format!("{name} moment: fewer than 3 τ in the fit window, no fit"));
        }
        if let Some(nu) = nu {
            let inputs = echo([("mode", name.into()), ("nu", nu.into())]);
            report
                .rows
                .push(rb.row("moments_fit", inputs, shift + nu, None, "predicted", None));
            report.summary.push(format!("{name} predicted exponent {:.5}", shift + nu));
        }
    }
    Ok(report)
}

pub fn position(ex: &Experiment) -> Result<Report, CliError> {
    ex.require(AnalysisMode::UpperBound)?;
    let dx = ex.dx()?;
    let d = ex.form.dim();
    let origin = vec![0.0; d];
    let rb = RowBuilder::new(&ex.config.output.experiment_id);
    let mut report = Report::default();
    for (i, &(eta, eta_p)) in ex.points.iter().enumerate() {
        let mut plot = PlotSeries::new(format!("position_point{i}"), format!("dx G_upper error ({})", point_label(i, eta, eta_p)));
        for &r in &dx {
            let x_p = ex.momentum(r);
            let g = gu_position(eta, &origin, eta_p, &x_p, &ex.form, &ex.tol)
                .ctx(|| format!("position green at eta={eta}, eta_p={eta_p}, |dx|={r}"))?;
            let inputs = echo([
                ("eta", eta.into()),
                ("x", json!(origin)),
                ("eta_p", eta_p.into()),
                ("x_p", json!(x_p)),
                ("rel_tol", ex.tol.rel.into()),
            ]);
            report
                .rows
                .push(rb.row("position", inputs, g.value, Some(g.abs_error_estimate), "upper", None));
            plot.push(r, g.value, Some(g.abs_error_estimate));
        }
        report.plots.push(plot);
    }
    report.summary.push(format!("{} position values", report.rows.len()));
    Ok(report)
}

/// The config with its metric block replaced by the compiled potential.
pub fn compiled_config(ex: &Experiment) -> Result<ExperimentConfig, ValidationError> {
    let mut c = ex.config.clone();
    c.potential = Some(potential_spec_of(&ex.form, &ex.w)?);
    c.metric = None;
    Ok(c)
}

pub const COMPILED_FILE: &str = "compiled_potential.json";

pub fn metric(ex: &Experiment) -> Result<Report, CliError> {
    let (Source::Metric(mp), Some(spec)) = (&ex.source, &ex.config.metric) else {
        return Err(ValidationError::new("metric", "the metric subcommand needs a `metric` block").into());
    };
    let rb = RowBuilder::new(&ex.config.output.experiment_id);
    let mut report = Report::default();
    let inputs = serde_json::to_value(spec).map_err(|e| ValidationError::new("metric", e.to_string()))?;
    let flag = |b: bool| if b { 1.0 } else { 0.0 };
    report.rows.push(rb.row("metric", inputs.clone(), mp.nu, None, "nu", None));
    if let Some(s) = mp.sigma {
        report.rows.push(rb.row("metric", inputs.clone(), s, None, "sigma", None));
    }
    report
        .rows
        .push(rb.row("metric", inputs.clone(), flag(mp.theorem1_regime), None, "theorem1_regime", None));
    report.rows.push(rb.row("metric", inputs.clone(), flag(mp.b_finite), None, "b_finite", None));
    report
        .rows
        .push(rb.row("metric", inputs, flag(mp.default_constants), None, "default_constants", None));
    let compiled = compiled_config(ex)?;
    let doc = serde_json::to_value(&compiled).map_err(|e| ValidationError::new("metric", e.to_string()))?;
    report.documents.push((COMPILED_FILE.into(), doc));
    report.summary.push(format!(
        "nu = {:.6}, sigma = {}, theorem-1 regime: {}, B finite: {}, default constants: {}",
        mp.nu,
        mp.sigma.map(|s| format!("{s:.6}")).unwrap_or_else(|| "none (W = 0)".into()),
        mp.theorem1_regime,
        mp.b_finite,
        mp.default_constants
    ));
    Ok(report)
}
