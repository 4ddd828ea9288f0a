//! Green's functions `G̃(η, η′; p) = ∫₀^∞ dτ P̃_τ(η, η′; p)`.

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::appendix::{bessel_upper, bessel_upper_equal};
use crate::bounds::smoothed_exponent;
use crate::exec::ChunkExecutor;
use crate::kernel::{fk_kernel_momentum, free_kernel, McSettings};
use crate::linalg::SymMatrix;
use crate::numerics::quadrature::{gaussian_expectation_nodes, Breakpoint, Node};
use crate::numerics::{
    beta_weight_integral, gamma_fn, gaussian_abs_moment, integrate_semi_infinite, SemiInfinite,
    Tolerance,
};
use crate::potentials::{AnalysisMode, LinePotential, MomentumForm, PowerLawTerm, ScalarPotential};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GreenMethod {
    Mc,
    Lower,
    Upper,
    FreeField,
}

impl GreenMethod {
    pub fn name(self) -> &'static str {
        match self {
            GreenMethod::Mc => "mc",
            GreenMethod::Lower => "lower",
            GreenMethod::Upper => "upper",
            GreenMethod::FreeField => "free_field",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GreensValue {
    pub value: f64,
    pub method: GreenMethod,
    /// Standard error for `Mc`, quadrature estimate otherwise.
    pub error: f64,
    pub eta: f64,
    pub eta_p: f64,
    pub p: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalingFit {
    pub exponent: f64,
    pub amplitude: f64,
    pub residual_rms: f64,
    pub window: (f64, f64),
    pub n_points: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GreenSettings {
    pub tol: Tolerance,
    pub mc: McSettings,
    /// Points of the log-uniform τ grid for `Mc`.
    pub tau_points: usize,
    /// The grid spans `[τ_c / tau_span, τ_c · tau_span]`.
    pub tau_span: f64,
}

impl Default for GreenSettings {
    fn default() -> Self {
        GreenSettings {
            tol: Tolerance::with_rel(1e-8),
            mc: McSettings::default(),
            tau_points: 48,
            tau_span: 1e3,
        }
    }
}

/// `n` log-spaced points from `a` to `b` inclusive.
pub fn log_grid(a: f64, b: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return alloc::vec![a];
    }
    let (la, lb) = (libm::log(a), libm::log(b));
    let mut g: Vec<f64> = (0..n)
        .map(|i| libm::exp(la + (lb - la) * i as f64 / (n - 1) as f64))
        .collect();
    g[0] = a;
    g[n - 1] = b;
    g
}

/// `ω = 1/(2(1+ν))`.
pub fn omega(nu: f64) -> Result<f64> {
    if !(nu > -1.0) || !nu.is_finite() {
        return Err(Error::domain(alloc::format!("ω needs ν > -1, got {nu}")));
    }
    Ok(0.5 / (1.0 + nu))
}

/// `(2π)^{-1/2} Γ(ω)/(1+ν)`, so that `∫(2πτ)^{-1/2} e^{-cτ^{1+ν}} dτ = K c^{-ω}`.
fn tau_integral_constant(nu: f64) -> Result<f64> {
    Ok(gamma_fn(omega(nu)?)? / ((1.0 + nu) * libm::sqrt(2.0 * PI)))
}

/// `K₁` with `G̃^L(0, 0; p) = K₁ ((p·h·p) Beta(ν))^{-ω}`.
pub fn lower_bound_green_constant(nu: f64) -> Result<f64> {
    if !(nu > -0.5) {
        return Err(Error::domain(alloc::format!("K₁ needs ν > -1/2, got {nu}")));
    }
    tau_integral_constant(nu)
}

/// Effective `K₂` with `G̃^U(0, 0; p) ≤ K₂ |p|^{-2ω}` for `W = 0` and a form
/// scale invariant about the origin:
/// `K₂ = K ∫(s(1−s))^{-νω} ds · E_u[|Ṽ(u)|₀^{-ω}]`.
pub fn effective_upper_constant(form: &MomentumForm) -> Result<f64> {
    let Some(e) = form.scale_exponent() else {
        return Err(Error::domain("K₂ needs a form that is scale invariant about 0"));
    };
    let nu = 0.5 * e;
    let w = omega(nu)?;
    let k = tau_integral_constant(nu)?;
    let s_int = beta_weight_integral(-nu * w)?;
    let breaks: Vec<Breakpoint> = form
        .terms()
        .iter()
        .map(|t| Breakpoint::new(t.center, (-t.exponent * w).min(0.0)))
        .collect();
    let mean = gaussian_expectation_nodes(
        |n: Node| {
            let lam = form.min_eigen(n.anchor, n.offset);
            if lam.is_infinite() {
                0.0
            } else {
                libm::pow(lam, -w)
            }
        },
        &breaks,
        &Tolerance::with_rel(1e-10),
    )?;
    Ok(k * s_int * mean.value)
}

/// Weighted least squares of `ln y` on `ln x`.
///
/// Weights are `(y/err)²` with relative errors floored at 1e-6; uniform if
/// any error is zero or not finite.
pub fn fit_scaling_exponent(samples: &[(f64, f64, f64)]) -> Result<ScalingFit> {
    if samples.len() < 3 {
        return Err(Error::domain("a scaling fit needs at least 3 samples"));
    }
    for &(x, y, _) in samples {
        if !(x > 0.0 && x.is_finite()) {
            return Err(Error::domain(alloc::format!("abscissa {x} is not positive")));
        }
        if !(y > 0.0 && y.is_finite()) {
            return Err(Error::domain(alloc::format!("value {y} at {x} is not positive")));
        }
    }
    let mut xs: Vec<f64> = samples.iter().map(|s| s.0).collect();
    xs.sort_by(f64::total_cmp);
    if xs.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::domain("abscissas must be distinct"));
    }
    let weighted = samples.iter().all(|s| s.2 > 0.0 && s.2.is_finite());
    let pts: Vec<(f64, f64, f64)> = samples
        .iter()
        .map(|&(x, y, e)| {
            let w = if weighted {
                let r = (e / y).max(1e-6);
                1.0 / (r * r)
            } else {
                1.0
            };
            (libm::log(x), libm::log(y), w)
        })
        .collect();
    let sw: f64 = pts.iter().map(|p| p.2).sum();
    let mx = pts.iter().map(|p| p.2 * p.0).sum::<f64>() / sw;
    let my = pts.iter().map(|p| p.2 * p.1).sum::<f64>() / sw;
    let sxx: f64 = pts.iter().map(|p| p.2 * (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| p.2 * (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = pts
        .iter()
        .map(|p| {
            let r = p.1 - (intercept + slope * p.0);
            r * r
        })
        .sum();
    Ok(ScalingFit {
        exponent: slope,
        amplitude: libm::exp(intercept),
        residual_rms: libm::sqrt(ss / pts.len() as f64),
        window: (xs[0], xs[xs.len() - 1]),
        n_points: samples.len(),
    })
}

/// `J(τ)` in closed form when every term is centered at `η = η′`:
/// `const + Σ a E|u|^e Beta(e/2) τ^{e/2}`.
struct CenteredExponent {
    constant: f64,
    terms: Vec<(f64, f64)>,
}

impl CenteredExponent {
    fn new(u: &LinePotential, eta: f64, eta_p: f64) -> Result<Option<Self>> {
        if eta != eta_p || u.modulation.is_some() || u.terms().any(|t| t.center != eta) {
            return Ok(None);
        }
        let mut terms = Vec::new();
        for t in u.terms() {
            let c = t.amplitude * gaussian_abs_moment(t.exponent)? * beta_weight_integral(0.5 * t.exponent)?;
            terms.push((c, 0.5 * t.exponent));
        }
        Ok(Some(CenteredExponent {
            constant: u.constant,
            terms,
        }))
    }

    fn eval(&self, tau: f64) -> f64 {
        self.constant + self.terms.iter().map(|&(c, h)| c * libm::pow(tau, h)).sum::<f64>()
    }
}

enum Exponent<'a> {
    Centered(CenteredExponent),
    General {
        u: &'a LinePotential,
        eta: f64,
        eta_p: f64,
    },
}

impl Exponent<'_> {
    fn eval(&self, tau: f64, tol: &Tolerance) -> Result<f64> {
        match self {
            Exponent::Centered(c) => Ok(c.eval(tau)),
            Exponent::General { u, eta, eta_p } => Ok(smoothed_exponent(u, *eta, *eta_p, tau, tol)?.value),
        }
    }
}

fn exponent_model<'a>(u: &'a LinePotential, eta: f64, eta_p: f64) -> Result<Exponent<'a>> {
    Ok(match CenteredExponent::new(u, eta, eta_p)? {
        Some(c) => Exponent::Centered(c),
        None => Exponent::General { u, eta, eta_p },
    })
}

/// Root of `τ J(τ) = 1`, the scale where the lower-bound exponent is of
/// order one.
fn tau_scale(model: &Exponent, tol: &Tolerance) -> Result<f64> {
    let f = |tau: f64| -> Result<f64> { Ok(tau * model.eval(tau, tol)? - 1.0) };
    let (mut lo, mut hi) = (1.0, 1.0);
    let v = f(1.0)?;
    if v < 0.0 {
        for _ in 0..60 {
            hi *= 4.0;
            if f(hi)? >= 0.0 {
                break;
            }
            lo = hi;
        }
    } else {
        for _ in 0..60 {
            lo /= 4.0;
            if f(lo)? < 0.0 {
                break;
            }
            hi = lo;
        }
    }
    if lo == hi {
        return Ok(lo);
    }
    let (mut a, mut b) = (libm::log(lo), libm::log(hi));
    for _ in 0..40 {
        let m = 0.5 * (a + b);
        if f(libm::exp(m))? < 0.0 {
            a = m;
        } else {
            b = m;
        }
    }
    Ok(libm::exp(0.5 * (a + b)))
}

fn check_point(eta: f64, eta_p: f64) -> Result<()> {
    if eta.is_finite() && eta_p.is_finite() {
        Ok(())
    } else {
        Err(Error::domain("η and η′ must be finite"))
    }
}

/// `G̃(η, η′; p)` by the requested method.
#[allow(clippy::too_many_arguments)]
pub fn green_momentum<E: ChunkExecutor>(
    exec: &E,
    eta: f64,
    eta_p: f64,
    p: &[f64],
    form: &MomentumForm,
    w: &ScalarPotential,
    method: GreenMethod,
    settings: &GreenSettings,
) -> Result<GreensValue> {
    check_point(eta, eta_p)?;
    form.check_momentum(p)?;
    let u = form.project(p).plus(&w.line());
    if u.is_zero() {
        return Err(Error::divergent(
            "G̃ diverges: no decay in τ with p = 0 and W = 0",
        ));
    }
    let tol = &settings.tol;
    let (value, error) = match method {
        GreenMethod::FreeField => {
            let Some(c) = u.constant_value() else {
                return Err(Error::domain("the free-field form needs constant potentials"));
            };
            let k = libm::sqrt(2.0 * c);
            (libm::exp(-k * (eta_p - eta).abs()) / k, 0.0)
        }
        GreenMethod::Upper => {
            form.validate_for(AnalysisMode::UpperBound)?;
            w.validate_for(AnalysisMode::UpperBound)?;
            let r = if eta == eta_p {
                bessel_upper_equal(&u, eta, tol)?
            } else {
                bessel_upper(&u, eta, eta_p, tol)?
            };
            (r.value, r.abs_error_estimate)
        }
        GreenMethod::Lower => {
            form.validate_for(AnalysisMode::LowerBound)?;
            w.validate_for(AnalysisMode::LowerBound)?;
            let model = exponent_model(&u, eta, eta_p)?;
            let jtol = Tolerance {
                rel: (tol.rel * 0.1).max(1e-13),
                ..*tol
            };
            let mut failure: Option<Error> = None;
            let r = integrate_semi_infinite(
                |tau| {
                    if failure.is_some() {
                        return 0.0;
                    }
                    match model.eval(tau, &jtol) {
                        Ok(j) => free_kernel(eta, eta_p, tau) * libm::exp(-tau * j),
                        Err(e) => {
                            failure = Some(e);
                            0.0
                        }
                    }
                },
                SemiInfinite {
                    small_exponent: -0.5,
                },
                tol,
            )?;
            if let Some(e) = failure {
                return Err(e);
            }
            (r.value, r.abs_error_estimate)
        }
        GreenMethod::Mc => {
            form.validate_for(AnalysisMode::MonteCarlo)?;
            w.validate_for(AnalysisMode::MonteCarlo)?;
            mc_green(exec, eta, eta_p, p, form, w, &u, settings)?
        }
    };
    Ok(GreensValue {
        value,
        method,
        error,
        eta,
        eta_p,
        p: p.to_vec(),
    })
}

/// Trapezoid rule in `ln τ` over MC kernel means. Below the grid `τP` is
/// continued as `τ^{1/2}`, which puts the weight `h / (1 − e^{−h/2})` on the
/// first point. The returned error adds to the statistical part the range
/// of the continuation when `P / P_free` lies between its first grid value
/// and 1.
#[allow(clippy::too_many_arguments)]
fn mc_green<E: ChunkExecutor>(
    exec: &E,
    eta: f64,
    eta_p: f64,
    p: &[f64],
    form: &MomentumForm,
    w: &ScalarPotential,
    u: &LinePotential,
    settings: &GreenSettings,
) -> Result<(f64, f64)> {
    let n = settings.tau_points;
    if n < 3 {
        return Err(Error::domain("the MC τ grid needs at least 3 points"));
    }
    if !(settings.tau_span > 1.0) {
        return Err(Error::domain("tau_span must exceed 1"));
    }
    let model = exponent_model(u, eta, eta_p)?;
    let tau_c = tau_scale(&model, &Tolerance::with_rel(1e-4))?;
    let grid = log_grid(tau_c / settings.tau_span, tau_c * settings.tau_span, n);
    let h = libm::log(grid[1]) - libm::log(grid[0]);
    let head_weight = h / (1.0 - libm::exp(-0.5 * h)) - 0.5 * h;
    let (mut value, mut var, mut head_err) = (0.0, 0.0, 0.0);
    for (k, &tau) in grid.iter().enumerate() {
        let mc = McSettings {
            stream_base: settings.mc.stream_base + ((k as u64) << 24),
            ..settings.mc
        };
        let est = fk_kernel_momentum(exec, eta, eta_p, tau, p, form, w, &mc)?;
        let mut weight = if k == 0 || k == n - 1 { 0.5 * h } else { h };
        if k == 0 {
            weight += head_weight;
            let ratio = est.mean / free_kernel(eta, eta_p, tau);
            if ratio > 0.0 && ratio < 1.0 {
                head_err = head_weight * tau * est.mean * (1.0 / ratio - 1.0);
            }
        }
        value += weight * tau * est.mean;
        var += (weight * tau * est.std_error) * (weight * tau * est.std_error);
    }
    Ok((value, libm::sqrt(var) + head_err))
}

/// One momentum of [`sandwich_check`].
#[derive(Clone, Debug, PartialEq)]
pub struct SandwichRow {
    pub p_norm: f64,
    pub lower: GreensValue,
    pub mc: GreensValue,
    pub upper: GreensValue,
    /// `K₁((p·h·p) Beta(ν))^{-ω}` when `W = 0` and the form is scale invariant.
    pub theorem_lower: Option<f64>,
    /// `K₂ |p|^{-2ω}` under the same conditions.
    pub theorem_upper: Option<f64>,
    /// `G̃^L − 3σ_L ≤ G̃^MC ± 3σ ≤ G̃^U + 3σ_U`.
    pub mc_inside: bool,
    /// The lower ≤ upper chain of the closed-form constants holds.
    pub theorem_holds: bool,
}

impl SandwichRow {
    pub fn pass(&self) -> bool {
        self.mc_inside && self.theorem_holds
    }
}

fn along_first_axis(dim: usize, norm: f64) -> Vec<f64> {
    let mut p = alloc::vec![0.0; dim];
    p[0] = norm;
    p
}

/// Checks `G̃^L ≤ G̃^MC ≤ G̃^U` at each `|p|` (momentum along the first axis),
/// and for `W = 0` scale-invariant forms the explicit-constant inequalities.
/// Composite forms are bounded through their bracketing power laws.
#[allow(clippy::too_many_arguments)]
pub fn sandwich_check<E: ChunkExecutor>(
    exec: &E,
    p_grid: &[f64],
    form: &MomentumForm,
    w: &ScalarPotential,
    eta: f64,
    eta_p: f64,
    lambda: f64,
    settings: &GreenSettings,
) -> Result<Vec<SandwichRow>> {
    let composite = matches!(form, MomentumForm::Composite { .. });
    if (composite || !w.is_zero()) && p_grid.iter().any(|&p| !(p > lambda)) {
        return Err(Error::domain(alloc::format!(
            "every |p| must exceed Λ = {lambda} when W ≠ 0 or the form is composite"
        )));
    }
    let bracket = if composite { Some(form.bracketing()?) } else { None };
    let theorem = if w.is_zero() && !composite && eta == 0.0 && eta_p == 0.0 {
        form.scale_exponent().map(|e| 0.5 * e).filter(|nu| *nu > -0.5)
    } else {
        None
    };
    let consts = match theorem {
        Some(nu) => Some((
            nu,
            lower_bound_green_constant(nu)?,
            effective_upper_constant(form)?,
            crate::bounds::h_form(form)?,
            beta_weight_integral(nu)?,
        )),
        None => None,
    };
    let mut rows = Vec::with_capacity(p_grid.len());
    for &pn in p_grid {
        let p = along_first_axis(form.dim(), pn);
        let (lower, upper) = match &bracket {
            Some(br) => {
                let wl = with_constant(w, br.l_upper.quad_form(&p))?;
                let wu = with_constant(w, br.l_lower.quad_form(&p))?;
                (
                    green_momentum(exec, eta, eta_p, &p, &br.upper, &wl, GreenMethod::Lower, settings)?,
                    green_momentum(exec, eta, eta_p, &p, &br.lower, &wu, GreenMethod::Upper, settings)?,
                )
            }
            None => (
                green_momentum(exec, eta, eta_p, &p, form, w, GreenMethod::Lower, settings)?,
                green_momentum(exec, eta, eta_p, &p, form, w, GreenMethod::Upper, settings)?,
            ),
        };
        let mc = green_momentum(exec, eta, eta_p, &p, form, w, GreenMethod::Mc, settings)?;
        let mc_inside = lower.value - 3.0 * lower.error <= mc.value + 3.0 * mc.error
            && mc.value - 3.0 * mc.error <= upper.value + 3.0 * upper.error;
        let (theorem_lower, theorem_upper, theorem_holds) = match &consts {
            Some((nu, k1, k2, h, beta)) => {
                let om = omega(*nu)?;
                let tl = k1 * libm::pow(h.quad_form(&p) * beta, -om);
                let tu = k2 * libm::pow(pn, -2.0 * om);
                let slack = 1e-6;
                let holds = tl <= lower.value * (1.0 + slack) + lower.error
                    && upper.value <= tu * (1.0 + slack) + upper.error;
                (Some(tl), Some(tu), holds)
            }
            None => (None, None, true),
        };
        rows.push(SandwichRow {
            p_norm: pn,
            lower,
            mc,
            upper,
            theorem_lower,
            theorem_upper,
            mc_inside,
            theorem_holds,
        });
    }
    Ok(rows)
}

fn with_constant(w: &ScalarPotential, c: f64) -> Result<ScalarPotential> {
    let mut terms = w.terms.clone();
    if c != 0.0 {
        terms.push(PowerLawTerm::constant(c)?);
    }
    Ok(ScalarPotential::new(terms))
}

/// Finite upper bound on `G̃(0, 0; 0)` when only `W` confines.
pub fn zero_momentum_finiteness(w: &ScalarPotential, tol: &Tolerance) -> Result<GreensValue> {
    if w.is_zero() {
        return Err(Error::divergent("G̃(0, 0; 0) diverges for W = 0"));
    }
    if !w.is_nonneg() {
        return Err(Error::domain("W must be nonnegative"));
    }
    w.validate_for(AnalysisMode::LowerBound)?;
    let r = bessel_upper_equal(&w.line(), 0.0, tol)?;
    Ok(GreensValue {
        value: r.value,
        method: GreenMethod::Upper,
        error: r.abs_error_estimate,
        eta: 0.0,
        eta_p: 0.0,
        p: Vec::new(),
    })
}

/// Values at `η = η′ = 0` for a potential centered at 0 against the same
/// quantities at `η = η′ = η₀` for the potential centered at `η₀`.
#[derive(Clone, Debug, PartialEq)]
pub struct ShiftReport {
    pub lower: (f64, f64),
    pub upper: (f64, f64),
    /// MC kernel means at `τ = 1` with matched seeds.
    pub mc_kernel: (f64, f64),
    pub bounds_rel_diff: f64,
    pub mc_bit_identical: bool,
}

/// Translation check for `Ṽ = |η − η₀|^{2ν}` in one dimension at `|p| = p`.
pub fn shifted_center_equivalence<E: ChunkExecutor>(
    exec: &E,
    nu: f64,
    eta0: f64,
    p: f64,
    settings: &GreenSettings,
) -> Result<ShiftReport> {
    let centered = MomentumForm::isotropic(1, PowerLawTerm::new(1.0, 2.0 * nu, 0.0)?)?;
    let shifted = MomentumForm::isotropic(1, PowerLawTerm::new(1.0, 2.0 * nu, eta0)?)?;
    let w = ScalarPotential::zero();
    let g = |f: &MomentumForm, at: f64, m: GreenMethod| {
        green_momentum(exec, at, at, &[p], f, &w, m, settings).map(|v| v.value)
    };
    let lower = (g(&centered, 0.0, GreenMethod::Lower)?, g(&shifted, eta0, GreenMethod::Lower)?);
    let upper = (g(&centered, 0.0, GreenMethod::Upper)?, g(&shifted, eta0, GreenMethod::Upper)?);
    let a = fk_kernel_momentum(exec, 0.0, 0.0, 1.0, &[p], &centered, &w, &settings.mc)?;
    let b = fk_kernel_momentum(exec, eta0, eta0, 1.0, &[p], &shifted, &w, &settings.mc)?;
    let rd = |x: (f64, f64)| (x.0 - x.1).abs() / x.0.abs();
    Ok(ShiftReport {
        lower,
        upper,
        mc_kernel: (a.mean, b.mean),
        bounds_rel_diff: rd(lower).max(rd(upper)),
        mc_bit_identical: a.mean.to_bits() == b.mean.to_bits()
            && a.std_error.to_bits() == b.std_error.to_bits(),
    })
}

/// `K₁((p·h·p) Beta(ν))^{-ω}`.
pub fn closed_lower_green(nu: f64, h: &SymMatrix, p: &[f64]) -> Result<f64> {
    let k1 = lower_bound_green_constant(nu)?;
    Ok(k1 * libm::pow(h.quad_form(p) * beta_weight_integral(nu)?, -omega(nu)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::h_form;
    use crate::exec::Sequential;

    fn settings() -> GreenSettings {
        GreenSettings {
            mc: McSettings {
                n_paths: 4000,
                n_steps: 64,
                chunk_size: 1000,
                ..McSettings::default()
            },
            ..GreenSettings::default()
        }
    }

    fn iso(dim: usize, e: f64) -> MomentumForm {
        MomentumForm::isotropic(dim, PowerLawTerm::pure(e).unwrap()).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn omega_examples() {
        assert_eq!(omega(0.0).unwrap(), 0.5);
        assert!((omega(-0.25).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!((omega(-2.0 / 3.0).unwrap() - 1.5).abs() < 1e-12);
        assert!(omega(-1.0).is_err());
    }

    #[test]
    fn k1_examples() {
        assert!((lower_bound_green_constant(0.0).unwrap() - libm::sqrt(0.5)).abs() < 1e-14);
        let k = lower_bound_green_constant(-0.25).unwrap();
        assert!(rel(k, gamma_fn(2.0 / 3.0).unwrap() / (0.75 * libm::sqrt(2.0 * PI))) < 1e-14);
        assert!(lower_bound_green_constant(-0.5).is_err());
    }

    #[test]
    fn free_field_methods_agree() {
        let form = MomentumForm::constant(2, 0.5).unwrap();
        let w = ScalarPotential::zero();
        let s = settings();
        let p = [2.0, 0.0];
        for m in [GreenMethod::FreeField, GreenMethod::Lower, GreenMethod::Upper] {
            let g = green_momentum(&Sequential, 0.0, 0.0, &p, &form, &w, m, &s).unwrap();
            assert!(rel(g.value, 0.5) < 1e-7, "{m:?} {}", g.value);
        }
        let g = green_momentum(&Sequential, 0.0, 0.0, &p, &form, &w, GreenMethod::Mc, &s).unwrap();
        assert!(rel(g.value, 0.5) < 1e-3, "{}", g.value);
        for m in [GreenMethod::FreeField, GreenMethod::Lower, GreenMethod::Upper] {
            let g = green_momentum(&Sequential, 0.3, 1.3, &p, &form, &w, m, &s).unwrap();
            assert!(rel(g.value, 0.5 * libm::exp(-2.0)) < 1e-6, "{m:?} {}", g.value);
        }
        // (2Ap² + 2B)^{-1/2} with a constant W
        let wb = ScalarPotential::power_law(0.7, 0.0).unwrap();
        let g = green_momentum(&Sequential, 0.0, 0.0, &[1.0, 1.0], &form, &wb, GreenMethod::Lower, &s)
            .unwrap();
        assert!(rel(g.value, 1.0 / libm::sqrt(2.0 + 1.4)) < 1e-7);
    }

    #[test]
    fn divergence_without_decay() {
        let form = iso(1, -0.5);
        let w = ScalarPotential::zero();
        for m in [GreenMethod::Lower, GreenMethod::Upper, GreenMethod::Mc] {
            let r = green_momentum(&Sequential, 0.0, 0.0, &[0.0], &form, &w, m, &settings());
            assert!(matches!(r, Err(Error::Divergent(_))), "{m:?}");
        }
        assert!(matches!(
            zero_momentum_finiteness(&w, &Tolerance::default()),
            Err(Error::Divergent(_))
        ));
    }

    #[test]
    fn lower_closed_form_fast_path() {
        let form = iso(1, -0.5);
        let w = ScalarPotential::zero();
        let s = settings();
        let h = h_form(&form).unwrap();
        let closed = closed_lower_green(-0.25, &h, &[3.0]).unwrap();
        let fast = green_momentum(&Sequential, 0.0, 0.0, &[3.0], &form, &w, GreenMethod::Lower, &s)
            .unwrap();
        assert!(rel(fast.value, closed) < 1e-7);
    }

    /// `∫ ds E|μ + σZ|` for `U = |η|`, with `s = sin²θ`.
    fn linear_exponent_oracle(eta: f64, eta_p: f64, tau: f64) -> f64 {
        let n = 400;
        let h = 0.5 * PI / n as f64;
        let mut acc = 0.0;
        for k in 0..=n {
            let th = k as f64 * h;
            let (sn, cs) = (th.sin(), th.cos());
            let s = sn * sn;
            let mu = eta + s * (eta_p - eta);
            let sig = tau.sqrt() * sn * cs;
            let e = if sig == 0.0 {
                mu.abs()
            } else {
                sig * (2.0 / PI).sqrt() * (-mu * mu / (2.0 * sig * sig)).exp()
                    + mu * libm::erf(mu / (sig * 2f64.sqrt()))
            };
            let wgt = if k == 0 || k == n { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
            acc += wgt * e * 2.0 * sn * cs;
        }
        acc * h / 3.0
    }

    #[test]
    fn lower_general_path_matches_oracle() {
        let form = iso(1, 1.0);
        let w = ScalarPotential::zero();
        let p = 3.0;
        let s = GreenSettings {
            tol: Tolerance::with_rel(1e-7),
            ..settings()
        };
        for (eta, eta_p) in [(0.5, 0.5), (0.2, 0.7)] {
            // τ = t², integrated over t by Simpson.
            let n = 4000;
            let h = 12.0 / n as f64;
            let mut acc = 0.0;
            for k in 1..=n {
                let t = k as f64 * h;
                let tau = t * t;
                let j = p * p * linear_exponent_oracle(eta, eta_p, tau);
                let d = eta_p - eta;
                let g = 2.0 / (2.0 * PI).sqrt() * (-d * d / (2.0 * tau) - tau * j).exp();
                let wgt = if k == n { 1.0 } else if k % 2 == 1 { 4.0 } else { 2.0 };
                acc += wgt * g;
            }
            let d0 = if eta == eta_p { 2.0 / (2.0 * PI).sqrt() } else { 0.0 };
            let oracle = (acc + d0) * h / 3.0;
            let g = green_momentum(&Sequential, eta, eta_p, &[p], &form, &w, GreenMethod::Lower, &s).unwrap();
            assert!(rel(g.value, oracle) < 1e-6, "{eta} {eta_p}: {} {oracle}", g.value);
        }
    }

    #[test]
    fn upper_constant_bounds_upper() {
        let form = iso(2, -0.5);
        let k2 = effective_upper_constant(&form).unwrap();
        let w = ScalarPotential::zero();
        let p = 2.0;
        let g = green_momentum(&Sequential, 0.0, 0.0, &[p, 0.0], &form, &w, GreenMethod::Upper, &settings())
            .unwrap();
        // Isotropic: |Ṽ|₀ |p|² = p·Ṽ·p, so the bound is attained.
        assert!(rel(g.value, k2 * libm::pow(p, -4.0 / 3.0)) < 1e-6);
    }

    #[test]
    fn fit_exact_power_law() {
        let xs = log_grid(1.0, 10.0, 5);
        let samples: Vec<_> = xs.iter().map(|&x| (x, 3.0 * libm::pow(x, -2.0), 0.0)).collect();
        let f = fit_scaling_exponent(&samples).unwrap();
        assert!((f.exponent + 2.0).abs() < 1e-12);
        assert!((f.amplitude - 3.0).abs() < 1e-11);
        assert!(f.residual_rms < 1e-12);
        assert_eq!(f.window, (1.0, 10.0));
        assert!(fit_scaling_exponent(&samples[..2]).is_err());
        let mut bad = samples.clone();
        bad[1].1 = 0.0;
        assert!(fit_scaling_exponent(&bad).is_err());
    }

    #[test]
    fn zero_momentum_constant_w() {
        let w = ScalarPotential::power_law(2.0, 0.0).unwrap();
        let g = zero_momentum_finiteness(&w, &Tolerance::with_rel(1e-8)).unwrap();
        assert!(rel(g.value, 0.5) < 1e-7);
        let w = ScalarPotential::power_law(1.0, 1.0).unwrap();
        let g = zero_momentum_finiteness(&w, &Tolerance::with_rel(1e-8)).unwrap();
        assert!(g.value.is_finite() && g.value > 0.0);
    }

    #[test]
    fn shifted_center() {
        let r = shifted_center_equivalence(&Sequential, -0.25, 1.5, 2.0, &settings()).unwrap();
        assert!(r.bounds_rel_diff < 1e-8);
        assert!(r.mc_bit_identical);
    }

    #[test]
    fn sandwich_small() {
        let rows = sandwich_check(
            &Sequential,
            &[1.0, 4.0],
            &iso(1, -0.5),
            &ScalarPotential::zero(),
            0.0,
            0.0,
            1.0,
            &GreenSettings {
                tau_points: 24,
                mc: McSettings {
                    n_paths: 1000,
                    ..settings().mc
                },
                ..settings()
            },
        )
        .unwrap();
        for r in &rows {
            assert!(r.lower.value < r.upper.value);
            assert!(r.pass(), "{r:?}");
        }
    }
}
