//! Jensen bounds on the momentum-space kernel.
//!
//! With `m(s) = η + s(η′ − η)` and `σ(s) = √(τ s(1−s))`,
//!
//! ```text
//! P̃^L = (2πτ)^{-1/2} e^{-Δ²/2τ} exp(-τ ∫₀¹ ds E_u[U(m + σu)])
//! P̃^U = (2πτ)^{-1/2} e^{-Δ²/2τ} ∫₀¹ ds E_u[exp(-τ U(m + σu))]
//! ```
//!
//! where `U = p·Ṽ·p + W` and `u` is standard normal.

use alloc::vec::Vec;

use crate::kernel::free_kernel;
use crate::linalg::SymMatrix;
use crate::numerics::quadrature::{
    gaussian_expectation_nodes, integrate_endpoint_nodes, Breakpoint, Node, GAUSSIAN_CUTOFF,
};
use crate::numerics::{beta_weight_integral, QuadratureResult, Tolerance};
use crate::potentials::{AnalysisMode, LinePotential, MomentumForm, PowerLawTerm, ScalarPotential};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundSide {
    Lower,
    Upper,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoundValue {
    pub value: f64,
    pub side: BoundSide,
    pub abs_error_estimate: f64,
    pub tau: f64,
    pub eta: f64,
    pub eta_p: f64,
    pub p: Vec<f64>,
}

/// Straight line from `η` to `η′` in time `τ`, parametrized by a node in `s`.
#[derive(Clone, Copy)]
struct Segment {
    eta: f64,
    eta_p: f64,
    tau: f64,
}

/// Position on the line at an outer node, with distances to centers taken
/// from the nearer endpoint.
#[derive(Clone, Copy)]
struct Slice {
    m: f64,
    sigma: f64,
    from_end: bool,
    s: f64,
    sc: f64,
}

impl Segment {
    fn slice(&self, n: Node) -> Slice {
        let from_end = n.anchor == 1.0;
        let (s, sc) = if from_end {
            (n.x, -n.offset)
        } else {
            (n.offset, 1.0 - n.offset)
        };
        let delta = self.eta_p - self.eta;
        let m = if from_end {
            self.eta_p - sc * delta
        } else {
            self.eta + s * delta
        };
        Slice {
            m,
            sigma: libm::sqrt(self.tau * s * sc),
            from_end,
            s,
            sc,
        }
    }

    /// `m(s) − c` without cancellation when an endpoint sits on `c`.
    fn base(&self, sl: &Slice, c: f64) -> f64 {
        let delta = self.eta_p - self.eta;
        if sl.from_end {
            (self.eta_p - c) - sl.sc * delta
        } else {
            (self.eta - c) + sl.s * delta
        }
    }

    /// Outer exponent at an endpoint resting on a singular center.
    fn endpoint_exponent(u: &LinePotential, at: f64) -> f64 {
        u.singularities()
            .iter()
            .filter(|(c, _)| *c == at)
            .map(|(_, e)| 0.5 * e)
            .fold(0.0, f64::min)
    }
}

fn inner_tol(tol: &Tolerance) -> Tolerance {
    Tolerance {
        rel: (tol.rel * 1e-2).max(1e-13),
        ..*tol
    }
}

#[derive(Clone, Copy)]
enum Inner {
    /// `g(v) = v`: breakpoints carry the singular exponents.
    Exponent,
    /// `g(v) = e^{-τv}`: each center gets a ladder of breakpoints on the
    /// scale where `τ a |x − c|^q` reaches 1.
    Survival(f64),
}

/// Ladder spacing and reach, in units of the Gaussian variable.
const LADDER_RATIO: f64 = 4.0;
const LADDER_MIN: f64 = 1e-12;
const LADDER_MAX: f64 = 0.25;

/// `E_u[g(U(m + σu))]` at one outer node.
fn smoothed<G: Fn(f64) -> f64>(
    u: &LinePotential,
    seg: &Segment,
    sl: &Slice,
    g: &G,
    mode: Inner,
    tol: &Tolerance,
) -> Result<QuadratureResult> {
    let ustar = |c: f64| (c - sl.m) / sl.sigma;
    let mut breaks: Vec<Breakpoint> = u
        .terms()
        .map(|t| {
            let e = match mode {
                Inner::Exponent => t.exponent.min(0.0),
                // `x = t^{1/q}` straightens the cusp of `e^{-τ a |x|^q}`.
                Inner::Survival(_) if t.exponent > 0.0 && t.exponent < 1.0 => t.exponent - 1.0,
                Inner::Survival(_) => 0.0,
            };
            Breakpoint::new(ustar(t.center), e)
        })
        .collect();
    // Ladder anchors with their exact offsets from the term's center.
    let mut rungs: Vec<(f64, f64, f64)> = Vec::new();
    if let Inner::Survival(tau) = mode {
        for t in u.terms() {
            if t.exponent == 0.0 || t.amplitude <= 0.0 {
                continue;
            }
            let c = ustar(t.center);
            if c.abs() > GAUSSIAN_CUTOFF + LADDER_MAX {
                continue;
            }
            let mut l = libm::pow(tau * t.amplitude, -1.0 / t.exponent) / sl.sigma;
            l = l.max(LADDER_MIN);
            while l < LADDER_MAX {
                for r in [-l, l] {
                    breaks.push(Breakpoint::regular(c + r));
                    rungs.push((c + r, t.center, r));
                }
                l *= LADDER_RATIO;
            }
        }
    }
    gaussian_expectation_nodes(
        |n: Node| {
            let x = sl.m + sl.sigma * n.x;
            let v = u.with_distance(x, |t: &PowerLawTerm| {
                if n.anchor == ustar(t.center) {
                    return sl.sigma * n.offset;
                }
                for &(a, c, r) in &rungs {
                    if a == n.anchor && c == t.center {
                        return sl.sigma * (r + n.offset);
                    }
                }
                seg.base(sl, t.center) + sl.sigma * n.x
            });
            g(v)
        },
        &breaks,
        tol,
    )
}

/// `J = ∫₀¹ ds E_u[U(m + σu)]` with its error estimate.
pub(crate) fn smoothed_exponent(
    u: &LinePotential,
    eta: f64,
    eta_p: f64,
    tau: f64,
    tol: &Tolerance,
) -> Result<QuadratureResult> {
    if let Some(c) = u.constant_value() {
        return Ok(QuadratureResult {
            value: c,
            abs_error_estimate: 0.0,
            evaluations: 1,
        });
    }
    let seg = Segment { eta, eta_p, tau };
    let itol = inner_tol(tol);
    let mut failure: Option<Error> = None;
    let mut inner_err: f64 = 0.0;
    let mut outer = integrate_endpoint_nodes(
        |n: Node| {
            if failure.is_some() {
                return 0.0;
            }
            let sl = seg.slice(n);
            match smoothed(u, &seg, &sl, &|v| v, Inner::Exponent, &itol) {
                Ok(r) => {
                    inner_err = inner_err.max(r.abs_error_estimate);
                    r.value
                }
                Err(e) => {
                    failure = Some(e);
                    0.0
                }
            }
        },
        0.0,
        1.0,
        Segment::endpoint_exponent(u, eta),
        Segment::endpoint_exponent(u, eta_p),
        tol,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    outer.abs_error_estimate += inner_err;
    Ok(outer)
}

/// `∫₀¹ ds E_u[exp(-τ U(m + σu))]`.
pub(crate) fn smoothed_survival(
    u: &LinePotential,
    eta: f64,
    eta_p: f64,
    tau: f64,
    tol: &Tolerance,
) -> Result<QuadratureResult> {
    if let Some(c) = u.constant_value() {
        return Ok(QuadratureResult {
            value: libm::exp(-tau * c),
            abs_error_estimate: 0.0,
            evaluations: 1,
        });
    }
    let seg = Segment { eta, eta_p, tau };
    let itol = inner_tol(tol);
    let mut failure: Option<Error> = None;
    let mut inner_err: f64 = 0.0;
    let g = |v: f64| libm::exp(-tau * v);
    let mut outer = integrate_endpoint_nodes(
        |n: Node| {
            if failure.is_some() {
                return 0.0;
            }
            let sl = seg.slice(n);
            match smoothed(u, &seg, &sl, &g, Inner::Survival(tau), &itol) {
                Ok(r) => {
                    inner_err = inner_err.max(r.abs_error_estimate);
                    r.value
                }
                Err(e) => {
                    failure = Some(e);
                    0.0
                }
            }
        },
        0.0,
        1.0,
        0.0,
        0.0,
        tol,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    outer.abs_error_estimate += inner_err;
    Ok(outer)
}

fn check_args(eta: f64, eta_p: f64, tau: f64, p: &[f64], form: &MomentumForm) -> Result<()> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::domain(alloc::format!("τ must be positive and finite, got {tau}")));
    }
    if !(eta.is_finite() && eta_p.is_finite()) {
        return Err(Error::domain("η and η′ must be finite"));
    }
    form.check_momentum(p)
}

/// Jensen lower bound `P̃^L(η, η′; p)`.
pub fn lower_bound_kernel(
    eta: f64,
    eta_p: f64,
    tau: f64,
    p: &[f64],
    form: &MomentumForm,
    w: &ScalarPotential,
    tol: &Tolerance,
) -> Result<BoundValue> {
    check_args(eta, eta_p, tau, p, form)?;
    form.validate_for(AnalysisMode::LowerBound)?;
    w.validate_for(AnalysisMode::LowerBound)?;
    let u = form.project(p).plus(&w.line());
    let j = smoothed_exponent(&u, eta, eta_p, tau, tol)?;
    let value = free_kernel(eta, eta_p, tau) * libm::exp(-tau * j.value);
    Ok(BoundValue {
        value,
        side: BoundSide::Lower,
        abs_error_estimate: value * tau * j.abs_error_estimate,
        tau,
        eta,
        eta_p,
        p: p.to_vec(),
    })
}

/// Jensen upper bound `P̃^U(η, η′; p)`.
pub fn upper_bound_kernel(
    eta: f64,
    eta_p: f64,
    tau: f64,
    p: &[f64],
    form: &MomentumForm,
    w: &ScalarPotential,
    tol: &Tolerance,
) -> Result<BoundValue> {
    check_args(eta, eta_p, tau, p, form)?;
    form.validate_for(AnalysisMode::UpperBound)?;
    w.validate_for(AnalysisMode::UpperBound)?;
    let u = form.project(p).plus(&w.line());
    let pref = free_kernel(eta, eta_p, tau);
    let r = smoothed_survival(&u, eta, eta_p, tau, tol)?;
    Ok(BoundValue {
        value: pref * r.value,
        side: BoundSide::Upper,
        abs_error_estimate: pref * r.abs_error_estimate,
        tau,
        eta,
        eta_p,
        p: p.to_vec(),
    })
}

/// Kernel bounds for a composite form from its bracketing pure forms:
/// the lower bound of the upper bracket and the upper bound of the lower
/// bracket, each times `e^{-τ p·l·p}`.
pub fn composite_kernel_bounds(
    eta: f64,
    eta_p: f64,
    tau: f64,
    p: &[f64],
    form: &MomentumForm,
    w: &ScalarPotential,
    tol: &Tolerance,
) -> Result<(BoundValue, BoundValue)> {
    let br = form.bracketing()?;
    let mut lo = lower_bound_kernel(eta, eta_p, tau, p, &br.upper, w, tol)?;
    let mut hi = upper_bound_kernel(eta, eta_p, tau, p, &br.lower, w, tol)?;
    for (b, l) in [(&mut lo, &br.l_upper), (&mut hi, &br.l_lower)] {
        let f = libm::exp(-tau * l.quad_form(p));
        b.value *= f;
        b.abs_error_estimate *= f;
    }
    Ok((lo, hi))
}

fn gaussian_average(u: &LinePotential, tol: &Tolerance) -> Result<f64> {
    let breaks: Vec<Breakpoint> = u
        .singularities()
        .into_iter()
        .map(|(c, e)| Breakpoint::new(c, e))
        .collect();
    if let Some(c) = u.constant_value() {
        return Ok(c);
    }
    let r = gaussian_expectation_nodes(
        |n: Node| u.with_distance(n.x, |t| (n.anchor - t.center) + n.offset),
        &breaks,
        tol,
    )?;
    Ok(r.value)
}

/// `h = E_y[Ṽ(y)]`, `y` standard normal.
pub fn h_form(form: &MomentumForm) -> Result<SymMatrix> {
    form.validate_for(AnalysisMode::LowerBound)?;
    let d = form.dim();
    let tol = Tolerance::with_rel(1e-11);
    let mut rows = alloc::vec![alloc::vec![0.0; d]; d];
    for (i, row) in rows.iter_mut().enumerate() {
        let mut e = alloc::vec![0.0; d];
        e[i] = 1.0;
        row[i] = gaussian_average(&form.project(&e), &tol)?;
    }
    if let MomentumForm::Composite { l, .. } = form {
        // The base is diagonal, so off-diagonal entries come from l alone.
        for (i, row) in rows.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                if i != j {
                    *v = l.get(i, j);
                }
            }
        }
    }
    SymMatrix::from_rows(&rows)
}

/// `B = E_y[W(y)]`.
pub fn b_const(w: &ScalarPotential) -> Result<f64> {
    w.validate_for(AnalysisMode::LowerBound)?;
    gaussian_average(&w.line(), &Tolerance::with_rel(1e-11))
}

/// `(2πτ)^{-1/2} exp(-τ^{1+ν} (p·h·p) Beta(ν) - B τ^{1+σ} Beta(σ))`.
pub fn closed_lower_scale_invariant(
    tau: f64,
    p: &[f64],
    nu: f64,
    sigma: f64,
    h: &SymMatrix,
    b: f64,
) -> Result<BoundValue> {
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::domain("τ must be positive and finite"));
    }
    if p.len() != h.dim() {
        return Err(Error::domain("momentum and h have different dimensions"));
    }
    if !(nu > -0.5) {
        return Err(Error::divergent(alloc::format!(
            "the Gaussian average of Ṽ diverges for ν = {nu} <= -1/2"
        )));
    }
    let mut exponent = libm::pow(tau, 1.0 + nu) * h.quad_form(p) * beta_weight_integral(nu)?;
    if b != 0.0 {
        if !(sigma > -0.5) {
            return Err(Error::divergent(alloc::format!(
                "the Gaussian average of W diverges for σ = {sigma} <= -1/2"
            )));
        }
        exponent += b * libm::pow(tau, 1.0 + sigma) * beta_weight_integral(sigma)?;
    }
    Ok(BoundValue {
        value: libm::exp(-exponent) / libm::sqrt(2.0 * core::f64::consts::PI * tau),
        side: BoundSide::Lower,
        abs_error_estimate: 0.0,
        tau,
        eta: 0.0,
        eta_p: 0.0,
        p: p.to_vec(),
    })
}
