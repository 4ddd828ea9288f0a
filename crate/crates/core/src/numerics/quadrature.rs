use alloc::vec::Vec;
use core::f64::consts::PI;

use super::gauss_kronrod::adaptive;
use super::{QuadratureResult, Tolerance};
use crate::{Error, Result};

/// Half-width of the truncated Gaussian domain; `e^{-13²/2}` is below 1e-36.
pub const GAUSSIAN_CUTOFF: f64 = 13.0;

/// Point where the integrand behaves like `|x - x0|^exponent`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Breakpoint {
    pub x: f64,
    pub exponent: f64,
}

impl Breakpoint {
    pub fn new(x: f64, exponent: f64) -> Self {
        Breakpoint { x, exponent }
    }

    /// A kink or discontinuity without a singularity.
    pub fn regular(x: f64) -> Self {
        Breakpoint { x, exponent: 0.0 }
    }
}

fn check_exponent(e: f64) -> Result<()> {
    if e > -1.0 {
        Ok(())
    } else {
        Err(Error::divergent("endpoint exponent must exceed -1"))
    }
}

/// Quadrature node handed to integrands that need the distance to the
/// nearest breakpoint without cancellation: `x = anchor + offset`, with
/// `offset` exact.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Node {
    pub x: f64,
    pub anchor: f64,
    pub offset: f64,
}

/// `∫_a^b f(x) dx` where `f ~ (x-a)^ea` near `a` and `f ~ (b-x)^eb` near `b`.
///
/// Each half of the interval is mapped by `x = a + L t^k`, `k = 1/(1+e)`,
/// which turns the declared power into a bounded integrand.
pub fn integrate_endpoint_singular<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    ea: f64,
    eb: f64,
    tol: &Tolerance,
) -> Result<QuadratureResult> {
    integrate_endpoint_nodes(|n: Node| f(n.x), a, b, ea, eb, tol)
}

pub(crate) fn integrate_endpoint_nodes<F: FnMut(Node) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    ea: f64,
    eb: f64,
    tol: &Tolerance,
) -> Result<QuadratureResult> {
    check_exponent(ea)?;
    check_exponent(eb)?;
    if a == b {
        return Ok(QuadratureResult::zero());
    }
    let mid = 0.5 * (a + b);
    let half = mid - a;
    let mut total = QuadratureResult::zero();
    total.evaluations = 0;
    for (origin, dir, e) in [(a, 1.0, ea), (b, -1.0, eb)] {
        let k = if e < 0.0 { 1.0 / (1.0 + e) } else { 1.0 };
        let r = adaptive(
            |t| {
                let tk = if k == 1.0 { t } else { libm::pow(t, k) };
                let offset = dir * half * tk;
                let jac = if k == 1.0 { half } else { half * k * tk / t };
                let y = f(Node {
                    x: origin + offset,
                    anchor: origin,
                    offset,
                });
                if y == 0.0 {
                    0.0
                } else {
                    y * jac
                }
            },
            0.0,
            1.0,
            tol,
        )?;
        total.accumulate(&r);
    }
    Ok(total)
}

/// `∫₀¹ f(s, 1-s) (s(1-s))^e ds` with the weight folded into the Jacobian of
/// the endpoint substitution so it is never evaluated at its singularity.
///
/// `f` receives both `s` and `1-s`, each accurate near its own endpoint.
pub(crate) fn integrate_unit_weighted<F: FnMut(f64, f64) -> f64>(
    mut f: F,
    e: f64,
    tol: &Tolerance,
) -> Result<QuadratureResult> {
    check_exponent(e)?;
    let mut total = QuadratureResult::zero();
    total.evaluations = 0;
    if e == 0.0 {
        let r = adaptive(|s| f(s, 1.0 - s), 0.0, 1.0, tol)?;
        total.accumulate(&r);
        return Ok(total);
    }
    let k = 1.0 / (1.0 + e);
    let c = k * libm::pow(0.5, 1.0 + e);
    for left in [true, false] {
        let r = adaptive(
            |t| {
                // Distance to the near endpoint; the weight s^e and the
                // Jacobian combine into k L^{1+e}.
                let near = 0.5 * libm::pow(t, k);
                let far = 1.0 - near;
                let (s, sc) = if left { (near, far) } else { (far, near) };
                let y = f(s, sc);
                if y == 0.0 {
                    0.0
                } else {
                    y * c * libm::pow(far, e)
                }
            },
            0.0,
            1.0,
            tol,
        )?;
        total.accumulate(&r);
    }
    Ok(total)
}

/// `∫₀¹ f(s) (s(1-s))^endpoint_exponent ds`.
pub fn integrate_unit_interval<F: FnMut(f64) -> f64>(
    mut f: F,
    endpoint_exponent: f64,
    tol: &Tolerance,
) -> Result<QuadratureResult> {
    integrate_unit_weighted(|s, _| f(s), endpoint_exponent, tol)
}

/// `∫₀¹ (s(1-s))^ν ds`.
pub fn beta_weight_integral(nu: f64) -> Result<f64> {
    if !(nu > -1.0) {
        return Err(Error::divergent("(s(1-s))^ν is not integrable for ν <= -1"));
    }
    Ok(integrate_unit_weighted(|_, _| 1.0, nu, &Tolerance::with_rel(1e-12))?.value)
}

/// `∫_a^b f` split at every breakpoint inside `[a, b]`, with each piece
/// integrated by [`integrate_endpoint_singular`] using the exponents of the
/// breakpoints that bound it.
///
/// A coarse pass fixes the absolute target so that pieces contributing
/// little to the total are not refined to their own relative tolerance.
pub fn integrate_with_breakpoints<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    breaks: &[Breakpoint],
    tol: &Tolerance,
) -> Result<QuadratureResult> {
    integrate_breakpoint_nodes(|n: Node| f(n.x), a, b, breaks, tol)
}

pub(crate) fn integrate_breakpoint_nodes<F: FnMut(Node) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    breaks: &[Breakpoint],
    tol: &Tolerance,
) -> Result<QuadratureResult> {
    if !(a < b) {
        return Err(Error::domain("integrate_with_breakpoints needs a < b"));
    }
    let mut nodes: Vec<(f64, f64)> = Vec::with_capacity(breaks.len() + 2);
    let at = |x: f64| {
        breaks
            .iter()
            .filter(|bp| bp.x == x)
            .map(|bp| bp.exponent)
            .fold(0.0f64, f64::min)
    };
    nodes.push((a, at(a)));
    for bp in breaks {
        check_exponent(bp.exponent)?;
        if bp.x > a && bp.x < b {
            nodes.push((bp.x, bp.exponent));
        }
    }
    nodes.push((b, at(b)));
    nodes.sort_by(|x, y| x.0.total_cmp(&y.0));
    nodes.dedup_by(|x, y| {
        if x.0 == y.0 {
            y.1 = y.1.min(x.1);
            true
        } else {
            false
        }
    });

    let coarse_tol = Tolerance {
        rel: 1e-3,
        ..*tol
    };
    let mut scale = 0.0;
    for w in nodes.windows(2) {
        let r = integrate_endpoint_nodes(&mut f, w[0].0, w[1].0, w[0].1, w[1].1, &coarse_tol)?;
        scale += r.value.abs();
    }
    let pieces = (nodes.len() - 1) as f64;
    let fine = tol.with_abs(tol.abs.max(tol.rel * scale / pieces));
    let mut total = QuadratureResult::zero();
    total.evaluations = 0;
    for w in nodes.windows(2) {
        let r = integrate_endpoint_nodes(&mut f, w[0].0, w[1].0, w[0].1, w[1].1, &fine)?;
        total.accumulate(&r);
    }
    Ok(total)
}

/// `(2π)^{-1/2} ∫ f(y) e^{-y²/2} dy`.
pub fn gaussian_expectation<F: FnMut(f64) -> f64>(f: F) -> Result<QuadratureResult> {
    gaussian_expectation_with_breaks(f, &[], &Tolerance::default())
}

/// [`gaussian_expectation`] with declared singular points of `f`.
pub fn gaussian_expectation_with_breaks<F: FnMut(f64) -> f64>(
    mut f: F,
    breaks: &[Breakpoint],
    tol: &Tolerance,
) -> Result<QuadratureResult> {
    gaussian_expectation_nodes(|n: Node| f(n.x), breaks, tol)
}

pub(crate) fn gaussian_expectation_nodes<F: FnMut(Node) -> f64>(
    mut f: F,
    breaks: &[Breakpoint],
    tol: &Tolerance,
) -> Result<QuadratureResult> {
    let norm = 1.0 / libm::sqrt(2.0 * PI);
    let mut all: Vec<Breakpoint> = Vec::with_capacity(breaks.len() + 1);
    all.extend_from_slice(breaks);
    all.push(Breakpoint::regular(0.0));
    let mut r = integrate_breakpoint_nodes(
        |n: Node| {
            let g = libm::exp(-0.5 * n.x * n.x);
            if g == 0.0 {
                0.0
            } else {
                f(n) * g
            }
        },
        -GAUSSIAN_CUTOFF,
        GAUSSIAN_CUTOFF,
        &all,
        tol,
    )?;
    r.value *= norm;
    r.abs_error_estimate *= norm;
    Ok(r)
}

/// Shape of the τ-integrand passed to [`integrate_semi_infinite`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SemiInfinite {
    /// `f(τ) ~ τ^small_exponent` as `τ → 0`.
    pub small_exponent: f64,
}

/// `∫₀^∞ f(τ) dτ` for integrands with an integrable power at 0 and decay at
/// infinity.
///
/// The integral is taken in `u = ln τ` over the range where `τ f(τ)` is
/// non-negligible, split at the first scan point past the peak where it
/// drops below 1e-3 of the peak. The part below the range is added from the
/// declared power law.
pub fn integrate_semi_infinite<F: FnMut(f64) -> f64>(
    mut f: F,
    shape: SemiInfinite,
    tol: &Tolerance,
) -> Result<QuadratureResult> {
    let e = shape.small_exponent;
    if !(e > -1.0) {
        return Err(Error::divergent("τ-integrand not integrable at τ = 0"));
    }
    const STEP: f64 = 4.0;
    const MAX_STEPS: i32 = 60;
    let mut g = |tau: f64| -> Result<f64> {
        let v = tau * f(tau);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFiniteIntegrand { x: tau })
        }
    };

    // Scan downward until the small-τ power law has taken over, then upward
    // until the integrand has decayed.
    let mut scan: Vec<(f64, f64)> = Vec::new();
    let mut peak = 0.0f64;
    let mut tau_lo = 1.0;
    let mut g_lo = g(1.0)?;
    peak = peak.max(g_lo.abs());
    scan.push((1.0, g_lo));
    for _ in 0..4 * MAX_STEPS {
        let t = tau_lo / STEP;
        let v = g(t)?;
        peak = peak.max(v.abs());
        scan.push((t, v));
        tau_lo = t;
        g_lo = v;
        if (peak > 0.0 && v.abs() <= 1e-12 * peak) || t < 1e-250 {
            break;
        }
    }
    let mut tau_hi = 1.0;
    let mut prev = f64::INFINITY;
    let mut decayed = false;
    for _ in 0..MAX_STEPS {
        let v = g(tau_hi)?;
        peak = peak.max(v.abs());
        if tau_hi > 1.0 {
            scan.push((tau_hi, v));
        }
        if peak > 0.0 && v.abs() <= 1e-18 * peak && v.abs() <= prev {
            decayed = true;
            break;
        }
        prev = v.abs();
        tau_hi *= STEP;
    }
    if peak == 0.0 {
        return Ok(QuadratureResult::zero());
    }
    if !decayed {
        return Err(Error::divergent("τ-integrand does not decay"));
    }
    scan.sort_by(|x, y| x.0.total_cmp(&y.0));

    let peak_tau = scan
        .iter()
        .max_by(|x, y| x.1.abs().total_cmp(&y.1.abs()))
        .map(|p| p.0)
        .unwrap_or(1.0);
    let tau_star = scan
        .iter()
        .find(|p| p.0 > peak_tau && p.1.abs() < 1e-3 * peak)
        .map(|p| p.0)
        .unwrap_or(tau_hi);

    let head = g_lo / (1.0 + e);
    let width = libm::log(tau_hi) - libm::log(tau_lo);
    let piece_tol = tol.with_abs(tol.abs.max(0.25 * tol.rel * peak * width.min(4.0)));
    let mut total = QuadratureResult::zero();
    total.evaluations = 0;
    let mut err: Option<Error> = None;
    let mut body = |u: f64| match g(libm::exp(u)) {
        Ok(v) => v,
        Err(e) => {
            err.get_or_insert(e);
            0.0
        }
    };
    let lo = libm::log(tau_lo);
    let mid = libm::log(tau_star);
    let hi = libm::log(tau_hi);
    if mid > lo {
        let r = adaptive(&mut body, lo, mid, &piece_tol)?;
        total.accumulate(&r);
    }
    if hi > mid {
        let r = adaptive(&mut body, mid, hi, &piece_tol)?;
        total.accumulate(&r);
    }
    if let Some(e) = err {
        return Err(e);
    }
    total.value += head;
    total.abs_error_estimate += 1e-12 * head.abs();
    Ok(total)
}

/// `∫_a^∞ f(x) dx` for integrands with an algebraic tail.
///
/// Panels of doubling width are summed until the panel contributions form a
/// geometric sequence, whose remainder is then added in closed form.
pub fn integrate_half_line<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    first_width: f64,
    tol: &Tolerance,
) -> Result<QuadratureResult> {
    if !(first_width > 0.0) {
        return Err(Error::domain("integrate_half_line needs a positive first panel"));
    }
    const MAX_PANELS: usize = 200;
    let mut total = QuadratureResult::zero();
    total.evaluations = 0;
    let mut left = a;
    let mut width = first_width;
    let mut history: Vec<f64> = Vec::new();
    let mut scale = 0.0f64;
    for _ in 0..MAX_PANELS {
        let panel_tol = tol.with_abs(tol.abs.max(0.1 * tol.rel * scale));
        let r = adaptive(&mut f, left, left + width, &panel_tol)?;
        total.accumulate(&r);
        scale = scale.max(total.value.abs());
        history.push(r.value);
        left += width;
        width *= 2.0;

        let n = history.len();
        if n >= 4 {
            let (p0, p1, p2) = (history[n - 3], history[n - 2], history[n - 1]);
            if p2 == 0.0 && p1 == 0.0 {
                return Ok(total);
            }
            let r1 = p1 / p0;
            let r2 = p2 / p1;
            let geometric = r1 > 0.0 && r2 > 0.0 && r2 < 0.95 && (r2 - r1).abs() < 0.02 * r2;
            if geometric {
                let tail = p2 * r2 / (1.0 - r2);
                let tail_err = (p2 * r1 / (1.0 - r1) - tail).abs();
                if tail.abs() <= 0.1 * total.value.abs() || tail_err <= tol.rel * total.value.abs()
                {
                    total.value += tail;
                    total.abs_error_estimate += tail_err;
                    if total.abs_error_estimate <= 10.0 * tol.rel * total.value.abs()
                        || tail.abs() <= tol.rel * total.value.abs()
                    {
                        return Ok(total);
                    }
                    total.value -= tail;
                    total.abs_error_estimate -= tail_err;
                }
            }
            if p2.abs() <= 1e-3 * tol.rel * total.value.abs() {
                return Ok(total);
            }
        }
    }
    Err(Error::Accuracy {
        what: "half-line panel sum did not converge",
        estimate: history.last().copied().unwrap_or(0.0).abs(),
        target: tol.rel * total.value.abs(),
    })
}

/// `∫_{-∞}^{∞} f` with breakpoints: the span between the outermost
/// breakpoints by [`integrate_breakpoint_nodes`], one singular panel of
/// width `width` past each of them, then [`integrate_half_line`] tails.
pub(crate) fn integrate_line_nodes<F: FnMut(Node) -> f64>(
    mut f: F,
    breaks: &[Breakpoint],
    width: f64,
    tol: &Tolerance,
) -> Result<QuadratureResult> {
    if breaks.is_empty() {
        return Err(Error::domain("integrate_line_nodes needs a breakpoint"));
    }
    if !(width > 0.0 && width.is_finite()) {
        return Err(Error::domain("integrate_line_nodes needs a positive width"));
    }
    let lo = breaks.iter().map(|b| b.x).fold(f64::INFINITY, f64::min);
    let hi = breaks.iter().map(|b| b.x).fold(f64::NEG_INFINITY, f64::max);
    let at = |x: f64| {
        breaks
            .iter()
            .filter(|b| b.x == x)
            .map(|b| b.exponent)
            .fold(0.0f64, f64::min)
    };
    let mut total = QuadratureResult::zero();
    total.evaluations = 0;
    if hi > lo {
        let r = integrate_breakpoint_nodes(&mut f, lo, hi, breaks, tol)?;
        total.accumulate(&r);
    }
    let r = integrate_endpoint_nodes(&mut f, hi, hi + width, at(hi), 0.0, tol)?;
    total.accumulate(&r);
    let r = integrate_endpoint_nodes(&mut f, lo - width, lo, 0.0, at(lo), tol)?;
    total.accumulate(&r);
    let scale = total.value.abs();
    let tail_tol = tol.with_abs(tol.abs.max(0.1 * tol.rel * scale));
    let right = hi + width;
    let r = integrate_half_line(
        |x| f(Node { x, anchor: x, offset: 0.0 }),
        right,
        width,
        &tail_tol,
    )?;
    total.accumulate(&r);
    let left = lo - width;
    let r = integrate_half_line(
        |t| {
            let x = 2.0 * left - t;
            f(Node { x, anchor: x, offset: 0.0 })
        },
        left,
        width,
        &tail_tol,
    )?;
    total.accumulate(&r);
    Ok(total)
}
