//! Deterministic integral forms of the upper-bound Green's functions.
//!
//! Integrating the upper-bound kernel over τ in closed form gives, in
//! momentum space,
//!
//! ```text
//! G̃^U = π⁻¹ ∫₀¹ ds (s(1−s))^{-1/2} ∫ du K₀(√(2 M U(u)))
//! M   = (η′−η)² + (u − η − s(η′−η))² / (s(1−s))
//! ```
//!
//! and in position space, with `q = η + s(η′−η) + √(s(1−s)) w`,
//!
//! ```text
//! G^U = (2π)^{-(d+2)/2} Γ(d/2) ∫₀¹ ds ∫ dw det Ṽ(q)^{-1/2}
//!       (½ Δx·Ṽ(q)⁻¹·Δx + (η′−η)² + w²)^{-d/2}
//! ```

use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::green::{fit_scaling_exponent, GreenMethod, GreensValue, ScalingFit};
use crate::numerics::quadrature::{integrate_line_nodes, integrate_unit_weighted, Breakpoint, Node};
use crate::numerics::{bessel_k0, gamma_fn, QuadratureResult, Tolerance};
use crate::potentials::{AnalysisMode, LinePotential, MomentumForm, PowerLawTerm};
use crate::{Error, Result};

/// Exponent used for logarithmic singularities of K₀.
const LOG_EXPONENT: f64 = -0.5;

/// Threshold on `residual_rms` above which a slope fit is inconclusive.
pub const INCONCLUSIVE_RMS: f64 = 0.05;

#[derive(Clone, Debug, PartialEq)]
pub struct PositionGreensValue {
    pub value: f64,
    pub abs_error_estimate: f64,
    pub eta: f64,
    pub x: Vec<f64>,
    pub eta_p: f64,
    pub x_p: Vec<f64>,
    pub dim: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecayFit {
    pub fit: ScalingFit,
    /// `−d + 1/(1+ρ)`.
    pub predicted: f64,
    pub inconclusive: bool,
}

fn k0(z: f64) -> f64 {
    if z > 700.0 {
        0.0
    } else if z > 0.0 {
        bessel_k0(z).unwrap_or(f64::INFINITY)
    } else {
        f64::INFINITY
    }
}

/// Breakpoint exponent for the centers of `u` inside a K₀ integrand: `U`
/// vanishes at centers of positive-exponent terms, giving a log singularity.
fn center_breaks(u: &LinePotential, map: impl Fn(f64) -> f64) -> Vec<Breakpoint> {
    u.terms()
        .map(|t| {
            let e = if t.exponent > 0.0 { LOG_EXPONENT } else { 0.0 };
            Breakpoint::new(map(t.center), e)
        })
        .collect()
}

/// Outer exponent in `s` when `η` sits on a center where `U` vanishes.
fn vanishing_endpoint_exponent(u: &LinePotential, eta: f64) -> f64 {
    u.terms()
        .filter(|t| t.center == eta && t.exponent > 0.0)
        .map(|t| {
            let nu = 0.5 * t.exponent;
            -nu / (2.0 * (1.0 + nu))
        })
        .fold(0.0, f64::min)
}

struct Failure(Option<Error>);

impl Failure {
    fn catch(&mut self, r: Result<QuadratureResult>, err: &mut f64) -> f64 {
        match r {
            Ok(r) => {
                *err = err.max(r.abs_error_estimate);
                r.value
            }
            Err(e) => {
                self.0.get_or_insert(e);
                0.0
            }
        }
    }
}

/// G̃^U for a line potential by the general `u` form.
pub(crate) fn bessel_upper(
    u: &LinePotential,
    eta: f64,
    eta_p: f64,
    tol: &Tolerance,
) -> Result<QuadratureResult> {
    if u.is_zero() {
        return Err(Error::divergent("G̃ diverges: the potential vanishes identically"));
    }
    let delta = eta_p - eta;
    let itol = inner(tol);
    let mut failure = Failure(None);
    let mut inner_err: f64 = 0.0;
    let mut r = integrate_unit_weighted(
        |s, sc| {
            if failure.0.is_some() {
                return 0.0;
            }
            let v = s * sc;
            let m = if s <= 0.5 { eta + s * delta } else { eta_p - sc * delta };
            let root = libm::sqrt(v);
            let mut breaks = center_breaks(u, |c| c);
            let me = if delta == 0.0 { LOG_EXPONENT } else { 0.0 };
            breaks.push(Breakpoint::new(m, me));
            let res = integrate_line_nodes(
                |n: Node| {
                    let dm = if n.anchor == m { n.offset } else { n.x - m };
                    let big_m = delta * delta + dm * dm / v;
                    let val = u.with_distance(n.x, |t: &PowerLawTerm| {
                        if n.anchor == t.center {
                            n.offset
                        } else {
                            n.x - t.center
                        }
                    });
                    k0(libm::sqrt(2.0 * big_m * val))
                },
                &breaks,
                root.max(1e-3 * delta.abs()).max(1e-300),
                &itol,
            );
            failure.catch(res, &mut inner_err)
        },
        -0.5,
        tol,
    )?;
    if let Some(e) = failure.0 {
        return Err(e);
    }
    r.value /= PI;
    r.abs_error_estimate = (r.abs_error_estimate + inner_err) / PI;
    Ok(r)
}

/// G̃^U at `η = η′` by the `w` form
/// `π⁻¹ ∫ds ∫dw K₀(|w| √(2 U(η + √(s(1−s)) w)))`.
pub(crate) fn bessel_upper_equal(u: &LinePotential, eta: f64, tol: &Tolerance) -> Result<QuadratureResult> {
    if u.is_zero() {
        return Err(Error::divergent("G̃ diverges: the potential vanishes identically"));
    }
    let itol = inner(tol);
    let mut failure = Failure(None);
    let mut inner_err: f64 = 0.0;
    // The weight is divided back out; it only steers the node placement.
    let e_end = vanishing_endpoint_exponent(u, eta);
    let mut r = integrate_unit_weighted(
        |s, sc| {
            if failure.0.is_some() {
                return 0.0;
            }
            let root = libm::sqrt(s * sc);
            let wc = |c: f64| (c - eta) / root;
            let mut breaks = center_breaks(u, wc);
            breaks.push(Breakpoint::new(0.0, LOG_EXPONENT));
            let res = integrate_line_nodes(
                |n: Node| {
                    let val = u.with_distance(eta + root * n.x, |t: &PowerLawTerm| {
                        if n.anchor == wc(t.center) {
                            root * n.offset
                        } else {
                            (eta - t.center) + root * n.x
                        }
                    });
                    k0(n.x.abs() * libm::sqrt(2.0 * val))
                },
                &breaks,
                1.0,
                &itol,
            );
            failure.catch(res, &mut inner_err) * libm::pow(s * sc, -e_end)
        },
        e_end,
        tol,
    )?;
    if let Some(e) = failure.0 {
        return Err(e);
    }
    r.value /= PI;
    r.abs_error_estimate = (r.abs_error_estimate + inner_err) / PI;
    Ok(r)
}

fn inner(tol: &Tolerance) -> Tolerance {
    Tolerance {
        rel: (tol.rel * 1e-2).max(1e-13),
        ..*tol
    }
}

/// G̃^U(η, η′; p) for `W = 0` by the K₀ representation.
pub fn gu_momentum_bessel(
    eta: f64,
    eta_p: f64,
    p: &[f64],
    form: &MomentumForm,
    tol: &Tolerance,
) -> Result<GreensValue> {
    form.check_momentum(p)?;
    form.validate_for(AnalysisMode::UpperBound)?;
    let u = form.project(p);
    let r = bessel_upper(&u, eta, eta_p, tol)?;
    Ok(GreensValue {
        value: r.value,
        method: GreenMethod::Upper,
        error: r.abs_error_estimate,
        eta,
        eta_p,
        p: p.to_vec(),
    })
}

/// [`gu_momentum_bessel`] at `η = η′` by the `w` form.
pub fn gu_momentum_bessel_equal(
    eta: f64,
    p: &[f64],
    form: &MomentumForm,
    tol: &Tolerance,
) -> Result<GreensValue> {
    form.check_momentum(p)?;
    form.validate_for(AnalysisMode::UpperBound)?;
    let u = form.project(p);
    let r = bessel_upper_equal(&u, eta, tol)?;
    Ok(GreensValue {
        value: r.value,
        method: GreenMethod::Upper,
        error: r.abs_error_estimate,
        eta,
        eta_p: eta,
        p: p.to_vec(),
    })
}

/// Large-|y| exponent `ρ` of the form (`2ρ` is the largest term exponent).
pub fn large_distance_exponent(form: &MomentumForm) -> f64 {
    let mut e = form
        .terms()
        .iter()
        .filter(|t| t.amplitude > 0.0)
        .map(|t| t.exponent)
        .fold(f64::NEG_INFINITY, f64::max);
    if let MomentumForm::Composite { l, .. } = form {
        if l.trace() > 0.0 {
            e = e.max(0.0);
        }
    }
    0.5 * e
}

fn position_checks(
    eta: f64,
    x: &[f64],
    eta_p: f64,
    x_p: &[f64],
    form: &MomentumForm,
) -> Result<(usize, Vec<f64>)> {
    let d = form.dim();
    if d < 2 {
        return Err(Error::domain("position-space Green's functions need d >= 2"));
    }
    if x.len() != d || x_p.len() != d {
        return Err(Error::domain(alloc::format!(
            "positions must have {d} components to match the form"
        )));
    }
    if !(eta.is_finite() && eta_p.is_finite()) || x.iter().chain(x_p).any(|v| !v.is_finite()) {
        return Err(Error::domain("coordinates must be finite"));
    }
    form.validate_for(AnalysisMode::UpperBound)?;
    let rho = large_distance_exponent(form);
    if !(rho > -1.0 + 1.0 / d as f64) {
        return Err(Error::divergent(alloc::format!(
            "G^U diverges: large-distance exponent ρ = {rho} must exceed -1 + 1/d"
        )));
    }
    let dx: Vec<f64> = x_p.iter().zip(x).map(|(b, a)| b - a).collect();
    if eta == eta_p && dx.iter().all(|v| *v == 0.0) {
        return Err(Error::Singular { center: eta });
    }
    Ok((d, dx))
}

/// Common `(s, w)` driver for the position forms; `g(q_dist, w)` receives
/// the node and returns the integrand at `q = m + √(s(1−s)) w`.
fn position_integral<G>(
    form: &MomentumForm,
    eta: f64,
    eta_p: f64,
    scale: f64,
    g: G,
    tol: &Tolerance,
) -> Result<QuadratureResult>
where
    G: Fn(&MomentumForm, f64, f64, f64) -> f64,
{
    let delta = eta_p - eta;
    let itol = inner(tol);
    let mut failure = Failure(None);
    let mut inner_err: f64 = 0.0;
    let mut e_end: f64 = 0.0;
    for t in form.terms() {
        if t.exponent > 0.0 && (t.center == eta || t.center == eta_p) {
            let nu = 0.5 * t.exponent;
            e_end = e_end.min(-nu / (2.0 * (1.0 + nu)));
        }
    }
    let r = integrate_unit_weighted(
        |s, sc| {
            if failure.0.is_some() {
                return 0.0;
            }
            let root = libm::sqrt(s * sc);
            let (base, m) = if s <= 0.5 {
                (eta, eta + s * delta)
            } else {
                (eta_p, eta_p - sc * delta)
            };
            let bd = if s <= 0.5 { s * delta } else { -sc * delta };
            let wc = |c: f64| (c - m) / root;
            let mut breaks: Vec<Breakpoint> = form
                .terms()
                .iter()
                .map(|t| Breakpoint::regular(wc(t.center)))
                .collect();
            breaks.push(Breakpoint::regular(0.0));
            let res = integrate_line_nodes(
                |n: Node| {
                    // Shift from `base` so that distances to a center at
                    // `base` carry no rounding from `m`.
                    let snapped = form
                        .terms()
                        .iter()
                        .find(|t| n.anchor == wc(t.center) && t.center == base);
                    let shift = match snapped {
                        Some(_) => root * n.offset,
                        None => bd + root * n.x,
                    };
                    g(form, base, shift, n.x)
                },
                &breaks,
                scale,
                &itol,
            );
            failure.catch(res, &mut inner_err) * libm::pow(s * sc, -e_end)
        },
        e_end,
        tol,
    );
    let mut r = r?;
    if let Some(e) = failure.0 {
        return Err(e);
    }
    r.abs_error_estimate += inner_err;
    Ok(r)
}

/// Position-space upper bound `G^U(η, x; η′, x′)`.
pub fn gu_position(
    eta: f64,
    x: &[f64],
    eta_p: f64,
    x_p: &[f64],
    form: &MomentumForm,
    tol: &Tolerance,
) -> Result<PositionGreensValue> {
    let (d, dx) = position_checks(eta, x, eta_p, x_p, form)?;
    let delta = eta_p - eta;
    let dx2: f64 = dx.iter().map(|v| v * v).sum();
    let half_d = 0.5 * d as f64;
    let isotropic = matches!(form, MomentumForm::Isotropic { .. });
    let g = |f: &MomentumForm, base: f64, shift: f64, w: f64| -> f64 {
        let tail = delta * delta + w * w;
        if isotropic {
            // det^{-1/2} (½|Δx|²/v + tail)^{-d/2} = (½|Δx|² + v·tail)^{-d/2}
            let v = f.matrix_unchecked(base, shift).get(0, 0);
            if v.is_infinite() {
                return 0.0;
            }
            libm::pow(0.5 * dx2 + v * tail, -half_d)
        } else {
            let m = f.matrix_unchecked(base, shift);
            if m.diag().iter().any(|v| v.is_infinite()) {
                return 0.0;
            }
            match m.cholesky() {
                Some(c) => {
                    libm::pow(0.5 * c.inv_quad_form(&dx) + tail, -half_d) / libm::sqrt(c.det())
                }
                None => f64::INFINITY,
            }
        }
    };
    let scale = libm::sqrt(dx2 + delta * delta);
    let r = position_integral(form, eta, eta_p, scale, g, tol)?;
    let norm = libm::pow(2.0 * PI, -(half_d + 1.0)) * gamma_fn(half_d)?;
    Ok(PositionGreensValue {
        value: norm * r.value,
        abs_error_estimate: norm * r.abs_error_estimate,
        eta,
        x: x.to_vec(),
        eta_p,
        x_p: x_p.to_vec(),
        dim: d,
    })
}

/// The reduced isotropic integral
/// `(2π)^{-(d+2)/2} ∫ds ∫dw (|Δx|² + v(q)((η′−η)² + w²))^{-d/2}`,
/// which omits the `Γ(d/2)` factor and uses `v` where the exact transform
/// has `2v`.
pub fn gu_position_isotropic_reduced(
    eta: f64,
    x: &[f64],
    eta_p: f64,
    x_p: &[f64],
    form: &MomentumForm,
    tol: &Tolerance,
) -> Result<PositionGreensValue> {
    if !matches!(form, MomentumForm::Isotropic { .. }) {
        return Err(Error::domain("the reduced form needs an isotropic Ṽ = v(y)·identity"));
    }
    let (d, dx) = position_checks(eta, x, eta_p, x_p, form)?;
    let delta = eta_p - eta;
    let dx2: f64 = dx.iter().map(|v| v * v).sum();
    let half_d = 0.5 * d as f64;
    let g = |f: &MomentumForm, base: f64, shift: f64, w: f64| -> f64 {
        let v = f.matrix_unchecked(base, shift).get(0, 0);
        if v.is_infinite() {
            return 0.0;
        }
        libm::pow(dx2 + v * (delta * delta + w * w), -half_d)
    };
    let scale = libm::sqrt(dx2 + delta * delta);
    let r = position_integral(form, eta, eta_p, scale, g, tol)?;
    let norm = libm::pow(2.0 * PI, -(half_d + 1.0));
    Ok(PositionGreensValue {
        value: norm * r.value,
        abs_error_estimate: norm * r.abs_error_estimate,
        eta,
        x: x.to_vec(),
        eta_p,
        x_p: x_p.to_vec(),
        dim: d,
    })
}

/// `(2π)^{-(d+1)/2} r^{1−d}`, the Green's function of `−Δ` in `d+1`
/// dimensions for `d = 3`.
pub fn free_position_reference(d: usize, r: f64) -> f64 {
    libm::pow(2.0 * PI, -0.5 * (d as f64 + 1.0)) * libm::pow(r, 1.0 - d as f64)
}

/// `Γ((d−1)/2) / (2π^{(d+1)/2}) r^{1−d}`, the Green's function of `−½Δ` in
/// `d+1` dimensions.
pub fn free_position_green(d: usize, r: f64) -> Result<f64> {
    if d < 2 {
        return Err(Error::domain("free_position_green needs d >= 2"));
    }
    let d = d as f64;
    Ok(gamma_fn(0.5 * (d - 1.0))? / (2.0 * libm::pow(PI, 0.5 * (d + 1.0))) * libm::pow(r, 1.0 - d))
}

fn unit(dim: usize, norm: f64) -> Vec<f64> {
    let mut v = alloc::vec![0.0; dim];
    v[0] = norm;
    v
}

/// Slope of `gu_momentum_bessel` along `η = |p|^{-1/(1+ν)} θ`,
/// `η′ = |p|^{-1/(1+ν)} θ′`.
pub fn momentum_scaling_window(
    nu: f64,
    theta: f64,
    theta_p: f64,
    p_grid: &[f64],
    form: &MomentumForm,
    tol: &Tolerance,
) -> Result<ScalingFit> {
    if !(nu > -0.5) {
        return Err(Error::domain("momentum_scaling_window needs ν > -1/2"));
    }
    let mut samples = Vec::with_capacity(p_grid.len());
    for &p in p_grid {
        let k = libm::pow(p, -1.0 / (1.0 + nu));
        let g = gu_momentum_bessel(k * theta, k * theta_p, &unit(form.dim(), p), form, tol)?;
        samples.push((p, g.value, g.error));
    }
    fit_scaling_exponent(&samples)
}

/// Slope of `G^U(η, 0; η′, Δx)` over `|Δx|` in `dx_grid`, with `Δx` along
/// the first axis.
pub fn large_distance_decay(
    form: &MomentumForm,
    eta: f64,
    eta_p: f64,
    dx_grid: &[f64],
    tol: &Tolerance,
) -> Result<DecayFit> {
    let d = form.dim();
    let rho = large_distance_exponent(form);
    let origin = alloc::vec![0.0; d];
    let mut samples = Vec::with_capacity(dx_grid.len());
    for &r in dx_grid {
        let g = gu_position(eta, &origin, eta_p, &unit(d, r), form, tol)?;
        samples.push((r, g.value, g.abs_error_estimate));
    }
    let fit = fit_scaling_exponent(&samples)?;
    Ok(DecayFit {
        inconclusive: fit.residual_rms > INCONCLUSIVE_RMS,
        predicted: -(d as f64) + 1.0 / (1.0 + rho),
        fit,
    })
}

/// Slope of `G^U(η, x; 0, x)` in `|η|` over `eta_grid`.
pub fn equal_position_cut(form: &MomentumForm, eta_grid: &[f64], tol: &Tolerance) -> Result<ScalingFit> {
    let origin = alloc::vec![0.0; form.dim()];
    let mut samples = Vec::with_capacity(eta_grid.len());
    for &eta in eta_grid {
        let g = gu_position(eta, &origin, 0.0, &origin, form, tol)?;
        samples.push((eta.abs(), g.value, g.abs_error_estimate));
    }
    fit_scaling_exponent(&samples)
}

/// Slope of `G^U(η, 0; η′, Δx)` over `|Δx|`, for the equal-time scaling
/// checks at short distance.
pub fn position_slope(
    form: &MomentumForm,
    eta: f64,
    eta_p: f64,
    dx_grid: &[f64],
    tol: &Tolerance,
) -> Result<ScalingFit> {
    Ok(large_distance_decay(form, eta, eta_p, dx_grid, tol)?.fit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::green::log_grid;

    fn tol() -> Tolerance {
        Tolerance::with_rel(1e-8)
    }

    fn iso(dim: usize, e: f64) -> MomentumForm {
        MomentumForm::isotropic(dim, PowerLawTerm::pure(e).unwrap()).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn free_field_momentum() {
        let form = MomentumForm::constant(3, 0.5).unwrap();
        for &(eta, eta_p, p) in &[(0.0, 0.0, 1.0), (0.0, 1.0, 2.0), (-0.5, 1.5, 0.7), (2.0, 2.0, 3.0)] {
            let g = gu_momentum_bessel(eta, eta_p, &[p, 0.0, 0.0], &form, &tol()).unwrap();
            let exact = libm::exp(-p * (eta_p - eta) * if eta_p > eta { 1.0 } else { -1.0 }) / p;
            assert!(rel(g.value, exact) < 1e-6, "{eta} {eta_p} {p}: {} {exact}", g.value);
        }
        let g = gu_momentum_bessel_equal(0.3, &[2.0, 0.0, 0.0], &form, &tol()).unwrap();
        assert!(rel(g.value, 0.5) < 1e-7);
    }

    #[test]
    fn equal_form_matches_general() {
        for form in [iso(1, -0.5), iso(1, 1.0)] {
            for &eta in &[0.0, 0.7] {
                let a = gu_momentum_bessel(eta, eta, &[2.0], &form, &tol()).unwrap();
                let b = gu_momentum_bessel_equal(eta, &[2.0], &form, &tol()).unwrap();
                assert!(rel(a.value, b.value) < 1e-6, "{eta}: {} {}", a.value, b.value);
            }
        }
    }

    #[test]
    fn scale_invariant_momentum_closed_form() {
        // ∫ds E_u ∫dτ (2πτ)^{-1/2} exp(-τ^{1+ν}(s(1-s))^ν p²|u|^{2ν})
        //   = K₁ p^{-2ω} ∫ds (s(1-s))^{-νω} E|u|^{-2νω}
        let nu: f64 = -0.25;
        let omega = 1.0 / (2.0 * (1.0 + nu));
        let k1 = gamma_fn(omega).unwrap() / ((1.0 + nu) * libm::sqrt(2.0 * PI));
        let s_int = crate::numerics::beta_weight_integral(-nu * omega).unwrap();
        let u_mom = crate::numerics::gaussian_abs_moment(-2.0 * nu * omega).unwrap();
        let p: f64 = 3.0;
        let exact = k1 * libm::pow(p * p, -omega) * s_int * u_mom;
        let g = gu_momentum_bessel(0.0, 0.0, &[p], &iso(1, 2.0 * nu), &tol()).unwrap();
        assert!(rel(g.value, exact) < 1e-6, "{} {exact}", g.value);
    }

    #[test]
    fn free_field_position() {
        let form = MomentumForm::constant(3, 0.5).unwrap();
        for &(dx, de) in &[(1.0, 0.0), (0.3, 0.4), (0.0, 2.0), (2.5, 1.0)] {
            let g = gu_position(0.0, &[0.0; 3], de, &[dx, 0.0, 0.0], &form, &tol()).unwrap();
            let r = libm::sqrt(dx * dx + de * de);
            let exact = free_position_green(3, r).unwrap();
            assert!(rel(g.value, exact) < 1e-6, "{dx} {de}: {} {exact}", g.value);
        }
        let form2 = MomentumForm::constant(2, 0.5).unwrap();
        let g = gu_position(0.0, &[0.0; 2], 0.5, &[0.5, 0.0], &form2, &tol()).unwrap();
        assert!(rel(g.value, free_position_green(2, libm::sqrt(0.5)).unwrap()) < 1e-6);
    }

    #[test]
    fn reduced_form_is_a_constant_multiple_of_the_reference() {
        let form = MomentumForm::constant(3, 1.0).unwrap();
        let g = gu_position_isotropic_reduced(0.0, &[0.0; 3], 0.3, &[0.4, 0.0, 0.0], &form, &tol())
            .unwrap();
        let reference = free_position_reference(3, 0.5);
        assert!(rel(g.value / reference, 2.0 / libm::sqrt(2.0 * PI)) < 1e-6);
    }

    #[test]
    fn position_symmetry_and_decay() {
        let form = iso(3, -0.5);
        let a = gu_position(0.2, &[0.0; 3], 0.9, &[0.1, 0.2, 0.0], &form, &tol()).unwrap();
        let b = gu_position(0.9, &[0.1, 0.2, 0.0], 0.2, &[0.0; 3], &form, &tol()).unwrap();
        assert!(rel(a.value, b.value) < 1e-6);
        let mut last = f64::INFINITY;
        for r in [0.05, 0.1, 0.2, 0.4] {
            let g = gu_position(0.0, &[0.0; 3], 0.0, &[r, 0.0, 0.0], &form, &tol()).unwrap();
            assert!(g.value > 0.0 && g.value < last);
            last = g.value;
        }
    }

    #[test]
    fn position_errors() {
        let form = iso(3, -0.5);
        assert!(matches!(
            gu_position(0.0, &[0.0; 3], 0.0, &[0.0; 3], &form, &tol()),
            Err(Error::Singular { .. })
        ));
        assert!(matches!(
            gu_position(0.0, &[0.0; 3], 0.0, &[1.0, 0.0, 0.0], &iso(3, -1.5), &tol()),
            Err(Error::Divergent(_))
        ));
        assert!(gu_position(0.0, &[0.0], 0.0, &[1.0], &iso(1, -0.5), &tol()).is_err());
    }

    #[test]
    fn scaling_window_constant() {
        let form = MomentumForm::constant(1, 0.5).unwrap();
        let fit = momentum_scaling_window(0.0, 1.0, 1.0, &log_grid(2.0, 32.0, 5), &form, &tol()).unwrap();
        assert!((fit.exponent + 1.0).abs() < 1e-6);
    }

    #[test]
    fn equal_time_cut_slope() {
        let fit = equal_position_cut(&iso(3, -0.5), &log_grid(0.1, 1.0, 5), &tol()).unwrap();
        assert!((fit.exponent + 1.25).abs() < 1e-4, "{fit:?}");
    }
}
