//! Feynman-Kac Monte Carlo estimators of the transition kernel.
//!
//! ```text
//! P̃_τ(η, η′; p) = (2πτ)^{-1/2} e^{-(η′-η)²/2τ} E[exp(-τ ∫₀¹ (V + W)(q(s)) ds)]
//! q(s) = η + (η′ - η)s + √τ γ(s)
//! ```
//!
//! The s-integral is a sum over the segments of the bridge grid. A power-law
//! term contributes its value at the segment midpoint, corrected to second
//! order for the bridge fluctuations inside the segment. Within a few local
//! standard deviations of its center it contributes instead the exact mean
//! of its segment average given the segment endpoints, so no singular center
//! is ever evaluated.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::bridge::{check_steps, stays_positive, BridgeSampler, RngStreamSpec, DEFAULT_STEPS};
use crate::exec::{ChunkExecutor, Moments};
use crate::linalg::SymMatrix;
use crate::numerics::shifted::ShiftedAbsMoment;
use crate::potentials::{AnalysisMode, LinePotential, MomentumForm, PowerLawTerm, ScalarPotential};
use crate::{Error, Result};

/// Sampling parameters shared by every estimator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McSettings {
    pub n_paths: usize,
    pub n_steps: usize,
    pub seed: u64,
    /// Paths per RNG stream; results depend on it, not on the executor.
    pub chunk_size: usize,
    /// First stream index; chunk `c` uses stream `stream_base + c`.
    pub stream_base: u64,
    pub dirichlet: bool,
    pub antithetic: bool,
}

impl Default for McSettings {
    fn default() -> Self {
        McSettings {
            n_paths: 100_000,
            n_steps: DEFAULT_STEPS,
            seed: 0,
            chunk_size: 4096,
            stream_base: 0,
            dirichlet: false,
            antithetic: false,
        }
    }
}

impl McSettings {
    fn validate(&self) -> Result<()> {
        check_steps(self.n_steps)?;
        if self.n_paths < 2 {
            return Err(Error::domain("n_paths must be at least 2"));
        }
        if self.chunk_size == 0 {
            return Err(Error::domain("chunk_size must be positive"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct KernelEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_paths: usize,
    pub n_steps: usize,
    pub tau: f64,
    pub eta: f64,
    pub eta_p: f64,
    /// Momentum `p`, or `x′ − x` for position kernels.
    pub point: Vec<f64>,
    /// Fraction of paths kept by the Dirichlet filter (1 without it).
    pub acceptance: f64,
    /// Paths discarded because `M` was not positive definite.
    pub n_rejected: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MomentMode {
    /// `η = η′ = 0`.
    FixedEndpoint,
    /// `η = 0`, integrated over `η′`.
    IntegratedEndpoint,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MomentEstimate {
    pub value: f64,
    pub std_error: f64,
    pub tau: f64,
    pub mode: MomentMode,
    pub n_paths: usize,
    pub n_steps: usize,
}

struct Draw<'a> {
    gamma: &'a [f64],
    /// Standard normal drawn before the bridge (integrated mode only).
    z: f64,
}

enum Outcome {
    Value(f64),
    Killed,
    Singular,
}

struct Tally {
    moments: Moments,
    killed: u64,
    singular: u64,
}

/// Runs `f` on every path and merges per-chunk statistics in chunk order.
fn run_paths<E, F>(exec: &E, mc: &McSettings, needs_z: bool, f: F) -> Result<Tally>
where
    E: ChunkExecutor,
    F: Fn(&Draw) -> Result<Outcome> + Sync,
{
    mc.validate()?;
    let n_chunks = mc.n_paths.div_ceil(mc.chunk_size);
    let results = exec.map_chunks(n_chunks, |c| -> Result<Tally> {
        let stream = RngStreamSpec::new(mc.seed, mc.stream_base + c as u64);
        let mut sampler = BridgeSampler::new(stream, mc.n_steps)?;
        let mut gamma = vec![0.0; mc.n_steps + 1];
        let mut neg = vec![0.0; mc.n_steps + 1];
        let start = c * mc.chunk_size;
        let end = (start + mc.chunk_size).min(mc.n_paths);
        let mut tally = Tally {
            moments: Moments::default(),
            killed: 0,
            singular: 0,
        };
        for j in 0..(end - start) {
            sampler.seek(j as u64);
            let z = if needs_z { sampler.normal() } else { 0.0 };
            sampler.fill_here(&mut gamma);
            let first = f(&Draw { gamma: &gamma, z })?;
            let outcome = if mc.antithetic {
                for (n, g) in neg.iter_mut().zip(&gamma) {
                    *n = -g;
                }
                let second = f(&Draw { gamma: &neg, z: -z })?;
                match (first, second) {
                    (Outcome::Singular, _) | (_, Outcome::Singular) => Outcome::Singular,
                    (a, b) => {
                        let v = |o: Outcome| if let Outcome::Value(v) = o { v } else { 0.0 };
                        Outcome::Value(0.5 * (v(a) + v(b)))
                    }
                }
            } else {
                first
            };
            match outcome {
                Outcome::Value(v) => tally.moments.push(v),
                Outcome::Killed => {
                    tally.killed += 1;
                    tally.moments.push(0.0);
                }
                Outcome::Singular => tally.singular += 1,
            }
        }
        Ok(tally)
    });
    let mut parts = Vec::with_capacity(results.len());
    let (mut killed, mut singular) = (0, 0);
    for r in results {
        let t = r?;
        parts.push(t.moments);
        killed += t.killed;
        singular += t.singular;
    }
    Ok(Tally {
        moments: Moments::merge_all(&parts),
        killed,
        singular,
    })
}

/// Segments whose midpoint lies within this many local standard deviations
/// of a center (plus half the segment span) use the exact bridge mean.
const NEAR: f64 = 4.0;

/// Per-segment values of power-law terms on a grid of `n` steps.
struct SegmentRule {
    moments: Vec<ShiftedAbsMoment>,
    /// Standard deviation scale `√(τ/n)` of the bridge inside one segment.
    sd: f64,
}

impl SegmentRule {
    fn new<'a>(terms: impl Iterator<Item = &'a PowerLawTerm>, tau: f64, n_steps: usize) -> Result<Self> {
        let mut moments: Vec<ShiftedAbsMoment> = Vec::new();
        for t in terms {
            if t.exponent != 0.0 && t.amplitude > 0.0 && !moments.iter().any(|m| m.exponent() == t.exponent) {
                moments.push(ShiftedAbsMoment::new(t.exponent)?);
            }
        }
        Ok(SegmentRule {
            moments,
            sd: libm::sqrt(tau / n_steps as f64),
        })
    }

    /// Mean of the term over a segment whose distances to the center run
    /// from `d0` to `d1`.
    #[inline]
    fn value(&self, t: &PowerLawTerm, d0: f64, d1: f64) -> f64 {
        if t.exponent == 0.0 || t.amplitude == 0.0 {
            return t.at_offset(0.0);
        }
        let mid = 0.5 * (d0 + d1);
        let half = 0.5 * (d1 - d0).abs();
        if mid.abs() > NEAR * self.sd + half {
            // E[(t - 1/2)² (d1 - d0)² + sd² t(1 - t)] over the segment.
            let q = t.exponent;
            let s2 = self.sd * self.sd / 6.0 + half * half / 3.0;
            return t.at_offset(mid) * (1.0 + 0.5 * q * (q - 1.0) * s2 / (mid * mid));
        }
        match self.moments.iter().find(|m| m.exponent() == t.exponent) {
            Some(m) => t.amplitude * m.bridge_segment_mean(d0, d1, self.sd),
            None => t.at_offset(mid),
        }
    }
}

/// `∫₀¹ U(q(s)) ds` on the bridge grid.
#[inline]
fn path_average(
    rule: &SegmentRule,
    u: &LinePotential,
    gamma: &[f64],
    eta: f64,
    delta: f64,
    sqrt_tau: f64,
) -> Result<f64> {
    let n = gamma.len() - 1;
    let inv_n = 1.0 / n as f64;
    let mut sum = 0.0;
    let mut shift0 = 0.0;
    for i in 0..n {
        let shift1 = delta * ((i + 1) as f64 * inv_n) + sqrt_tau * gamma[i + 1];
        let x = eta + 0.5 * (shift0 + shift1);
        let v = u.with_values(x, |t| rule.value(t, (eta - t.center) + shift0, (eta - t.center) + shift1));
        if !v.is_finite() {
            return Err(Error::NonFinitePath {
                segment: i,
                s: (i as f64 + 0.5) * inv_n,
                value: v,
            });
        }
        sum += v;
        shift0 = shift1;
    }
    Ok(sum * inv_n)
}

/// Exponent checks shared by the estimators.
fn check_mc(form: &MomentumForm, w: &ScalarPotential) -> Result<()> {
    form.validate_for(AnalysisMode::MonteCarlo)
        .and_then(|_| w.validate_for(AnalysisMode::MonteCarlo))
        .map_err(|e| match e {
            Error::Divergent(m) => Error::Domain(format!("{m}: not integrable along paths")),
            e => e,
        })
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("τ must be positive and finite, got {tau}")))
    }
}

fn check_point(eta: f64, eta_p: f64) -> Result<()> {
    if eta.is_finite() && eta_p.is_finite() {
        Ok(())
    } else {
        Err(Error::domain("η and η′ must be finite"))
    }
}

/// `(2πτ)^{-1/2} e^{-(η′-η)²/2τ}`.
pub fn free_kernel(eta: f64, eta_p: f64, tau: f64) -> f64 {
    let d = eta_p - eta;
    libm::exp(-d * d / (2.0 * tau)) / libm::sqrt(2.0 * PI * tau)
}

/// Monte Carlo estimate of `P̃_τ(η, η′; p)`.
#[allow(clippy::too_many_arguments)]
pub fn fk_kernel_momentum<E: ChunkExecutor>(
    exec: &E,
    eta: f64,
    eta_p: f64,
    tau: f64,
    p: &[f64],
    form: &MomentumForm,
    w: &ScalarPotential,
    mc: &McSettings,
) -> Result<KernelEstimate> {
    check_tau(tau)?;
    check_point(eta, eta_p)?;
    form.check_momentum(p)?;
    mc.validate()?;
    if mc.dirichlet && !(eta > 0.0 && eta_p > 0.0) {
        return Err(Error::domain("Dirichlet filtering needs η > 0 and η′ > 0"));
    }
    check_mc(form, w)?;
    let u = form.project(p).plus(&w.line());
    let rule = SegmentRule::new(u.terms(), tau, mc.n_steps)?;
    let pref = free_kernel(eta, eta_p, tau);
    let delta = eta_p - eta;
    let st = libm::sqrt(tau);
    let estimate = |mean: f64, std_error: f64, acceptance: f64| KernelEstimate {
        mean,
        std_error,
        n_paths: mc.n_paths,
        n_steps: mc.n_steps,
        tau,
        eta,
        eta_p,
        point: p.to_vec(),
        acceptance,
        n_rejected: 0,
    };
    if u.is_zero() && !mc.dirichlet {
        // Every path contributes the prefactor.
        return Ok(estimate(pref, 0.0, 1.0));
    }
    let tally = run_paths(exec, mc, false, |d| {
        if mc.dirichlet && !stays_positive(d.gamma, eta, eta_p, st) {
            return Ok(Outcome::Killed);
        }
        let avg = path_average(&rule, &u, d.gamma, eta, delta, st)?;
        Ok(Outcome::Value(pref * libm::exp(-tau * avg)))
    })?;
    let n = tally.moments.n.max(1) as f64;
    Ok(estimate(
        tally.moments.mean,
        tally.moments.std_error(),
        1.0 - tally.killed as f64 / n,
    ))
}

/// Monte Carlo estimate of the position-space kernel `P_τ(η, x; η′, x′)`.
///
/// The Gaussian `p`-integral is done per path:
/// `(2π)^{-d} π^{d/2} det(M)^{-1/2} exp(-Δx·M⁻¹·Δx/4)` with `M = τ ∫ Ṽ(q) ds`.
#[allow(clippy::too_many_arguments)]
pub fn fk_kernel_position<E: ChunkExecutor>(
    exec: &E,
    eta: f64,
    x: &[f64],
    eta_p: f64,
    x_p: &[f64],
    tau: f64,
    form: &MomentumForm,
    w: &ScalarPotential,
    mc: &McSettings,
) -> Result<KernelEstimate> {
    check_tau(tau)?;
    check_point(eta, eta_p)?;
    let d = form.dim();
    if x.len() != d || x_p.len() != d {
        return Err(Error::domain(format!(
            "positions must have {d} components to match the form"
        )));
    }
    if mc.dirichlet && !(eta > 0.0 && eta_p > 0.0) {
        return Err(Error::domain("Dirichlet filtering needs η > 0 and η′ > 0"));
    }
    check_mc(form, w)?;
    let dx: Vec<f64> = x_p.iter().zip(x).map(|(b, a)| b - a).collect();
    let wline = w.line();
    let rule = SegmentRule::new(form.terms().iter().chain(wline.terms()), tau, mc.n_steps)?;
    let pref = free_kernel(eta, eta_p, tau)
        * libm::pow(2.0 * PI, -(d as f64))
        * libm::pow(PI, 0.5 * d as f64);
    let delta = eta_p - eta;
    let st = libm::sqrt(tau);
    let tally = run_paths(exec, mc, false, |draw| {
        let g = draw.gamma;
        if mc.dirichlet && !stays_positive(g, eta, eta_p, st) {
            return Ok(Outcome::Killed);
        }
        let n = g.len() - 1;
        let inv_n = 1.0 / n as f64;
        let mut m = SymMatrix::zeros(d);
        let mut shift0 = 0.0;
        for i in 0..n {
            let shift1 = delta * ((i + 1) as f64 * inv_n) + st * g[i + 1];
            let value = |t: &PowerLawTerm| rule.value(t, (eta - t.center) + shift0, (eta - t.center) + shift1);
            form.add_matrix_with(eta + 0.5 * (shift0 + shift1), tau * inv_n, &value, &mut m);
            shift0 = shift1;
        }
        let wavg = if wline.is_zero() {
            0.0
        } else {
            path_average(&rule, &wline, g, eta, delta, st)?
        };
        let Some(chol) = m.cholesky() else {
            return Ok(Outcome::Singular);
        };
        let v = pref / libm::sqrt(chol.det())
            * libm::exp(-0.25 * chol.inv_quad_form(&dx) - tau * wavg);
        if !v.is_finite() {
            return Err(Error::NonFinitePath {
                segment: 0,
                s: 0.0,
                value: v,
            });
        }
        Ok(Outcome::Value(v))
    })?;
    let n = (tally.moments.n.max(1)) as f64;
    Ok(KernelEstimate {
        mean: tally.moments.mean,
        std_error: tally.moments.std_error(),
        n_paths: mc.n_paths,
        n_steps: mc.n_steps,
        tau,
        eta,
        eta_p,
        point: dx,
        acceptance: 1.0 - tally.killed as f64 / n,
        n_rejected: tally.singular,
    })
}

/// Second-moment estimator at `η = 0`.
///
/// Fixed mode: `(2πτ)^{-1/2} E[τ ∫ Tr Ṽ(√τ γ) ds · e^{-τ∫W}]` at `η′ = 0`.
/// Integrated mode: `E[τ ∫ Tr Ṽ(sη′ + √τ γ) ds · e^{-τ∫W}]` with
/// `η′ ~ N(0, τ)` drawn before the bridge.
pub fn second_moment<E: ChunkExecutor>(
    exec: &E,
    tau: f64,
    form: &MomentumForm,
    w: &ScalarPotential,
    mode: MomentMode,
    mc: &McSettings,
) -> Result<MomentEstimate> {
    check_tau(tau)?;
    if form.leading_exponent() <= -1.0 {
        return Err(Error::divergent(
            "second moments need ν > -1/2 for the trace potential",
        ));
    }
    check_mc(form, w)?;
    let tr = form.trace_potential();
    let wline = w.line();
    let rule = SegmentRule::new(tr.terms().chain(wline.terms()), tau, mc.n_steps)?;
    let st = libm::sqrt(tau);
    let needs_z = mode == MomentMode::IntegratedEndpoint;
    let pref = match mode {
        MomentMode::FixedEndpoint => 1.0 / libm::sqrt(2.0 * PI * tau),
        MomentMode::IntegratedEndpoint => 1.0,
    };
    let tally = run_paths(exec, mc, needs_z, |d| {
        let eta_p = st * d.z;
        let trace = path_average(&rule, &tr, d.gamma, 0.0, eta_p, st)?;
        let damp = if wline.is_zero() {
            1.0
        } else {
            libm::exp(-tau * path_average(&rule, &wline, d.gamma, 0.0, eta_p, st)?)
        };
        Ok(Outcome::Value(pref * tau * trace * damp))
    })?;
    Ok(MomentEstimate {
        value: tally.moments.mean,
        std_error: tally.moments.std_error(),
        tau,
        mode,
        n_paths: mc.n_paths,
        n_steps: mc.n_steps,
    })
}
