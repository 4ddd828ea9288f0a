//! Momentum-form potentials `V = p·Ṽ(η)·p` and scalar potentials `W(η)`.
//!
//! Every estimator reduces a form at fixed `p` to a [`LinePotential`], a
//! scalar function of `η` that is evaluated relative to each term's center.

use alloc::boxed::Box;
use alloc::format;
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;

use crate::linalg::SymMatrix;
use crate::{Error, Result};

pub mod metric;

pub use metric::{
    curvature_potential, eta_of_t, mass_potential, metric_to_potentials, Interpretation,
    MetricConstants, MetricModel, MetricPotentials, ScaleFactors,
};

/// Which analysis a potential is validated for; each admits a different
/// range of exponents.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AnalysisMode {
    /// Time integrals along Brownian paths need local integrability in
    /// space, `2ν > -1`.
    MonteCarlo,
    /// Gaussian smoothing must converge, `2ν > -1`.
    LowerBound,
    /// `2ν > -2`.
    UpperBound,
}

impl AnalysisMode {
    fn min_exponent(self) -> f64 {
        match self {
            AnalysisMode::LowerBound | AnalysisMode::MonteCarlo => -1.0,
            AnalysisMode::UpperBound => -2.0,
        }
    }
}

/// `amplitude · |η - center|^exponent`, where `exponent` stores 2ν (or 2σ).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerLawTerm {
    pub amplitude: f64,
    pub exponent: f64,
    pub center: f64,
}

impl PowerLawTerm {
    pub fn new(amplitude: f64, exponent: f64, center: f64) -> Result<Self> {
        if !(amplitude >= 0.0) || !amplitude.is_finite() {
            return Err(Error::domain(format!(
                "power-law amplitude must be finite and >= 0, got {amplitude}"
            )));
        }
        if !exponent.is_finite() || !center.is_finite() {
            return Err(Error::domain("power-law exponent and center must be finite"));
        }
        if exponent <= -2.0 {
            return Err(Error::domain(format!(
                "power-law exponent 2ν = {exponent} is not locally integrable (needs 2ν > -2)"
            )));
        }
        Ok(PowerLawTerm {
            amplitude,
            exponent,
            center,
        })
    }

    /// `|η|^{2ν}` with unit amplitude at the origin.
    pub fn pure(exponent: f64) -> Result<Self> {
        Self::new(1.0, exponent, 0.0)
    }

    pub fn constant(c: f64) -> Result<Self> {
        Self::new(c, 0.0, 0.0)
    }

    pub fn nu(&self) -> f64 {
        0.5 * self.exponent
    }

    pub fn is_singular(&self) -> bool {
        self.exponent < 0.0 && self.amplitude > 0.0
    }

    pub fn validate_for(&self, mode: AnalysisMode) -> Result<()> {
        if self.amplitude > 0.0 && self.exponent <= mode.min_exponent() {
            return Err(Error::divergent(format!(
                "exponent 2ν = {} requires 2ν > {} for {:?}",
                self.exponent,
                mode.min_exponent(),
                mode
            )));
        }
        Ok(())
    }

    /// Value at `η`; an error exactly at a negative-exponent center.
    pub fn eval(&self, eta: f64) -> Result<f64> {
        if eta == self.center && self.is_singular() {
            return Err(Error::Singular {
                center: self.center,
            });
        }
        Ok(self.at_offset(eta - self.center))
    }

    /// Value at signed distance `d` from the center, without checks.
    #[inline]
    pub fn at_offset(&self, d: f64) -> f64 {
        if self.exponent == 0.0 {
            self.amplitude
        } else if self.amplitude == 0.0 {
            0.0
        } else {
            self.amplitude * libm::pow(d.abs(), self.exponent)
        }
    }

    fn scaled(&self, c: f64) -> Self {
        PowerLawTerm {
            amplitude: self.amplitude * c,
            ..*self
        }
    }
}

/// Bounded positive modulation `f(η)` of a composite form.
#[derive(Clone)]
pub enum Modulation {
    Constant(f64),
    /// `mean + amplitude · sin(frequency · η + phase)`.
    Sinusoid {
        mean: f64,
        amplitude: f64,
        frequency: f64,
        phase: f64,
    },
    /// Smooth step from `low` to `high` around `center` with width `scale`.
    Logistic {
        low: f64,
        high: f64,
        center: f64,
        scale: f64,
    },
    /// Arbitrary function with caller-declared bounds.
    Custom {
        f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
        lower: f64,
        upper: f64,
    },
}

impl fmt::Debug for Modulation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Modulation::Constant(c) => f.debug_tuple("Constant").field(c).finish(),
            Modulation::Sinusoid {
                mean,
                amplitude,
                frequency,
                phase,
            } => f
                .debug_struct("Sinusoid")
                .field("mean", mean)
                .field("amplitude", amplitude)
                .field("frequency", frequency)
                .field("phase", phase)
                .finish(),
            Modulation::Logistic {
                low,
                high,
                center,
                scale,
            } => f
                .debug_struct("Logistic")
                .field("low", low)
                .field("high", high)
                .field("center", center)
                .field("scale", scale)
                .finish(),
            Modulation::Custom { lower, upper, .. } => f
                .debug_struct("Custom")
                .field("lower", lower)
                .field("upper", upper)
                .finish_non_exhaustive(),
        }
    }
}

impl Modulation {
    #[inline]
    pub fn eval(&self, eta: f64) -> f64 {
        match self {
            Modulation::Constant(c) => *c,
            Modulation::Sinusoid {
                mean,
                amplitude,
                frequency,
                phase,
            } => mean + amplitude * libm::sin(frequency * eta + phase),
            Modulation::Logistic {
                low,
                high,
                center,
                scale,
            } => low + (high - low) / (1.0 + libm::exp(-(eta - center) / scale)),
            Modulation::Custom { f, .. } => f(eta),
        }
    }

    /// Declared `(f_lower, f_upper)`.
    pub fn bounds(&self) -> (f64, f64) {
        match self {
            Modulation::Constant(c) => (*c, *c),
            Modulation::Sinusoid {
                mean, amplitude, ..
            } => (mean - amplitude.abs(), mean + amplitude.abs()),
            Modulation::Logistic { low, high, .. } => (low.min(*high), low.max(*high)),
            Modulation::Custom { lower, upper, .. } => (*lower, *upper),
        }
    }

    pub fn is_constant(&self) -> bool {
        let (lo, hi) = self.bounds();
        lo == hi
    }

    /// Checks `0 < f_lower <= f(η) <= f_upper` on a grid over `[-50, 50]`.
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.bounds();
        if !(lo > 0.0) || !(hi >= lo) || !hi.is_finite() {
            return Err(Error::domain(format!(
                "modulation bounds must satisfy 0 < f_lower <= f_upper, got ({lo}, {hi})"
            )));
        }
        if let Modulation::Logistic { scale, .. } = self {
            if !(*scale > 0.0) {
                return Err(Error::domain("logistic modulation needs scale > 0"));
            }
        }
        let slack = 1e-12 * hi;
        for i in 0..=4000 {
            let eta = -50.0 + 0.025 * i as f64;
            let v = self.eval(eta);
            if !(v >= lo - slack && v <= hi + slack) {
                return Err(Error::domain(format!(
                    "modulation value {v} at η = {eta} is outside its declared bounds [{lo}, {hi}]"
                )));
            }
        }
        Ok(())
    }
}

/// The d×d coefficient matrix `Ṽ(η)`.
#[derive(Clone, Debug)]
pub enum MomentumForm {
    /// `Σ terms(η) · I`; several terms give a multi-singularity form.
    Isotropic {
        dim: usize,
        terms: Vec<PowerLawTerm>,
    },
    /// One term per axis on the diagonal.
    Diagonal { terms: Vec<PowerLawTerm> },
    /// `f(η) · base(η) + l`.
    Composite {
        base: Box<MomentumForm>,
        modulation: Modulation,
        l: SymMatrix,
    },
}

/// Pure power-law forms bracketing a composite form.
#[derive(Clone, Debug)]
pub struct Bracket {
    pub lower: MomentumForm,
    pub upper: MomentumForm,
    pub l_lower: SymMatrix,
    pub l_upper: SymMatrix,
}

impl MomentumForm {
    pub fn isotropic(dim: usize, term: PowerLawTerm) -> Result<Self> {
        Self::multi_singular(dim, alloc::vec![term])
    }

    pub fn multi_singular(dim: usize, terms: Vec<PowerLawTerm>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::domain("dimension must be at least 1"));
        }
        if terms.is_empty() {
            return Err(Error::domain("isotropic form needs at least one term"));
        }
        Ok(MomentumForm::Isotropic { dim, terms })
    }

    /// `c · I`, the constant-coefficient case.
    pub fn constant(dim: usize, c: f64) -> Result<Self> {
        Self::isotropic(dim, PowerLawTerm::constant(c)?)
    }

    pub fn diagonal(terms: Vec<PowerLawTerm>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::domain("diagonal form needs one term per axis"));
        }
        Ok(MomentumForm::Diagonal { terms })
    }

    pub fn composite(base: MomentumForm, modulation: Modulation, l: SymMatrix) -> Result<Self> {
        if matches!(base, MomentumForm::Composite { .. }) {
            return Err(Error::Unsupported("nested composite forms".into()));
        }
        if l.dim() != base.dim() {
            return Err(Error::domain(format!(
                "l_matrix is {}x{} but the form has dimension {}",
                l.dim(),
                l.dim(),
                base.dim()
            )));
        }
        if l.min_eigenvalue() < -1e-12 * (1.0 + l.trace().abs()) {
            return Err(Error::domain("l_matrix must be positive semidefinite"));
        }
        modulation.validate()?;
        Ok(MomentumForm::Composite {
            base: Box::new(base),
            modulation,
            l,
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            MomentumForm::Isotropic { dim, .. } => *dim,
            MomentumForm::Diagonal { terms } => terms.len(),
            MomentumForm::Composite { base, .. } => base.dim(),
        }
    }

    /// All power-law terms, including those of a composite's base.
    pub fn terms(&self) -> &[PowerLawTerm] {
        match self {
            MomentumForm::Isotropic { terms, .. } | MomentumForm::Diagonal { terms } => terms,
            MomentumForm::Composite { base, .. } => base.terms(),
        }
    }

    pub fn validate_for(&self, mode: AnalysisMode) -> Result<()> {
        self.terms().iter().try_for_each(|t| t.validate_for(mode))
    }

    /// Smallest `2ν` among terms with positive amplitude (the leading
    /// singularity).
    pub fn leading_exponent(&self) -> f64 {
        self.terms()
            .iter()
            .filter(|t| t.amplitude > 0.0)
            .map(|t| t.exponent)
            .fold(f64::INFINITY, f64::min)
    }

    /// `Some(2ν)` when the form is scale invariant about the origin.
    pub fn scale_exponent(&self) -> Option<f64> {
        match self {
            MomentumForm::Composite { .. } => None,
            _ => {
                let terms: Vec<_> = self.terms().iter().filter(|t| t.amplitude > 0.0).collect();
                let e = terms.first()?.exponent;
                terms
                    .iter()
                    .all(|t| t.exponent == e && (t.center == 0.0 || t.exponent == 0.0))
                    .then_some(e)
            }
        }
    }

    pub fn matrix_at(&self, eta: f64) -> Result<SymMatrix> {
        for t in self.terms() {
            t.eval(eta)?;
        }
        Ok(self.matrix_unchecked(eta, 0.0))
    }

    /// `Ṽ` at `eta + shift`, with term distances taken as
    /// `(eta - center) + shift`.
    pub(crate) fn matrix_unchecked(&self, eta: f64, shift: f64) -> SymMatrix {
        let mut m = SymMatrix::zeros(self.dim());
        self.add_matrix(eta, shift, 1.0, &mut m);
        m
    }

    /// `out += w · Ṽ(eta + shift)`.
    pub(crate) fn add_matrix(&self, eta: f64, shift: f64, w: f64, out: &mut SymMatrix) {
        self.add_matrix_with(eta + shift, w, &|t| t.at_offset((eta - t.center) + shift), out);
    }

    /// `out += w · Ṽ(x)` with each term's value supplied by `value`.
    pub(crate) fn add_matrix_with<F: Fn(&PowerLawTerm) -> f64>(
        &self,
        x: f64,
        w: f64,
        value: &F,
        out: &mut SymMatrix,
    ) {
        match self {
            MomentumForm::Isotropic { terms, .. } => {
                let v: f64 = terms.iter().map(value).sum();
                out.add_diagonal(w * v);
            }
            MomentumForm::Diagonal { terms } => {
                for (i, t) in terms.iter().enumerate() {
                    out.add_diagonal_entry(i, w * value(t));
                }
            }
            MomentumForm::Composite {
                base,
                modulation,
                l,
            } => {
                let f = modulation.eval(x);
                base.add_matrix_with(x, w * f, value, out);
                out.add_scaled(l, w);
            }
        }
    }

    /// `p·Ṽ(η)·p`.
    pub fn eval_v(&self, eta: f64, p: &[f64]) -> Result<f64> {
        self.check_momentum(p)?;
        for t in self.terms() {
            t.eval(eta)?;
        }
        Ok(self.project(p).at(eta, 0.0))
    }

    pub(crate) fn check_momentum(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.dim() {
            return Err(Error::domain(format!(
                "momentum has {} components but the form has dimension {}",
                p.len(),
                self.dim()
            )));
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("momentum components must be finite"));
        }
        Ok(())
    }

    /// The scalar `η ↦ p·Ṽ(η)·p`.
    pub fn project(&self, p: &[f64]) -> LinePotential {
        match self {
            MomentumForm::Composite {
                base,
                modulation,
                l,
            } => LinePotential {
                plain: Vec::new(),
                modulated: base.projected_terms(p),
                modulation: Some(modulation.clone()),
                constant: l.quad_form(p),
            },
            _ => LinePotential::from_terms(self.projected_terms(p)),
        }
    }

    /// Terms of `p·Ṽ·p` for a non-composite form, zero amplitudes dropped.
    fn projected_terms(&self, p: &[f64]) -> Vec<PowerLawTerm> {
        let p2: f64 = p.iter().map(|v| v * v).sum();
        let terms: Vec<PowerLawTerm> = match self {
            MomentumForm::Isotropic { terms, .. } => terms.iter().map(|t| t.scaled(p2)).collect(),
            MomentumForm::Diagonal { terms } => {
                terms.iter().zip(p).map(|(t, pi)| t.scaled(pi * pi)).collect()
            }
            MomentumForm::Composite { base, .. } => base.projected_terms(p),
        };
        terms.into_iter().filter(|t| t.amplitude != 0.0).collect()
    }

    fn trace_terms(&self) -> Vec<PowerLawTerm> {
        match self {
            MomentumForm::Isotropic { dim, terms } => {
                terms.iter().map(|t| t.scaled(*dim as f64)).collect()
            }
            MomentumForm::Diagonal { terms } => terms.clone(),
            MomentumForm::Composite { base, .. } => base.trace_terms(),
        }
    }

    /// The scalar `η ↦ Tr Ṽ(η)`.
    pub fn trace_potential(&self) -> LinePotential {
        match self {
            MomentumForm::Composite {
                base,
                modulation,
                l,
            } => LinePotential {
                plain: Vec::new(),
                modulated: base.trace_terms(),
                modulation: Some(modulation.clone()),
                constant: l.trace(),
            },
            _ => LinePotential::from_terms(self.trace_terms()),
        }
    }

    /// Smallest eigenvalue `|Ṽ(η)|₀`, with term distances `(η - c) + shift`.
    pub(crate) fn min_eigen(&self, eta: f64, shift: f64) -> f64 {
        match self {
            MomentumForm::Isotropic { terms, .. } => {
                terms.iter().map(|t| t.at_offset((eta - t.center) + shift)).sum()
            }
            MomentumForm::Diagonal { terms } => terms
                .iter()
                .map(|t| t.at_offset((eta - t.center) + shift))
                .fold(f64::INFINITY, f64::min),
            MomentumForm::Composite { .. } => {
                self.matrix_unchecked(eta, shift).min_eigenvalue()
            }
        }
    }

    /// Bracketing pure forms `f_lower·Ṽ` and `f_upper·Ṽ` with the same `l`.
    pub fn bracketing(&self) -> Result<Bracket> {
        let MomentumForm::Composite {
            base,
            modulation,
            l,
        } = self
        else {
            return Err(Error::domain("bracketing forms exist only for composite forms"));
        };
        if base.scale_exponent().is_none() {
            return Err(Error::domain(
                "the base of a composite form must be a pure power law about 0",
            ));
        }
        let (lo, hi) = modulation.bounds();
        Ok(Bracket {
            lower: base.scaled(lo),
            upper: base.scaled(hi),
            l_lower: l.clone(),
            l_upper: l.clone(),
        })
    }

    fn scaled(&self, c: f64) -> MomentumForm {
        match self {
            MomentumForm::Isotropic { dim, terms } => MomentumForm::Isotropic {
                dim: *dim,
                terms: terms.iter().map(|t| t.scaled(c)).collect(),
            },
            MomentumForm::Diagonal { terms } => MomentumForm::Diagonal {
                terms: terms.iter().map(|t| t.scaled(c)).collect(),
            },
            MomentumForm::Composite {
                base,
                modulation,
                l,
            } => MomentumForm::Composite {
                base: Box::new(base.scaled(c)),
                modulation: modulation.clone(),
                l: l.scaled(c),
            },
        }
    }
}

/// `|Ṽ(λη) − λ^{2ν}Ṽ(η)|` in the max-norm, with `2ν` the form's scale
/// exponent (the base exponent for composite forms).
pub fn check_scale_invariance(form: &MomentumForm, lambda: f64, eta: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::domain("λ must be positive"));
    }
    let e = match form {
        MomentumForm::Composite { base, .. } => base.scale_exponent(),
        _ => form.scale_exponent(),
    }
    .unwrap_or_else(|| form.leading_exponent());
    let a = form.matrix_at(lambda * eta)?;
    let b = form.matrix_at(eta)?.scaled(libm::pow(lambda, e));
    Ok(a.max_abs_diff(&b))
}

/// `W(η) = Σ terms`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ScalarPotential {
    pub terms: Vec<PowerLawTerm>,
}

impl ScalarPotential {
    pub fn zero() -> Self {
        ScalarPotential { terms: Vec::new() }
    }

    pub fn new(terms: Vec<PowerLawTerm>) -> Self {
        ScalarPotential { terms }
    }

    pub fn power_law(amplitude: f64, exponent: f64) -> Result<Self> {
        Ok(ScalarPotential {
            terms: alloc::vec![PowerLawTerm::new(amplitude, exponent, 0.0)?],
        })
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.amplitude == 0.0)
    }

    pub fn eval(&self, eta: f64) -> Result<f64> {
        self.terms.iter().map(|t| t.eval(eta)).sum()
    }

    /// Spot check of `W >= 0` on a grid over `[-50, 50]`.
    pub fn is_nonneg(&self) -> bool {
        (0..=400).all(|i| {
            let eta = -50.0 + 0.25 * i as f64 + 1e-7;
            self.eval(eta).map(|v| v >= 0.0).unwrap_or(true)
        })
    }

    pub fn validate_for(&self, mode: AnalysisMode) -> Result<()> {
        self.terms.iter().try_for_each(|t| t.validate_for(mode))
    }

    /// `Some(2σ)` for a single power law about the origin.
    pub fn scale_exponent(&self) -> Option<f64> {
        let terms: Vec<_> = self.terms.iter().filter(|t| t.amplitude > 0.0).collect();
        let e = terms.first()?.exponent;
        terms
            .iter()
            .all(|t| t.exponent == e && (t.center == 0.0 || t.exponent == 0.0))
            .then_some(e)
    }

    pub fn line(&self) -> LinePotential {
        LinePotential::from_terms(self.terms.clone())
    }
}

/// Scalar potential on the line,
/// `U(x) = Σ plain(x) + f(x) · Σ modulated(x) + constant`.
#[derive(Clone, Debug)]
pub struct LinePotential {
    pub(crate) plain: Vec<PowerLawTerm>,
    pub(crate) modulated: Vec<PowerLawTerm>,
    pub(crate) modulation: Option<Modulation>,
    pub(crate) constant: f64,
}

impl LinePotential {
    pub fn zero() -> Self {
        LinePotential {
            plain: Vec::new(),
            modulated: Vec::new(),
            modulation: None,
            constant: 0.0,
        }
    }

    pub fn from_terms(terms: Vec<PowerLawTerm>) -> Self {
        let mut plain: Vec<PowerLawTerm> = Vec::with_capacity(terms.len());
        let mut constant = 0.0;
        for t in terms {
            if t.amplitude == 0.0 {
                continue;
            }
            if t.exponent == 0.0 {
                constant += t.amplitude;
            } else {
                plain.push(t);
            }
        }
        LinePotential {
            plain,
            modulated: Vec::new(),
            modulation: None,
            constant,
        }
    }

    /// `self + other`.
    pub fn plus(mut self, other: &LinePotential) -> Self {
        self.plain.extend_from_slice(&other.plain);
        self.constant += other.constant;
        match (&self.modulation, &other.modulation) {
            (_, None) => {}
            (None, Some(m)) => {
                self.modulation = Some(m.clone());
                self.modulated = other.modulated.clone();
            }
            (Some(_), Some(_)) => {
                // Only one modulated family is ever combined with plain terms.
                debug_assert!(false, "two modulated line potentials");
            }
        }
        self
    }

    pub fn is_zero(&self) -> bool {
        self.plain.is_empty() && self.modulated.is_empty() && self.constant == 0.0
    }

    /// True when `U` does not depend on `x`.
    pub fn is_constant(&self) -> bool {
        self.plain.is_empty()
            && (self.modulated.is_empty()
                || self.modulation.as_ref().is_some_and(|m| m.is_constant())
                    && self.modulated.iter().all(|t| t.exponent == 0.0))
    }

    /// The constant value of a constant potential.
    pub fn constant_value(&self) -> Option<f64> {
        if !self.is_constant() {
            return None;
        }
        let m = match &self.modulation {
            Some(m) => m.eval(0.0) * self.modulated.iter().map(|t| t.amplitude).sum::<f64>(),
            None => 0.0,
        };
        Some(self.constant + m)
    }

    /// Singular points with their (negative) exponents.
    pub fn singularities(&self) -> Vec<(f64, f64)> {
        self.plain
            .iter()
            .chain(&self.modulated)
            .filter(|t| t.is_singular())
            .map(|t| (t.center, t.exponent))
            .collect()
    }

    /// All non-constant terms.
    pub fn terms(&self) -> impl Iterator<Item = &PowerLawTerm> {
        self.plain.iter().chain(&self.modulated)
    }

    /// Most negative exponent, `0` if none.
    pub fn min_exponent(&self) -> f64 {
        self.terms().map(|t| t.exponent).fold(0.0, f64::min)
    }

    /// Pointwise value with an error at singular centers.
    pub fn eval(&self, x: f64) -> Result<f64> {
        for t in self.terms() {
            t.eval(x)?;
        }
        Ok(self.at(x, 0.0))
    }

    /// `U(eta + shift)` with each term's distance computed as
    /// `(eta - center) + shift`.
    #[inline]
    pub fn at(&self, eta: f64, shift: f64) -> f64 {
        self.with_distance(eta + shift, |t| (eta - t.center) + shift)
    }

    /// `U(x)` with each term's distance to its center supplied by `dist`.
    #[inline]
    pub fn with_distance<D: Fn(&PowerLawTerm) -> f64>(&self, x: f64, dist: D) -> f64 {
        self.with_values(x, |t| t.at_offset(dist(t)))
    }

    /// `U(x)` with each term's value supplied by `value`.
    #[inline]
    pub(crate) fn with_values<F: Fn(&PowerLawTerm) -> f64>(&self, x: f64, value: F) -> f64 {
        let mut v = self.constant;
        for t in &self.plain {
            v += value(t);
        }
        if let Some(m) = &self.modulation {
            let mut s = 0.0;
            for t in &self.modulated {
                s += value(t);
            }
            v += m.eval(x) * s;
        }
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn eval_v_examples() {
        let half = MomentumForm::constant(2, 0.5).unwrap();
        assert_eq!(half.eval_v(3.7, &[2.0, 0.0]).unwrap(), 2.0);

        let f = MomentumForm::isotropic(1, PowerLawTerm::pure(-0.5).unwrap()).unwrap();
        assert_eq!(f.eval_v(4.0, &[1.0]).unwrap(), 0.5);

        let multi = MomentumForm::multi_singular(
            1,
            vec![
                PowerLawTerm::new(1.0, -0.2, 1.0).unwrap(),
                PowerLawTerm::new(1.0, -0.5, 0.0).unwrap(),
            ],
        )
        .unwrap();
        let oracle = libm::pow(0.5, -0.2) + libm::pow(0.5, -0.5);
        assert!((multi.eval_v(0.5, &[1.0]).unwrap() - oracle).abs() < 1e-15);
    }

    #[test]
    fn singular_center_is_an_error() {
        let f = MomentumForm::isotropic(1, PowerLawTerm::new(1.0, -0.5, 1.5).unwrap()).unwrap();
        assert_eq!(f.eval_v(1.5, &[1.0]), Err(Error::Singular { center: 1.5 }));
        let regular = MomentumForm::isotropic(1, PowerLawTerm::new(1.0, 0.5, 1.5).unwrap()).unwrap();
        assert_eq!(regular.eval_v(1.5, &[1.0]).unwrap(), 0.0);
    }

    #[test]
    fn term_validation() {
        assert!(PowerLawTerm::new(-1.0, 0.0, 0.0).is_err());
        assert!(PowerLawTerm::new(1.0, -2.0, 0.0).is_err());
        let t = PowerLawTerm::pure(-1.2).unwrap();
        assert!(t.validate_for(AnalysisMode::UpperBound).is_ok());
        assert!(matches!(t.validate_for(AnalysisMode::LowerBound), Err(Error::Divergent(_))));
    }

    #[test]
    fn scale_invariance_examples() {
        let f = MomentumForm::isotropic(3, PowerLawTerm::pure(-0.5).unwrap()).unwrap();
        assert!(check_scale_invariance(&f, 2.0, 1.0).unwrap() < 1e-15);

        let d = MomentumForm::diagonal(vec![
            PowerLawTerm::new(1.0, 0.6, 0.0).unwrap(),
            PowerLawTerm::new(2.5, 0.6, 0.0).unwrap(),
        ])
        .unwrap();
        assert!(check_scale_invariance(&d, 3.0, 0.7).unwrap() < 1e-14);

        let c = MomentumForm::composite(
            MomentumForm::isotropic(1, PowerLawTerm::pure(-0.5).unwrap()).unwrap(),
            Modulation::Sinusoid {
                mean: 1.0,
                amplitude: 0.5,
                frequency: 1.0,
                phase: 0.0,
            },
            SymMatrix::zeros(1),
        )
        .unwrap();
        assert!(check_scale_invariance(&c, 2.0, 1.0).unwrap() > 1e-3);
    }

    #[test]
    fn modulation_bounds_are_enforced() {
        let bad = Modulation::Custom {
            f: Arc::new(|x: f64| 1.0 + x * x),
            lower: 1.0,
            upper: 2.0,
        };
        assert!(bad.validate().is_err());
        assert!(Modulation::Constant(0.0).validate().is_err());
        let ok = Modulation::Logistic {
            low: 0.5,
            high: 2.0,
            center: 0.0,
            scale: 0.3,
        };
        assert!(ok.validate().is_ok());
    }

    #[test]
    fn projection_matches_matrix() {
        let form = MomentumForm::composite(
            MomentumForm::diagonal(vec![
                PowerLawTerm::new(1.0, -0.5, 0.0).unwrap(),
                PowerLawTerm::new(2.0, -0.5, 0.0).unwrap(),
            ])
            .unwrap(),
            Modulation::Constant(1.5),
            SymMatrix::from_rows(&[vec![0.2, 0.1], vec![0.1, 0.3]]).unwrap(),
        )
        .unwrap();
        let p = [0.7, -1.3];
        let eta = 0.37;
        let direct = form.matrix_at(eta).unwrap().quad_form(&p);
        assert!((form.eval_v(eta, &p).unwrap() - direct).abs() < 1e-14);
        let tr = form.trace_potential().at(eta, 0.0);
        assert!((tr - form.matrix_at(eta).unwrap().trace()).abs() < 1e-14);
    }

    #[test]
    fn line_potential_distance_form_is_translation_exact() {
        let a = LinePotential::from_terms(vec![PowerLawTerm::new(1.0, -0.5, 1.5).unwrap()]);
        let b = LinePotential::from_terms(vec![PowerLawTerm::new(1.0, -0.5, 0.0).unwrap()]);
        for shift in [0.1, -0.37, 2.5e-3] {
            assert_eq!(a.at(1.5, shift), b.at(0.0, shift));
        }
    }
}
