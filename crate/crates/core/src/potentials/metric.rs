//! Potentials induced by power-law metrics.
//!
//! Cosmological: `ds² = dt² + Σ a_j(t)² dx_j²` with `a_j = |t|^{α_j}`, d = 3.
//! Quantum mechanical: `ds² = dx₀² + |x₀|^{2α}(dx₁² + dx₂²)`, d = 2.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::{MomentumForm, PowerLawTerm, ScalarPotential};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Interpretation {
    Cosmological,
    QuantumMechanics,
}

/// Proportionality constants left open by the metric reduction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricConstants {
    pub kappa: f64,
    pub c1: f64,
    pub c2: f64,
}

impl Default for MetricConstants {
    fn default() -> Self {
        MetricConstants {
            kappa: 1.0,
            c1: 1.0,
            c2: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricModel {
    pub interpretation: Interpretation,
    /// One exponent (isotropic) or one per spatial axis.
    pub alphas: Vec<f64>,
    pub mass: f64,
    pub xi: f64,
    pub constants: MetricConstants,
    /// `U(η)` of the quantum-mechanical case, as power laws about 0.
    pub u: Vec<PowerLawTerm>,
}

/// Result of [`metric_to_potentials`].
#[derive(Clone, Debug)]
pub struct MetricPotentials {
    pub form: MomentumForm,
    pub w: ScalarPotential,
    /// Leading singularity exponent of `Ṽ`.
    pub nu: f64,
    /// Exponent of `W`, `None` when `W = 0`.
    pub sigma: Option<f64>,
    /// `ν > -1/2`, where the lower-bound closed forms apply.
    pub theorem1_regime: bool,
    /// The Gaussian average `B` of `W` is finite.
    pub b_finite: bool,
    /// All of κ, C₁, C₂ are at their default value 1.
    pub default_constants: bool,
}

impl MetricModel {
    pub fn cosmological(alpha: f64, mass: f64) -> Self {
        MetricModel {
            interpretation: Interpretation::Cosmological,
            alphas: vec![alpha],
            mass,
            xi: 0.0,
            constants: MetricConstants::default(),
            u: Vec::new(),
        }
    }

    pub fn quantum(alpha: f64, u: Vec<PowerLawTerm>) -> Self {
        MetricModel {
            interpretation: Interpretation::QuantumMechanics,
            alphas: vec![alpha],
            mass: 0.0,
            xi: 0.0,
            constants: MetricConstants::default(),
            u,
        }
    }

    pub fn spatial_dim(&self) -> usize {
        match self.interpretation {
            Interpretation::Cosmological => 3,
            Interpretation::QuantumMechanics => 2,
        }
    }

    fn validate(&self) -> Result<()> {
        let n = self.alphas.len();
        let ok_len = match self.interpretation {
            Interpretation::Cosmological => n == 1 || n == 3,
            Interpretation::QuantumMechanics => n == 1,
        };
        if !ok_len {
            return Err(Error::domain(format!(
                "{:?} metric takes {} exponent(s), got {n}",
                self.interpretation,
                if self.interpretation == Interpretation::Cosmological {
                    "1 or 3"
                } else {
                    "1"
                }
            )));
        }
        if self.alphas.iter().any(|a| a.is_nan()) {
            return Err(Error::domain("metric exponent α is NaN"));
        }
        if !(self.mass >= 0.0) {
            return Err(Error::domain("mass must be >= 0"));
        }
        let c = self.constants;
        if !(c.kappa > 0.0 && c.c1 > 0.0 && c.c2 > 0.0) {
            return Err(Error::domain("metric constants κ, C₁, C₂ must be positive"));
        }
        let alpha = self.mean_alpha();
        match self.interpretation {
            Interpretation::Cosmological if alpha == 1.0 / 3.0 => {
                Err(Error::domain("cosmological mapping excludes α = 1/3"))
            }
            Interpretation::QuantumMechanics if alpha == 0.5 => {
                Err(Error::domain("quantum-mechanical mapping excludes α = 1/2"))
            }
            _ => Ok(()),
        }
    }

    fn mean_alpha(&self) -> f64 {
        self.alphas.iter().sum::<f64>() / self.alphas.len() as f64
    }

    /// Denominator of the coordinate change, `1 - 3ᾱ` or `1 - 2α`.
    fn denominator(&self) -> f64 {
        match self.interpretation {
            Interpretation::Cosmological => 1.0 - 3.0 * self.mean_alpha(),
            Interpretation::QuantumMechanics => 1.0 - 2.0 * self.mean_alpha(),
        }
    }

    /// True when `t → ∞` is mapped to `η → 0`.
    pub fn maps_infinity_to_zero(&self) -> bool {
        self.denominator() < 0.0
    }

    /// Exponents `β_j` with `a_j ∝ |η|^{β_j}` (cosmological only).
    pub fn scale_factors(&self) -> Result<ScaleFactors> {
        self.validate()?;
        if self.interpretation != Interpretation::Cosmological {
            return Err(Error::Unsupported(
                "scale factors are defined for the cosmological metric".into(),
            ));
        }
        let den = self.denominator();
        if !den.is_finite() {
            return Err(Error::Unsupported("α → ∞ has no power-law scale factors".into()));
        }
        let mut betas: Vec<f64> = self.alphas.iter().map(|a| a / den).collect();
        if betas.len() == 1 {
            betas = vec![betas[0]; 3];
        }
        ScaleFactors::power_law(betas)
    }
}

/// ν as a function of α, with the `α → ∞` limit.
pub fn nu_of_alpha(interpretation: Interpretation, alpha: f64) -> f64 {
    match interpretation {
        Interpretation::Cosmological if alpha.is_infinite() => -2.0 / 3.0,
        Interpretation::Cosmological => 2.0 * alpha / (1.0 - 3.0 * alpha),
        Interpretation::QuantumMechanics if alpha.is_infinite() => -0.5,
        Interpretation::QuantumMechanics => alpha / (1.0 - 2.0 * alpha),
    }
}

/// Compiles a metric model into `(Ṽ, W)` with its exponents and regime
/// flags.
pub fn metric_to_potentials(model: &MetricModel) -> Result<MetricPotentials> {
    model.validate()?;
    if model.xi != 0.0 {
        return Err(Error::Unsupported(format!(
            "curvature coupling ξ = {} adds an η⁻² potential; only ξ = 0 is supported",
            model.xi
        )));
    }
    let c = model.constants;
    let default_constants = c == MetricConstants::default();
    let (form, w, nu) = match model.interpretation {
        Interpretation::Cosmological => {
            let abar = model.mean_alpha();
            if abar.is_infinite() {
                if model.mass > 0.0 {
                    return Err(Error::Unsupported(
                        "the α → ∞ limit gives an η⁻² mass term".into(),
                    ));
                }
                let nu = nu_of_alpha(model.interpretation, abar);
                let form = MomentumForm::isotropic(3, PowerLawTerm::new(c.kappa, 2.0 * nu, 0.0)?)?;
                (form, ScalarPotential::zero(), nu)
            } else {
                let den = 1.0 - 3.0 * abar;
                // Ṽ_jj ∝ a_j⁻² a⁶ = |t|^{6ᾱ - 2α_j} and η ∝ t^{1-3ᾱ}.
                let exps: Vec<f64> = model
                    .alphas
                    .iter()
                    .map(|a| (6.0 * abar - 2.0 * a) / den)
                    .collect();
                let form = if exps.len() == 1 {
                    MomentumForm::isotropic(3, PowerLawTerm::new(c.kappa, exps[0], 0.0)?)?
                } else {
                    MomentumForm::diagonal(
                        exps.iter()
                            .map(|&e| PowerLawTerm::new(c.kappa, e, 0.0))
                            .collect::<Result<Vec<_>>>()?,
                    )?
                };
                let nu = 0.5 * exps.iter().copied().fold(f64::INFINITY, f64::min);
                let w = if model.mass > 0.0 {
                    ScalarPotential::power_law(c.c1 * model.mass * model.mass, 6.0 * abar / den)?
                } else {
                    ScalarPotential::zero()
                };
                (form, w, nu)
            }
        }
        Interpretation::QuantumMechanics => {
            let alpha = model.alphas[0];
            let nu = nu_of_alpha(model.interpretation, alpha);
            let form = MomentumForm::isotropic(2, PowerLawTerm::new(c.c1, 2.0 * nu, 0.0)?)?;
            let g_exp = if alpha.is_infinite() {
                -1.0
            } else {
                4.0 * alpha / (1.0 - 2.0 * alpha)
            };
            let mut terms = Vec::with_capacity(model.u.len());
            for t in &model.u {
                if t.center != 0.0 && t.exponent != 0.0 {
                    return Err(Error::Unsupported(
                        "U(η) must consist of power laws centered at η = 0".into(),
                    ));
                }
                terms.push(PowerLawTerm::new(c.c2 * t.amplitude, g_exp + t.exponent, 0.0)?);
            }
            (form, ScalarPotential::new(terms), nu)
        }
    };
    let sigma = w
        .terms
        .iter()
        .filter(|t| t.amplitude > 0.0)
        .map(|t| t.nu())
        .fold(None, |m: Option<f64>, s| Some(m.map_or(s, |m| m.min(s))));
    let b_finite = match model.interpretation {
        Interpretation::Cosmological => model.mass == 0.0 || model.mean_alpha().abs() < 1.0 / 3.0,
        Interpretation::QuantumMechanics => sigma.is_none_or(|s| s > -0.5),
    };
    Ok(MetricPotentials {
        form,
        w,
        nu,
        sigma,
        theorem1_regime: nu > -0.5,
        b_finite,
        default_constants,
    })
}

/// The coordinate `η` corresponding to cosmological time `t` (or to `x₀`).
pub fn eta_of_t(model: &MetricModel, t: f64) -> Result<f64> {
    model.validate()?;
    let den = model.denominator();
    if !den.is_finite() {
        return Err(Error::domain("η(t) is undefined for infinite α"));
    }
    let k = match model.interpretation {
        Interpretation::Cosmological => 3.0 * model.mean_alpha(),
        Interpretation::QuantumMechanics => 2.0 * model.mean_alpha(),
    };
    if k == 0.0 {
        return Ok(t);
    }
    if t == 0.0 {
        if den < 0.0 {
            return Err(Error::Singular { center: 0.0 });
        }
        return Ok(0.0);
    }
    Ok(t * libm::pow(t.abs(), -k) / den)
}

/// Scale factors `a_j(η) = |η|^{β_j}` for `j = 1, 2, 3`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScaleFactors {
    betas: Vec<f64>,
}

impl ScaleFactors {
    pub fn power_law(betas: Vec<f64>) -> Result<Self> {
        if betas.len() != 3 || betas.iter().any(|b| !b.is_finite()) {
            return Err(Error::domain("three finite scale-factor exponents are required"));
        }
        Ok(ScaleFactors { betas })
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    fn mean_beta(&self) -> f64 {
        self.betas.iter().sum::<f64>() / 3.0
    }

    /// `gR = 6a⁴(a⁻² ∂δ + δ² + Q)` with
    /// `δ_j = a_j⁻¹ a⁻² ∂a_j`, `δ = a⁻³ ∂a`, `Q = (1/18) Σ_{j<k} (δ_j − δ_k)²`.
    pub fn curvature(&self, eta: f64) -> Result<f64> {
        if eta == 0.0 {
            return Err(Error::Singular { center: 0.0 });
        }
        let b = self.mean_beta();
        let a = libm::pow(eta.abs(), b);
        let a_m2 = 1.0 / (a * a);
        let delta_j: Vec<f64> = self.betas.iter().map(|bj| bj * a_m2 / eta).collect();
        let delta = b * a_m2 / eta;
        let d_delta = b * (-2.0 * b - 1.0) * a_m2 / (eta * eta);
        let mut q = 0.0;
        for j in 0..3 {
            for k in j + 1..3 {
                let diff = delta_j[j] - delta_j[k];
                q += diff * diff;
            }
        }
        q /= 18.0;
        let a2 = a * a;
        Ok(6.0 * a2 * a2 * (a_m2 * d_delta + delta * delta + q))
    }

    /// `m² g = m² a⁶`.
    pub fn mass_term(&self, mass: f64, eta: f64) -> f64 {
        let a = libm::pow(eta.abs(), self.mean_beta());
        let a3 = a * a * a;
        mass * mass * a3 * a3
    }
}

/// `gR(η)` for the model's scale factors.
pub fn curvature_potential(model: &MetricModel, eta: f64) -> Result<f64> {
    model.scale_factors()?.curvature(eta)
}

/// `m² g(η)` for the model's scale factors.
pub fn mass_potential(model: &MetricModel, eta: f64) -> Result<f64> {
    Ok(model.scale_factors()?.mass_term(model.mass, eta))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosmological_exponents() {
        let m = metric_to_potentials(&MetricModel::cosmological(0.1, 1.0)).unwrap();
        assert!((m.nu - 0.2 / 0.7).abs() < 1e-15);
        assert!((m.sigma.unwrap() - 0.3 / 0.7).abs() < 1e-15);
        assert!(m.theorem1_regime && m.b_finite && m.default_constants);
        assert_eq!(m.form.dim(), 3);
    }

    #[test]
    fn infinite_alpha_limit() {
        assert_eq!(nu_of_alpha(Interpretation::Cosmological, f64::INFINITY), -2.0 / 3.0);
        let big = nu_of_alpha(Interpretation::Cosmological, 1e9);
        assert!((big + 2.0 / 3.0).abs() < 1e-8);
        let m = metric_to_potentials(&MetricModel::cosmological(f64::INFINITY, 0.0)).unwrap();
        assert_eq!(m.nu, -2.0 / 3.0);
        assert!(!m.theorem1_regime);
        assert!(matches!(
            metric_to_potentials(&MetricModel::cosmological(f64::INFINITY, 1.0)),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn quantum_exponents() {
        let u = vec![PowerLawTerm::pure(0.0).unwrap()];
        let m = metric_to_potentials(&MetricModel::quantum(0.25, u)).unwrap();
        assert_eq!(m.nu, 0.5);
        assert_eq!(m.form.dim(), 2);
        // W = |η|^{4α/(1-2α)} = |η|², σ = 1.
        assert_eq!(m.sigma, Some(1.0));
    }

    #[test]
    fn excluded_and_unsupported() {
        let mut m = MetricModel::cosmological(1.0 / 3.0, 0.0);
        assert!(matches!(metric_to_potentials(&m), Err(Error::Domain(_))));
        m.alphas = vec![0.1];
        m.xi = 1.0 / 6.0;
        assert!(matches!(metric_to_potentials(&m), Err(Error::Unsupported(_))));
        let q = MetricModel::quantum(0.5, Vec::new());
        assert!(matches!(metric_to_potentials(&q), Err(Error::Domain(_))));
    }

    #[test]
    fn eta_of_t_examples() {
        let id = MetricModel::cosmological(0.0, 0.0);
        assert_eq!(eta_of_t(&id, 3.0).unwrap(), 3.0);
        let m = MetricModel::cosmological(0.25, 0.0);
        assert!((eta_of_t(&m, 1.0).unwrap() - 4.0).abs() < 1e-15);
        let late = MetricModel::cosmological(0.5, 0.0);
        assert!(late.maps_infinity_to_zero());
        let e1 = eta_of_t(&late, 1e4).unwrap();
        let e2 = eta_of_t(&late, 1e8).unwrap();
        assert!(e1 < 0.0 && e2 < 0.0 && e2 > e1 && e2.abs() < 1e-3);
    }

    #[test]
    fn isotropic_curvature_has_no_anisotropy() {
        let s = ScaleFactors::power_law(vec![0.4; 3]).unwrap();
        let aniso = ScaleFactors::power_law(vec![0.2, 0.4, 0.6]).unwrap();
        // Same mean exponent, so the difference is exactly 6a⁴Q.
        let eta = 1.3;
        let a4 = libm::pow(eta, 4.0 * 0.4);
        let a_m2 = libm::pow(eta, -0.8);
        let q = (0.04 + 0.16 + 0.04) * (a_m2 / eta).powi(2) / 18.0;
        let diff = aniso.curvature(eta).unwrap() - s.curvature(eta).unwrap();
        assert!((diff - 6.0 * a4 * q).abs() < 1e-12);
    }

    #[test]
    fn curvature_matches_finite_differences() {
        let beta = 0.35;
        let s = ScaleFactors::power_law(vec![beta; 3]).unwrap();
        let a = |x: f64| libm::pow(x.abs(), beta);
        let delta = |x: f64| {
            let h = 1e-5 * x.abs();
            let da = (a(x + h) - a(x - h)) / (2.0 * h);
            da / a(x).powi(3)
        };
        let eta = 1.0;
        let h = 1e-4;
        let d_delta = (delta(eta + h) - delta(eta - h)) / (2.0 * h);
        let ae = a(eta);
        let oracle = 6.0 * ae.powi(4) * (d_delta / (ae * ae) + delta(eta).powi(2));
        let got = s.curvature(eta).unwrap();
        assert!((got - oracle).abs() < 1e-6 * got.abs().max(1.0), "{got} vs {oracle}");
        assert!(s.curvature(0.0).is_err());
    }

    #[test]
    fn mass_term_value() {
        let beta = 0.3;
        let s = ScaleFactors::power_law(vec![beta; 3]).unwrap();
        assert!((s.mass_term(1.0, 2.0) - libm::pow(2.0, 6.0 * beta)).abs() < 1e-14);
    }
}
