//! The JSON experiment schema and its resolution into core types.

use std::fmt;
use std::path::Path;

use fkg_core::green::{log_grid, GreenSettings};
use fkg_core::kernel::McSettings;
use fkg_core::linalg::SymMatrix;
use fkg_core::numerics::Tolerance;
use fkg_core::potentials::metric::{
    metric_to_potentials, Interpretation, MetricConstants, MetricModel, MetricPotentials,
};
use fkg_core::potentials::{AnalysisMode, Modulation, MomentumForm, PowerLawTerm, ScalarPotential};
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// A config problem, tied to the dot-path of the field responsible.
#[derive(Clone, Debug, PartialEq)]
pub struct ValidationError {
    pub field: String,
    pub message: String,
}

impl ValidationError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        ValidationError {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for ValidationError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

impl std::error::Error for ValidationError {}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<PotentialSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metric: Option<MetricSpec>,
    pub grids: GridSpec,
    #[serde(default)]
    pub mc: McSpec,
    #[serde(default)]
    pub quadrature: QuadratureSpec,
    #[serde(default)]
    pub fits: FitSpec,
    #[serde(default)]
    pub output: OutputSpec,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    #[serde(default = "one")]
    pub amplitude: f64,
    pub exponent: f64,
    #[serde(default)]
    pub center: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PotentialSpec {
    pub form: FormSpec,
    /// Terms of `W`; empty for `W = 0`.
    #[serde(default)]
    pub w: Vec<TermSpec>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum FormSpec {
    /// `Σ terms · I`.
    Isotropic { dim: usize, terms: Vec<TermSpec> },
    /// One term per axis.
    Diagonal { terms: Vec<TermSpec> },
    /// `value · I`.
    Constant { dim: usize, value: f64 },
    /// `f(η) · base + l`.
    Composite {
        base: Box<FormSpec>,
        modulation: ModulationSpec,
        l_matrix: Vec<Vec<f64>>,
    },
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModulationSpec {
    Constant {
        value: f64,
    },
    Sinusoid {
        mean: f64,
        amplitude: f64,
        frequency: f64,
        #[serde(default)]
        phase: f64,
    },
    Logistic {
        low: f64,
        high: f64,
        center: f64,
        scale: f64,
    },
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum InterpretationSpec {
    Cosmological,
    QuantumMechanics,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MetricSpec {
    pub interpretation: InterpretationSpec,
    /// Isotropic exponent; give either this or `alphas`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alphas: Option<Vec<f64>>,
    #[serde(default)]
    pub mass: f64,
    #[serde(default)]
    pub xi: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constants: Option<ConstantsSpec>,
    /// `U(η)` for the quantum-mechanical case.
    #[serde(default)]
    pub u: Vec<TermSpec>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ConstantsSpec {
    #[serde(default = "one")]
    pub kappa: f64,
    #[serde(default = "one")]
    pub c1: f64,
    #[serde(default = "one")]
    pub c2: f64,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct LogRange {
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Default)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<Vec<f64>>,
    /// Momentum norms; `p` points along the first axis.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_log: Option<LogRange>,
    /// `(η, η′)` pairs; defaults to `[[0, 0]]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<[f64; 2]>>,
    /// `|Δx|` range for position-space evaluations.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dx: Option<LogRange>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct McSpec {
    #[serde(default = "default_paths")]
    pub n_paths: usize,
    #[serde(default = "default_steps")]
    pub n_steps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub dirichlet: bool,
    #[serde(default)]
    pub antithetic: bool,
    #[serde(default = "default_chunk")]
    pub chunk_size: usize,
}

fn default_paths() -> usize {
    McSettings::default().n_paths
}

fn default_steps() -> usize {
    McSettings::default().n_steps
}

fn default_chunk() -> usize {
    McSettings::default().chunk_size
}

impl Default for McSpec {
    fn default() -> Self {
        McSpec {
            n_paths: default_paths(),
            n_steps: default_steps(),
            seed: None,
            dirichlet: false,
            antithetic: false,
            chunk_size: default_chunk(),
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct QuadratureSpec {
    #[serde(default = "default_rel")]
    pub rel_tol: f64,
    #[serde(default = "default_subdivisions")]
    pub max_subdivisions: usize,
    /// τ points of the Monte Carlo Green's function.
    #[serde(default = "default_tau_points")]
    pub tau_points: usize,
    #[serde(default = "default_tau_span")]
    pub tau_span: f64,
}

fn default_rel() -> f64 {
    Tolerance::default().rel
}

fn default_subdivisions() -> usize {
    Tolerance::default().max_subdivisions
}

fn default_tau_points() -> usize {
    GreenSettings::default().tau_points
}

fn default_tau_span() -> f64 {
    GreenSettings::default().tau_span
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            rel_tol: default_rel(),
            max_subdivisions: default_subdivisions(),
            tau_points: default_tau_points(),
            tau_span: default_tau_span(),
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FitSpec {
    /// Momentum threshold Λ for sandwich checks with `W ≠ 0`.
    #[serde(default = "one")]
    pub lambda: f64,
    /// Restricts momentum fits to `p` in `[min, max]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_window: Option<[f64; 2]>,
    /// Restricts moment fits to `τ` in `[min, max]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_window: Option<[f64; 2]>,
    /// Restricts position fits to `|Δx|` in `[min, max]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dx_window: Option<[f64; 2]>,
}

impl Default for FitSpec {
    fn default() -> Self {
        FitSpec {
            lambda: 1.0,
            p_window: None,
            tau_window: None,
            dx_window: None,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "default_id")]
    pub experiment_id: String,
    #[serde(default = "default_csv")]
    pub csv: String,
    /// Directory used when `--out` is not given.
    #[serde(default = "default_dir")]
    pub dir: String,
    #[serde(default = "yes")]
    pub plots: bool,
}

fn default_id() -> String {
    "experiment".into()
}

fn default_csv() -> String {
    "results.csv".into()
}

fn default_dir() -> String {
    "fkg-out".into()
}

fn yes() -> bool {
    true
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            experiment_id: default_id(),
            csv: default_csv(),
            dir: default_dir(),
            plots: true,
        }
    }
}

/// Applies `key=value` with a dot-path key; array elements are addressed by
/// index. The value is read as JSON, or as a string if it is not JSON.
pub fn apply_override(doc: &mut Value, assignment: &str) -> Result<(), ValidationError> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| ValidationError::new("--override", format!("expected KEY=VALUE, got `{assignment}`")))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(ValidationError::new("--override", "empty key"));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut cur = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let last = i + 1 == parts.len();
        cur = match cur {
            Value::Array(items) => {
                let idx: usize = part
                    .parse()
                    .map_err(|_| ValidationError::new(key, format!("`{part}` is not an array index")))?;
                let len = items.len();
                items
                    .get_mut(idx)
                    .ok_or_else(|| ValidationError::new(key, format!("index {idx} out of range (length {len})")))?
            }
            Value::Object(map) => {
                if !last && !map.contains_key(*part) {
                    map.insert(part.to_string(), Value::Object(Default::default()));
                }
                map.entry(part.to_string()).or_insert(Value::Null)
            }
            _ => {
                return Err(ValidationError::new(key, format!("`{part}` is inside a non-object value")));
            }
        };
    }
    *cur = value;
    Ok(())
}

pub fn parse_config(text: &str, overrides: &[String]) -> Result<ExperimentConfig, ValidationError> {
    let mut doc: Value = serde_json::from_str(text)
        .map_err(|e| ValidationError::new("<config>", format!("not valid JSON: {e}")))?;
    for o in overrides {
        apply_override(&mut doc, o)?;
    }
    serde_path_to_error::deserialize(doc).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner().to_string();
        let field = if path == "." { "<config>".to_string() } else { path };
        ValidationError::new(field, inner)
    })
}

pub fn load_config(path: &Path, overrides: &[String]) -> Result<ExperimentConfig, ValidationError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ValidationError::new("--config", format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text, overrides)
}

/// Values taken from the environment.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EnvOverrides {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
}

impl EnvOverrides {
    pub fn from_env() -> Result<Self, ValidationError> {
        let seed = match std::env::var("FKG_SEED") {
            Ok(s) => Some(
                s.trim()
                    .parse()
                    .map_err(|_| ValidationError::new("FKG_SEED", format!("not a decimal 64-bit integer: `{s}`")))?,
            ),
            Err(_) => None,
        };
        let threads = match std::env::var("FKG_THREADS") {
            Ok(s) => match s.trim().parse::<usize>() {
                Ok(n) if n > 0 => Some(n),
                _ => {
                    return Err(ValidationError::new("FKG_THREADS", format!("not a positive integer: `{s}`")));
                }
            },
            Err(_) => None,
        };
        Ok(EnvOverrides { seed, threads })
    }
}

/// Where the potentials came from, with field paths for each term.
#[derive(Clone, Debug)]
pub enum Source {
    Potential,
    Metric(Box<MetricPotentials>),
}

/// A validated experiment in core types.
#[derive(Clone, Debug)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub form: MomentumForm,
    pub w: ScalarPotential,
    pub source: Source,
    /// Terms of the form and of `W` with their field paths.
    terms: Vec<(String, PowerLawTerm)>,
    pub seed: u64,
    pub mc: McSettings,
    pub tol: Tolerance,
    pub green: GreenSettings,
    pub points: Vec<(f64, f64)>,
}

fn finite(field: &str, v: f64) -> Result<f64, ValidationError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(ValidationError::new(field, format!("must be finite, got {v}")))
    }
}

fn term(field: &str, t: &TermSpec) -> Result<PowerLawTerm, ValidationError> {
    PowerLawTerm::new(t.amplitude, t.exponent, t.center).map_err(|e| ValidationError::new(field, e.to_string()))
}

fn terms(field: &str, ts: &[TermSpec], out: &mut Vec<(String, PowerLawTerm)>) -> Result<Vec<PowerLawTerm>, ValidationError> {
    ts.iter()
        .enumerate()
        .map(|(i, t)| {
            let f = format!("{field}[{i}]");
            let pl = term(&f, t)?;
            out.push((f, pl));
            Ok(pl)
        })
        .collect()
}

fn build_form(field: &str, spec: &FormSpec, out: &mut Vec<(String, PowerLawTerm)>) -> Result<MomentumForm, ValidationError> {
    fn wrap(f: &str) -> impl Fn(fkg_core::Error) -> ValidationError + '_ {
        move |e| ValidationError::new(f, e.to_string())
    }
    match spec {
        FormSpec::Isotropic { dim, terms: ts } => {
            if *dim == 0 {
                return Err(ValidationError::new(format!("{field}.dim"), "must be at least 1"));
            }
            if ts.is_empty() {
                return Err(ValidationError::new(format!("{field}.terms"), "must not be empty"));
            }
            let t = terms(&format!("{field}.terms"), ts, out)?;
            MomentumForm::multi_singular(*dim, t).map_err(wrap(field))
        }
        FormSpec::Diagonal { terms: ts } => {
            if ts.is_empty() {
                return Err(ValidationError::new(format!("{field}.terms"), "must not be empty"));
            }
            let t = terms(&format!("{field}.terms"), ts, out)?;
            MomentumForm::diagonal(t).map_err(wrap(field))
        }
        FormSpec::Constant { dim, value } => {
            if *dim == 0 {
                return Err(ValidationError::new(format!("{field}.dim"), "must be at least 1"));
            }
            let f = format!("{field}.value");
            let t = PowerLawTerm::constant(*value).map_err(wrap(&f))?;
            out.push((f.clone(), t));
            MomentumForm::constant(*dim, *value).map_err(wrap(&f))
        }
        FormSpec::Composite {
            base,
            modulation,
            l_matrix,
        } => {
            if matches!(**base, FormSpec::Composite { .. }) {
                return Err(ValidationError::new(format!("{field}.base"), "composite forms cannot be nested"));
            }
            let b = build_form(&format!("{field}.base"), base, out)?;
            let lf = format!("{field}.l_matrix");
            let l = SymMatrix::from_rows(l_matrix).map_err(wrap(&lf))?;
            let m = match *modulation {
                ModulationSpec::Constant { value } => Modulation::Constant(value),
                ModulationSpec::Sinusoid {
                    mean,
                    amplitude,
                    frequency,
                    phase,
                } => Modulation::Sinusoid {
                    mean,
                    amplitude,
                    frequency,
                    phase,
                },
                ModulationSpec::Logistic {
                    low,
                    high,
                    center,
                    scale,
                } => Modulation::Logistic {
                    low,
                    high,
                    center,
                    scale,
                },
            };
            let mf = format!("{field}.modulation");
            m.validate().map_err(wrap(&mf))?;
            MomentumForm::composite(b, m, l).map_err(wrap(&lf))
        }
    }
}

fn build_metric(spec: &MetricSpec) -> Result<MetricModel, ValidationError> {
    let alphas = match (&spec.alpha, &spec.alphas) {
        (Some(a), None) => vec![*a],
        (None, Some(v)) if !v.is_empty() => v.clone(),
        (None, Some(_)) => return Err(ValidationError::new("metric.alphas", "must not be empty")),
        (None, None) => return Err(ValidationError::new("metric.alpha", "give `alpha` or `alphas`")),
        (Some(_), Some(_)) => return Err(ValidationError::new("metric.alphas", "give only one of `alpha` and `alphas`")),
    };
    if spec.xi != 0.0 {
        return Err(ValidationError::new(
            "metric.xi",
            format!("ξ = {} is not supported: potentials are generated for ξ = 0 only", spec.xi),
        ));
    }
    let interpretation = match spec.interpretation {
        InterpretationSpec::Cosmological => Interpretation::Cosmological,
        InterpretationSpec::QuantumMechanics => Interpretation::QuantumMechanics,
    };
    if interpretation == Interpretation::Cosmological && !spec.u.is_empty() {
        return Err(ValidationError::new("metric.u", "U(η) applies to the quantum-mechanical metric only"));
    }
    let u = spec
        .u
        .iter()
        .enumerate()
        .map(|(i, t)| term(&format!("metric.u[{i}]"), t))
        .collect::<Result<Vec<_>, _>>()?;
    let constants = spec
        .constants
        .map(|c| MetricConstants {
            kappa: c.kappa,
            c1: c.c1,
            c2: c.c2,
        })
        .unwrap_or_default();
    Ok(MetricModel {
        interpretation,
        alphas,
        mass: spec.mass,
        xi: spec.xi,
        constants,
        u,
    })
}

fn alpha_field(spec: &MetricSpec) -> &'static str {
    if spec.alphas.is_some() {
        "metric.alphas"
    } else {
        "metric.alpha"
    }
}

fn check_list(field: &str, v: &[f64], positive: bool) -> Result<(), ValidationError> {
    if v.is_empty() {
        return Err(ValidationError::new(field, "must not be empty"));
    }
    for (i, &x) in v.iter().enumerate() {
        let f = format!("{field}[{i}]");
        finite(&f, x)?;
        if positive && !(x > 0.0) {
            return Err(ValidationError::new(f, format!("must be positive, got {x}")));
        }
    }
    Ok(())
}

fn check_range(field: &str, r: &LogRange) -> Result<(), ValidationError> {
    finite(&format!("{field}.min"), r.min)?;
    finite(&format!("{field}.max"), r.max)?;
    if !(r.min > 0.0) {
        return Err(ValidationError::new(format!("{field}.min"), "must be positive"));
    }
    if !(r.max > r.min) {
        return Err(ValidationError::new(format!("{field}.max"), "must exceed min"));
    }
    if r.n < 2 {
        return Err(ValidationError::new(format!("{field}.n"), "must be at least 2"));
    }
    Ok(())
}

fn check_window(field: &str, w: &Option<[f64; 2]>) -> Result<(), ValidationError> {
    if let Some([a, b]) = w {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(ValidationError::new(field, format!("needs min < max, got [{a}, {b}]")));
        }
    }
    Ok(())
}

impl Experiment {
    pub fn resolve(config: ExperimentConfig, env: &EnvOverrides) -> Result<Self, ValidationError> {
        let mut term_paths = Vec::new();
        let (form, w, source) = match (&config.potential, &config.metric) {
            (Some(_), Some(_)) => {
                return Err(ValidationError::new("metric", "give exactly one of `potential` and `metric`"));
            }
            (None, None) => {
                return Err(ValidationError::new("potential", "missing: give `potential` or `metric`"));
            }
            (Some(p), None) => {
                let form = build_form("potential.form", &p.form, &mut term_paths)?;
                let w = ScalarPotential::new(terms("potential.w", &p.w, &mut term_paths)?);
                (form, w, Source::Potential)
            }
            (None, Some(m)) => {
                let model = build_metric(m)?;
                let mp = metric_to_potentials(&model).map_err(|e| ValidationError::new(alpha_field(m), e.to_string()))?;
                for t in mp.form.terms() {
                    term_paths.push((alpha_field(m).to_string(), *t));
                }
                for t in &mp.w.terms {
                    term_paths.push(("metric.mass".to_string(), *t));
                }
                (mp.form.clone(), mp.w.clone(), Source::Metric(Box::new(mp)))
            }
        };
        if !w.is_nonneg() {
            return Err(ValidationError::new("potential.w", "W must be nonnegative"));
        }

        let g = &config.grids;
        if let Some(t) = &g.tau {
            check_list("grids.tau", t, true)?;
        }
        if let Some(p) = &g.p {
            check_list("grids.p", p, false)?;
            if let Some(i) = p.iter().position(|v| *v < 0.0) {
                return Err(ValidationError::new(format!("grids.p[{i}]"), "momentum norms must be >= 0"));
            }
        }
        if g.p.is_some() && g.p_log.is_some() {
            return Err(ValidationError::new("grids.p_log", "give only one of `p` and `p_log`"));
        }
        if let Some(r) = &g.p_log {
            check_range("grids.p_log", r)?;
        }
        if let Some(r) = &g.dx {
            check_range("grids.dx", r)?;
        }
        let points = match &g.points {
            Some(v) if v.is_empty() => return Err(ValidationError::new("grids.points", "must not be empty")),
            Some(v) => {
                for (i, [a, b]) in v.iter().enumerate() {
                    finite(&format!("grids.points[{i}][0]"), *a)?;
                    finite(&format!("grids.points[{i}][1]"), *b)?;
                }
                v.iter().map(|[a, b]| (*a, *b)).collect()
            }
            None => vec![(0.0, 0.0)],
        };

        let m = &config.mc;
        let seed = env
            .seed
            .or(m.seed)
            .ok_or_else(|| ValidationError::new("mc.seed", "missing: set mc.seed or FKG_SEED"))?;
        if m.n_paths < 2 {
            return Err(ValidationError::new("mc.n_paths", "must be at least 2"));
        }
        if m.n_steps < 2 || !m.n_steps.is_power_of_two() {
            return Err(ValidationError::new("mc.n_steps", "must be a power of two, at least 2"));
        }
        if m.chunk_size == 0 {
            return Err(ValidationError::new("mc.chunk_size", "must be positive"));
        }
        let mc = McSettings {
            n_paths: m.n_paths,
            n_steps: m.n_steps,
            seed,
            chunk_size: m.chunk_size,
            stream_base: 0,
            dirichlet: m.dirichlet,
            antithetic: m.antithetic,
        };

        let q = &config.quadrature;
        if !(q.rel_tol > 0.0 && q.rel_tol < 1.0) {
            return Err(ValidationError::new("quadrature.rel_tol", "must be in (0, 1)"));
        }
        if q.max_subdivisions < 1 {
            return Err(ValidationError::new("quadrature.max_subdivisions", "must be positive"));
        }
        if q.tau_points < 3 {
            return Err(ValidationError::new("quadrature.tau_points", "must be at least 3"));
        }
        if !(q.tau_span > 1.0 && q.tau_span.is_finite()) {
            return Err(ValidationError::new("quadrature.tau_span", "must exceed 1"));
        }
        let tol = Tolerance {
            rel: q.rel_tol,
            abs: 0.0,
            max_subdivisions: q.max_subdivisions,
        };
        let green = GreenSettings {
            tol,
            mc,
            tau_points: q.tau_points,
            tau_span: q.tau_span,
        };

        let f = &config.fits;
        if !(f.lambda >= 0.0 && f.lambda.is_finite()) {
            return Err(ValidationError::new("fits.lambda", "must be finite and >= 0"));
        }
        check_window("fits.p_window", &f.p_window)?;
        check_window("fits.tau_window", &f.tau_window)?;
        check_window("fits.dx_window", &f.dx_window)?;
        if config.output.experiment_id.is_empty() {
            return Err(ValidationError::new("output.experiment_id", "must not be empty"));
        }
        if config.output.csv.is_empty() {
            return Err(ValidationError::new("output.csv", "must not be empty"));
        }

        Ok(Experiment {
            config,
            form,
            w,
            source,
            terms: term_paths,
            seed,
            mc,
            tol,
            green,
            points,
        })
    }

    /// Rejects exponents outside the range of `mode`, naming the field.
    pub fn require(&self, mode: AnalysisMode) -> Result<(), ValidationError> {
        for (field, t) in &self.terms {
            if let Err(e) = t.validate_for(mode) {
                let f = if field.starts_with("metric") {
                    field.clone()
                } else {
                    format!("{field}.exponent")
                };
                return Err(ValidationError::new(f, e.to_string()));
            }
        }
        Ok(())
    }

    pub fn taus(&self) -> Result<&[f64], ValidationError> {
        self.config
            .grids
            .tau
            .as_deref()
            .ok_or_else(|| ValidationError::new("grids.tau", "required by this subcommand"))
    }

    pub fn momenta(&self) -> Result<Vec<f64>, ValidationError> {
        let g = &self.config.grids;
        match (&g.p, &g.p_log) {
            (Some(p), _) => Ok(p.clone()),
            (None, Some(r)) => Ok(log_grid(r.min, r.max, r.n)),
            (None, None) => Err(ValidationError::new("grids.p", "required by this subcommand (or grids.p_log)")),
        }
    }

    pub fn dx(&self) -> Result<Vec<f64>, ValidationError> {
        self.config
            .grids
            .dx
            .map(|r| log_grid(r.min, r.max, r.n))
            .ok_or_else(|| ValidationError::new("grids.dx", "required by this subcommand"))
    }

    /// Momentum vector of norm `p` along the first axis.
    pub fn momentum(&self, p: f64) -> Vec<f64> {
        let mut v = vec![0.0; self.form.dim()];
        v[0] = p;
        v
    }
}

pub fn in_window(x: f64, w: Option<[f64; 2]>) -> bool {
    w.is_none_or(|[a, b]| x >= a && x <= b)
}

/// The compiled `potential` block for a metric config.
pub fn potential_spec_of(form: &MomentumForm, w: &ScalarPotential) -> Result<PotentialSpec, ValidationError> {
    let spec_terms = |ts: &[PowerLawTerm]| -> Vec<TermSpec> {
        ts.iter()
            .map(|t| TermSpec {
                amplitude: t.amplitude,
                exponent: t.exponent,
                center: t.center,
            })
            .collect()
    };
    let form = match form {
        MomentumForm::Isotropic { dim, terms } => FormSpec::Isotropic {
            dim: *dim,
            terms: spec_terms(terms),
        },
        MomentumForm::Diagonal { terms } => FormSpec::Diagonal {
            terms: spec_terms(terms),
        },
        MomentumForm::Composite { .. } => {
            return Err(ValidationError::new("metric", "compiled metrics never produce composite forms"));
        }
    };
    Ok(PotentialSpec {
        form,
        w: spec_terms(&w.terms),
    })
}
