//! The acceptance suite, shared by `fkg selftest` and the `acceptance` test
//! target.

use std::f64::consts::PI;
use std::time::Instant;

use fkg_core::appendix::{free_position_reference, gu_momentum_bessel, gu_position_isotropic_reduced, position_slope};
use fkg_core::bounds::{lower_bound_kernel, upper_bound_kernel};
use fkg_core::green::{green_momentum, log_grid, omega, zero_momentum_finiteness, GreenMethod, GreenSettings};
use fkg_core::kernel::{fk_kernel_momentum, second_moment, McSettings, MomentMode};
use fkg_core::numerics::{gamma_fn, integrate_semi_infinite, SemiInfinite, Tolerance};
use fkg_core::oracle::{green_with_estimate, kernel_with_estimate, LatticeGrid};
use fkg_core::potentials::{MomentumForm, PowerLawTerm, ScalarPotential};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::commands;
use crate::config::{parse_config, EnvOverrides, Experiment};
use crate::exec::RayonExecutor;
use crate::output::{write_csv, ResultRow};

#[derive(Clone, Debug, PartialEq)]
pub struct CriterionResult {
    pub id: u32,
    pub title: &'static str,
    pub pass: bool,
    pub measured: String,
    pub expected: String,
    pub seconds: f64,
}

impl CriterionResult {
    pub fn line(&self) -> String {
        format!(
            "[{}] criterion {:>2} {}: measured {} | expected {} | {:.2} s",
            if self.pass { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.measured,
            self.expected,
            self.seconds
        )
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SelftestOptions {
    pub seed: u64,
    /// Worker threads; 0 lets rayon pick.
    pub threads: usize,
}

pub const TITLES: [&str; 11] = [
    "free-field kernel",
    "Jensen kernel sandwich",
    "closed-form K1 integral",
    "momentum scaling",
    "sandwich with W = |eta|",
    "second-moment exponents",
    "free-field position and Bessel routes",
    "position scaling",
    "multi-singularity scaling",
    "zero-momentum finiteness",
    "determinism across thread counts",
];

struct Outcome {
    pass: bool,
    measured: String,
    expected: String,
}

type Check = Result<Outcome, String>;

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn iso(dim: usize, exponent: f64) -> MomentumForm {
    MomentumForm::isotropic(dim, PowerLawTerm::pure(exponent).expect("valid exponent")).expect("valid form")
}

fn axis(dim: usize, p: f64) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    v[0] = p;
    v
}

fn mc(seed: u64, n_paths: usize) -> McSettings {
    McSettings {
        n_paths,
        n_steps: 256,
        seed,
        ..McSettings::default()
    }
}

fn executor(threads: usize) -> Result<RayonExecutor, String> {
    RayonExecutor::new(threads).map_err(err)
}

fn criterion1_config(seed: u64) -> String {
    json!({
        "potential": {"form": {"type": "constant", "dim": 3, "value": 0.5}},
        "grids": {"tau": [0.25, 1.0, 4.0], "p": [0.0, 1.0, 2.0]},
        "mc": {"seed": seed, "n_paths": 100_000, "n_steps": 256},
        "output": {"experiment_id": "criterion-1"}
    })
    .to_string()
}

fn kernel_rows(config: &str, threads: usize) -> Result<Vec<ResultRow>, String> {
    let ex = Experiment::resolve(parse_config(config, &[]).map_err(err)?, &EnvOverrides::default()).map_err(err)?;
    Ok(commands::kernel(&executor(threads)?, &ex).map_err(err)?.rows)
}

fn c1(o: &SelftestOptions) -> Check {
    let start = Instant::now();
    let rows = kernel_rows(&criterion1_config(o.seed), o.threads)?;
    let secs = start.elapsed().as_secs_f64();
    let (mut worst_rel, mut worst_z) = (0.0f64, 0.0f64);
    for r in &rows {
        let inputs: serde_json::Value = serde_json::from_str(&r.inputs_json).map_err(err)?;
        let tau = inputs["tau"].as_f64().ok_or("tau missing")?;
        let p = inputs["p"][0].as_f64().ok_or("p missing")?;
        let exact = (2.0 * PI * tau).powf(-0.5) * (-tau * p * p / 2.0).exp();
        let se = r.error.unwrap_or(0.0);
        // Every path carries the same weight here, so the standard error
        // vanishes up to rounding.
        let band = 3.0 * se + 1e-12 * exact;
        worst_rel = worst_rel.max(rel(r.value, exact));
        worst_z = worst_z.max((r.value - exact).abs() / band);
    }
    Ok(Outcome {
        pass: rows.len() == 9 && worst_rel <= 0.01 && worst_z <= 1.0 && secs <= 60.0,
        measured: format!("{} points, max rel {worst_rel:.2e}, max |dev|/(3se+1e-12 rel) {worst_z:.3}, {secs:.1} s", rows.len()),
        expected: "rel <= 1e-2, within 3 se, <= 60 s".into(),
    })
}

fn c2(o: &SelftestOptions) -> Check {
    let exec = executor(o.threads)?;
    let form = iso(1, -0.5);
    let w = ScalarPotential::zero();
    let tol = Tolerance::default();
    let settings = mc(o.seed, 100_000);
    let mut bad = Vec::new();
    let mut worst = f64::NEG_INFINITY;
    let mut lattice_worst = 0.0f64;
    let lattice_points = [(0.5, 0.5), (1.0, 0.5), (2.0, 0.5), (0.5, 1.0)];
    for tau in [0.5, 1.0, 2.0] {
        for pn in [0.5, 1.0, 2.0, 4.0] {
            let p = [pn];
            let lo = lower_bound_kernel(0.0, 0.0, tau, &p, &form, &w, &tol).map_err(err)?;
            let hi = upper_bound_kernel(0.0, 0.0, tau, &p, &form, &w, &tol).map_err(err)?;
            let m = fk_kernel_momentum(&exec, 0.0, 0.0, tau, &p, &form, &w, &settings).map_err(err)?;
            let band = 3.0 * m.std_error;
            let over_lo = (lo.value - lo.abs_error_estimate - m.mean) / band;
            let over_hi = (m.mean - hi.value - hi.abs_error_estimate) / band;
            let v = over_lo.max(over_hi);
            worst = worst.max(v);
            if v > 1.0 {
                bad.push(format!("(tau {tau}, p {pn})"));
            }
            if lattice_points.contains(&(tau, pn)) {
                let lat = kernel_with_estimate(LatticeGrid::default(), &form.project(&p), tau, 0.0, 0.0).map_err(err)?;
                let z = (lat.value - m.mean).abs() / (band + lat.discretization_error);
                lattice_worst = lattice_worst.max(z);
                if z > 1.0 {
                    bad.push(format!("lattice (tau {tau}, p {pn})"));
                }
            }
        }
    }
    Ok(Outcome {
        pass: bad.is_empty(),
        measured: format!(
            "12 points, max bound excess {worst:.3} of 3 se; lattice at 4 points max |dev|/(3se+est) {lattice_worst:.3}{}",
            if bad.is_empty() { String::new() } else { format!("; violations {}", bad.join(" ")) }
        ),
        expected: "lower <= MC <= upper within 3 se; lattice within 3 se + est".into(),
    })
}

fn c3(_: &SelftestOptions) -> Check {
    let start = Instant::now();
    let tol = Tolerance::default();
    let mut worst = 0.0f64;
    for nu in [-0.25, 0.0, 0.5] {
        let om = 0.5 / (1.0 + nu);
        for c in [0.5, 1.0, 4.0] {
            let r = integrate_semi_infinite(
                |tau: f64| (2.0 * PI * tau).powf(-0.5) * (-c * tau.powf(1.0 + nu)).exp(),
                SemiInfinite { small_exponent: -0.5 },
                &tol,
            )
            .map_err(err)?;
            let exact = c.powf(-om) * (2.0 * PI).powf(-0.5) * gamma_fn(om).map_err(err)? / (1.0 + nu);
            worst = worst.max(rel(r.value, exact));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    Ok(Outcome {
        pass: worst <= 1e-6 && secs <= 1.0,
        measured: format!("max rel {worst:.2e} over 9 cases, {secs:.3} s"),
        expected: "rel <= 1e-6, <= 1 s".into(),
    })
}

fn slope<E: fkg_core::exec::ChunkExecutor>(
    exec: &E,
    grid: &[f64],
    form: &MomentumForm,
    w: &ScalarPotential,
    method: GreenMethod,
) -> Result<f64, String> {
    let s = GreenSettings::default();
    let mut samples = Vec::with_capacity(grid.len());
    for &pn in grid {
        let g = green_momentum(exec, 0.0, 0.0, &axis(form.dim(), pn), form, w, method, &s).map_err(err)?;
        samples.push((pn, g.value, g.error));
    }
    Ok(fkg_core::green::fit_scaling_exponent(&samples).map_err(err)?.exponent)
}

fn c4(o: &SelftestOptions) -> Check {
    let start = Instant::now();
    let exec = executor(o.threads)?;
    let grid = log_grid(4.0, 64.0, 8);
    let w = ScalarPotential::zero();
    let mut ok = true;
    let mut parts = Vec::new();
    for nu in [-0.25, 0.0, 0.5] {
        let form = iso(1, 2.0 * nu);
        let target = -2.0 * omega(nu).map_err(err)?;
        let sl = slope(&exec, &grid, &form, &w, GreenMethod::Lower)?;
        let su = slope(&exec, &grid, &form, &w, GreenMethod::Upper)?;
        ok &= rel(sl, target) <= 0.02 && rel(su, target) <= 0.05;
        parts.push(format!("nu {nu}: L {sl:.4} U {su:.4} (target {target:.4})"));
    }
    let secs = start.elapsed().as_secs_f64();
    Ok(Outcome {
        pass: ok && secs <= 30.0,
        measured: format!("{}; {secs:.1} s", parts.join(", ")),
        expected: "L within 2%, U within 5% of -2 omega, <= 30 s".into(),
    })
}

fn c5(o: &SelftestOptions) -> Check {
    let exec = executor(o.threads)?;
    let form = iso(1, -0.5);
    let w = ScalarPotential::power_law(1.0, 1.0).map_err(err)?;
    let tol = Tolerance::default();
    let settings = mc(o.seed, 100_000);
    let mut worst = f64::NEG_INFINITY;
    let mut bad = Vec::new();
    for tau in [0.5, 1.0, 2.0] {
        for pn in [4.0, 8.0, 16.0] {
            let p = [pn];
            let lo = lower_bound_kernel(0.0, 0.0, tau, &p, &form, &w, &tol).map_err(err)?;
            let hi = upper_bound_kernel(0.0, 0.0, tau, &p, &form, &w, &tol).map_err(err)?;
            let m = fk_kernel_momentum(&exec, 0.0, 0.0, tau, &p, &form, &w, &settings).map_err(err)?;
            let band = 3.0 * m.std_error;
            let v = ((lo.value - lo.abs_error_estimate - m.mean) / band).max((m.mean - hi.value - hi.abs_error_estimate) / band);
            worst = worst.max(v);
            if v > 1.0 {
                bad.push(format!("(tau {tau}, p {pn})"));
            }
        }
    }
    let target = -2.0 * omega(-0.25).map_err(err)?;
    let sl = slope(&exec, &log_grid(8.0, 64.0, 8), &form, &w, GreenMethod::Lower)?;
    let slope_ok = rel(sl, target) <= 0.05;
    Ok(Outcome {
        pass: bad.is_empty() && slope_ok,
        measured: format!(
            "9 points, max bound excess {worst:.3} of 3 se{}; G_L slope {sl:.4}",
            if bad.is_empty() { String::new() } else { format!("; violations {}", bad.join(" ")) }
        ),
        expected: format!("sandwich within 3 se; slope within 5% of {target:.4}"),
    })
}

fn c6(o: &SelftestOptions) -> Check {
    let exec = executor(o.threads)?;
    let form = iso(1, -0.5);
    let zero = ScalarPotential::zero();
    let w = ScalarPotential::power_law(1.0, 1.0).map_err(err)?;
    let settings = mc(o.seed, 20_000);
    let taus = [0.25, 0.5, 1.0, 2.0, 4.0];
    let mut fits = Vec::new();
    let mut monotone = true;
    for mode in [MomentMode::IntegratedEndpoint, MomentMode::FixedEndpoint] {
        let mut samples = Vec::new();
        for &tau in &taus {
            let a = second_moment(&exec, tau, &form, &zero, mode, &settings).map_err(err)?;
            let b = second_moment(&exec, tau, &form, &w, mode, &settings).map_err(err)?;
            monotone &= b.value <= a.value;
            samples.push((tau, a.value, a.std_error));
        }
        fits.push(fkg_core::green::fit_scaling_exponent(&samples).map_err(err)?.exponent);
    }
    let ok = rel(fits[0], 0.75) <= 0.05 && rel(fits[1], 0.25) <= 0.05 && monotone;
    Ok(Outcome {
        pass: ok,
        measured: format!(
            "integrated {:.4}, fixed {:.4}, W >= 0 never larger: {monotone}",
            fits[0], fits[1]
        ),
        expected: "0.75 and 0.25 within 5%, W >= 0 never larger".into(),
    })
}

fn c7(o: &SelftestOptions) -> Check {
    let start = Instant::now();
    let tol = Tolerance::default();
    let mut rng = ChaCha8Rng::seed_from_u64(o.seed);
    let form = MomentumForm::constant(3, 1.0).map_err(err)?;
    let (mut pos_worst, mut ratio_lo, mut ratio_hi) = (0.0f64, f64::INFINITY, 0.0f64);
    for _ in 0..10 {
        let eta: f64 = rng.random_range(-1.0..1.0);
        let eta_p: f64 = rng.random_range(-1.0..1.0);
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x_p: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let r2 = (eta_p - eta).powi(2) + x.iter().zip(&x_p).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        let g = gu_position_isotropic_reduced(eta, &x, eta_p, &x_p, &form, &tol).map_err(err)?;
        let reference = free_position_reference(3, r2.sqrt());
        pos_worst = pos_worst.max(rel(g.value, reference));
        ratio_lo = ratio_lo.min(g.value / reference);
        ratio_hi = ratio_hi.max(g.value / reference);
    }
    let half = MomentumForm::constant(1, 0.5).map_err(err)?;
    let mut mom_worst = 0.0f64;
    for (eta, eta_p, pn) in [(0.0, 0.0, 1.0), (0.0, 0.5, 1.0), (-0.3, 0.4, 2.0), (0.2, 1.7, 0.5), (1.0, -1.0, 3.0), (0.0, 0.1, 10.0)] {
        let g = gu_momentum_bessel(eta, eta_p, &[pn], &half, &tol).map_err(err)?;
        let exact = (-pn * f64::abs(eta_p - eta)).exp() / pn;
        mom_worst = mom_worst.max(rel(g.value, exact));
    }
    let secs = start.elapsed().as_secs_f64();
    Ok(Outcome {
        pass: pos_worst <= 1e-3 && mom_worst <= 1e-4 && secs <= 10.0,
        measured: format!(
            "position max rel {pos_worst:.3e} (ratio {ratio_lo:.6}..{ratio_hi:.6}), momentum max rel {mom_worst:.2e}, {secs:.2} s"
        ),
        expected: "position rel <= 1e-3 at 10 points, momentum rel <= 1e-4 at 6 points, <= 10 s".into(),
    })
}

fn c8(_: &SelftestOptions) -> Check {
    let tol = Tolerance::default();
    let form = iso(3, -0.5);
    let grid = log_grid(1e-2, 1e-1, 6);
    let at_center = position_slope(&form, 0.0, 0.0, &grid, &tol).map_err(err)?.exponent;
    let off_center = position_slope(&form, 1.0, 1.0, &grid, &tol).map_err(err)?.exponent;
    let target = -3.0 + 4.0 / 3.0;
    Ok(Outcome {
        pass: rel(at_center, target) <= 0.03 && rel(off_center, -2.0) <= 0.03,
        measured: format!("eta = 0: {at_center:.4}, eta = 1: {off_center:.4}"),
        expected: format!("{target:.4} and -2 within 3%"),
    })
}

fn c9(o: &SelftestOptions) -> Check {
    let exec = executor(o.threads)?;
    let form = MomentumForm::multi_singular(
        1,
        vec![
            PowerLawTerm::new(1.0, -0.2, 1.0).map_err(err)?,
            PowerLawTerm::new(1.0, -0.5, 0.0).map_err(err)?,
        ],
    )
    .map_err(err)?;
    let target = -2.0 * omega(-0.25).map_err(err)?;
    let su = slope(&exec, &log_grid(16.0, 256.0, 8), &form, &ScalarPotential::zero(), GreenMethod::Upper)?;
    Ok(Outcome {
        pass: rel(su, target) <= 0.05,
        measured: format!("G_U slope {su:.4}"),
        expected: format!("{target:.4} within 5%"),
    })
}

fn c10(o: &SelftestOptions) -> Check {
    let exec = executor(o.threads)?;
    let w = ScalarPotential::power_law(1.0, 1.0).map_err(err)?;
    let tol = Tolerance::default();
    let up = zero_momentum_finiteness(&w, &tol).map_err(err)?;
    let lat = green_with_estimate(LatticeGrid::default(), &w.line(), 0.0, 0.0).map_err(err)?;
    let lower_form = MomentumForm::constant(1, 0.0).map_err(err)?;
    let lo = green_momentum(&exec, 0.0, 0.0, &[1.0], &lower_form, &w, GreenMethod::Lower, &GreenSettings::default())
        .map_err(err)?;
    let est = lat.discretization_error;
    let inside = up.value.is_finite() && lo.value - est <= lat.value && lat.value <= up.value + est;
    let divergent = matches!(
        green_momentum(
            &exec,
            0.0,
            0.0,
            &[0.0],
            &iso(1, -0.5),
            &ScalarPotential::zero(),
            GreenMethod::Lower,
            &GreenSettings::default()
        ),
        Err(fkg_core::Error::Divergent(_))
    );
    Ok(Outcome {
        pass: inside && divergent,
        measured: format!(
            "bound {:.6}, lattice {:.6} +- {est:.1e}, lower {:.6}; W = 0, p = 0 divergent: {divergent}",
            up.value, lat.value, lo.value
        ),
        expected: "lower - est <= lattice <= bound + est, divergence error".into(),
    })
}

/// CSV bytes with the timestamp column cut off.
fn value_columns(rows: &[ResultRow]) -> Result<Vec<u8>, String> {
    let mut buf = Vec::new();
    write_csv(&mut buf, rows).map_err(err)?;
    let text = String::from_utf8(buf).map_err(err)?;
    let mut out = Vec::new();
    for line in text.lines() {
        let cut = line.rfind(',').ok_or("malformed csv line")?;
        out.extend_from_slice(&line.as_bytes()[..cut]);
        out.push(b'\n');
    }
    Ok(out)
}

fn c11(o: &SelftestOptions) -> Check {
    let singular = json!({
        "potential": {"form": {"type": "isotropic", "dim": 3, "terms": [{"exponent": -0.5}]}},
        "grids": {"tau": [0.25, 1.0, 4.0], "p": [0.0, 1.0, 2.0]},
        "mc": {"seed": o.seed, "n_paths": 20_000, "n_steps": 256, "chunk_size": 1024},
        "output": {"experiment_id": "criterion-11"}
    })
    .to_string();
    let mut parts = Vec::new();
    let mut ok = true;
    for (name, config) in [("criterion 1", criterion1_config(o.seed)), ("singular variant", singular)] {
        let one = value_columns(&kernel_rows(&config, 1)?)?;
        let four = value_columns(&kernel_rows(&config, 4)?)?;
        let same = one == four;
        ok &= same;
        parts.push(format!("{name}: {} bytes, identical {same}", one.len()));
    }
    Ok(Outcome {
        pass: ok,
        measured: parts.join("; "),
        expected: "byte-identical CSV with 1 and 4 threads".into(),
    })
}

pub fn run_criterion(id: u32, o: &SelftestOptions) -> CriterionResult {
    let start = Instant::now();
    let check = match id {
        1 => c1(o),
        2 => c2(o),
        3 => c3(o),
        4 => c4(o),
        5 => c5(o),
        6 => c6(o),
        7 => c7(o),
        8 => c8(o),
        9 => c9(o),
        10 => c10(o),
        11 => c11(o),
        _ => Err(format!("no criterion {id}")),
    };
    let title = TITLES.get(id.wrapping_sub(1) as usize).copied().unwrap_or("unknown");
    let (pass, measured, expected) = match check {
        Ok(c) => (c.pass, c.measured, c.expected),
        Err(e) => (false, format!("error: {e}"), "no error".into()),
    };
    CriterionResult {
        id,
        title,
        pass,
        measured,
        expected,
        seconds: start.elapsed().as_secs_f64(),
    }
}

/// Runs every criterion, calling `each` as results arrive.
pub fn run_all(o: &SelftestOptions, mut each: impl FnMut(&CriterionResult)) -> Vec<CriterionResult> {
    (1..=TITLES.len() as u32)
        .map(|id| {
            let r = run_criterion(id, o);
            each(&r);
            r
        })
        .collect()
}
