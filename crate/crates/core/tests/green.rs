use fkg_core::exec::Sequential;
use fkg_core::green::*;
use fkg_core::kernel::McSettings;
use fkg_core::linalg::SymMatrix;
use fkg_core::numerics::Tolerance;
use fkg_core::potentials::*;
use fkg_core::Error;

fn iso(dim: usize, e: f64) -> MomentumForm {
    MomentumForm::isotropic(dim, PowerLawTerm::pure(e).unwrap()).unwrap()
}

fn small_mc() -> GreenSettings {
    GreenSettings {
        tau_points: 24,
        mc: McSettings {
            n_paths: 2000,
            n_steps: 64,
            seed: 4,
            ..McSettings::default()
        },
        ..GreenSettings::default()
    }
}

#[test]
fn constant_potentials_give_the_free_form() {
    // V + W = A p² + B  ⇒  G̃(0, 0; p) = (2Ap² + 2B)^{-1/2}.
    let (a, b) = (0.5, 0.3);
    let form = MomentumForm::constant(2, a).unwrap();
    let w = ScalarPotential::new(vec![PowerLawTerm::constant(b).unwrap()]);
    let s = small_mc();
    for pn in [0.5, 2.0] {
        let p = [pn, 0.0];
        let want = (2.0 * a * pn * pn + 2.0 * b).powf(-0.5);
        for m in [GreenMethod::FreeField, GreenMethod::Lower, GreenMethod::Upper, GreenMethod::Mc] {
            let g = green_momentum(&Sequential, 0.0, 0.0, &p, &form, &w, m, &s).unwrap();
            let budget = 3.0 * g.error + 1e-6 * want;
            assert!((g.value - want).abs() <= budget, "{m:?} {pn}: {} {want}", g.value);
        }
    }
}

#[test]
fn green_functions_decrease_with_momentum() {
    let form = iso(1, -0.5);
    let w = ScalarPotential::zero();
    let s = GreenSettings::default();
    for m in [GreenMethod::Lower, GreenMethod::Upper] {
        let mut last = f64::INFINITY;
        for p in [0.5, 1.0, 2.0, 4.0, 8.0, 16.0] {
            let g = green_momentum(&Sequential, 0.0, 0.0, &[p], &form, &w, m, &s).unwrap();
            assert!(g.value < last, "{m:?} {p}");
            last = g.value;
        }
    }
}

#[test]
fn slopes_bracket_the_anomalous_exponent() {
    let nu = 0.5;
    let form = iso(1, 2.0 * nu);
    let w = ScalarPotential::zero();
    let s = GreenSettings::default();
    let ps = log_grid(4.0, 64.0, 8);
    let want = -2.0 * omega(nu).unwrap();
    for (m, tol) in [(GreenMethod::Lower, 0.02), (GreenMethod::Upper, 0.05)] {
        let samples: Vec<(f64, f64, f64)> = ps
            .iter()
            .map(|&p| {
                let g = green_momentum(&Sequential, 0.0, 0.0, &[p], &form, &w, m, &s).unwrap();
                (p, g.value, g.error)
            })
            .collect();
        let fit = fit_scaling_exponent(&samples).unwrap();
        assert!(((fit.exponent - want) / want).abs() < tol, "{m:?}: {}", fit.exponent);
    }
}

#[test]
fn sandwich_holds_with_w() {
    let rows = sandwich_check(
        &Sequential,
        &[2.0, 4.0],
        &iso(1, -0.5),
        &ScalarPotential::power_law(1.0, 1.0).unwrap(),
        0.0,
        0.0,
        1.0,
        &small_mc(),
    )
    .unwrap();
    for r in rows {
        assert!(r.lower.value < r.upper.value);
        assert!(r.pass(), "{r:?}");
    }
}

#[test]
fn composite_green_lies_between_its_brackets() {
    let form = MomentumForm::composite(
        iso(1, -0.5),
        Modulation::Sinusoid {
            mean: 1.0,
            amplitude: 0.5,
            frequency: 4.0,
            phase: 0.3,
        },
        SymMatrix::scalar(1, 0.2),
    )
    .unwrap();
    let rows = sandwich_check(&Sequential, &[2.0, 4.0], &form, &ScalarPotential::zero(), 0.0, 0.0, 1.0, &small_mc()).unwrap();
    for r in rows {
        assert!(r.lower.value < r.upper.value);
        assert!(r.pass(), "{r:?}");
    }
}

#[test]
fn cutoff_is_enforced_for_composite_and_w() {
    let w = ScalarPotential::power_law(1.0, 1.0).unwrap();
    let r = sandwich_check(&Sequential, &[0.5, 2.0], &iso(1, -0.5), &w, 0.0, 0.0, 1.0, &small_mc());
    assert!(matches!(r, Err(Error::Domain(_))));
}

#[test]
fn zero_momentum_without_w_diverges() {
    let form = iso(1, -0.5);
    let w = ScalarPotential::zero();
    let r = green_momentum(&Sequential, 0.0, 0.0, &[0.0], &form, &w, GreenMethod::Lower, &GreenSettings::default());
    assert!(matches!(r, Err(Error::Divergent(_))));
    assert!(matches!(zero_momentum_finiteness(&w, &Tolerance::default()), Err(Error::Divergent(_))));
    let ok = zero_momentum_finiteness(&ScalarPotential::power_law(1.0, 1.0).unwrap(), &Tolerance::default()).unwrap();
    assert!(ok.value.is_finite() && ok.value > 0.0);
}

#[test]
fn closed_form_constants_bound_the_numerics() {
    let nu = -0.25;
    let form = iso(1, 2.0 * nu);
    let w = ScalarPotential::zero();
    let s = GreenSettings::default();
    let h = fkg_core::bounds::h_form(&form).unwrap();
    for p in [2.0, 8.0] {
        let lo = green_momentum(&Sequential, 0.0, 0.0, &[p], &form, &w, GreenMethod::Lower, &s).unwrap();
        let closed = closed_lower_green(nu, &h, &[p]).unwrap();
        assert!(((lo.value - closed) / closed).abs() < 1e-6);
        let up = green_momentum(&Sequential, 0.0, 0.0, &[p], &form, &w, GreenMethod::Upper, &s).unwrap();
        let k2 = effective_upper_constant(&form).unwrap() * p.powf(-2.0 * omega(nu).unwrap());
        assert!(((up.value - k2) / k2).abs() < 1e-6);
    }
}
