use fkg_core::appendix::*;
use fkg_core::bounds::upper_bound_kernel;
use fkg_core::numerics::Tolerance;
use fkg_core::potentials::*;
use proptest::prelude::*;

fn iso(dim: usize, e: f64) -> MomentumForm {
    MomentumForm::isotropic(dim, PowerLawTerm::pure(e).unwrap()).unwrap()
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

/// `∫₀^∞ P̃^U dτ` by Simpson's rule in `ln τ`.
fn tau_integral(eta: f64, eta_p: f64, p: f64, form: &MomentumForm) -> f64 {
    let tol = Tolerance::with_rel(1e-9);
    let w = ScalarPotential::zero();
    let (a, b, n) = (-25.0f64, 8.0f64, 400usize);
    let h = (b - a) / n as f64;
    let f = |s: f64| {
        let tau = s.exp();
        tau * upper_bound_kernel(eta, eta_p, tau, &[p], form, &w, &tol).unwrap().value
    };
    let mut acc = f(a) + f(b);
    for i in 1..n {
        acc += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}

#[test]
fn bessel_route_matches_time_integral() {
    let form = iso(1, 0.5);
    let tol = Tolerance::with_rel(1e-9);
    let eta_p = 0.3;
    for eta in [-0.5, 0.1, 0.8] {
        for p in [0.7, 1.0, 2.0] {
            let b = gu_momentum_bessel(eta, eta_p, &[p], &form, &tol).unwrap().value;
            let t = tau_integral(eta, eta_p, p, &form);
            assert!(rel(b, t) < 1e-4, "η = {eta}, p = {p}: {b} {t}");
        }
    }
}

#[test]
fn equal_point_route_matches_time_integral() {
    let form = iso(1, 0.5);
    let tol = Tolerance::with_rel(1e-9);
    for eta in [0.0, 0.4] {
        let b = gu_momentum_bessel_equal(eta, &[1.0], &form, &tol).unwrap().value;
        let t = tau_integral(eta, eta, 1.0, &form);
        assert!(rel(b, t) < 1e-4, "η = {eta}: {b} {t}");
    }
}

#[test]
fn momentum_green_is_symmetric() {
    let form = iso(1, -0.4);
    let tol = Tolerance::with_rel(1e-9);
    for (a, b) in [(0.2, 0.9), (-0.6, 0.35), (-1.0, -0.1)] {
        let g1 = gu_momentum_bessel(a, b, &[1.5], &form, &tol).unwrap().value;
        let g2 = gu_momentum_bessel(b, a, &[1.5], &form, &tol).unwrap().value;
        assert!(rel(g1, g2) < 1e-7, "{a} {b}: {g1} {g2}");
    }
}

#[test]
fn momentum_green_decays_away_from_the_source() {
    let form = iso(1, 0.5);
    let tol = Tolerance::with_rel(1e-8);
    let mut last = f64::INFINITY;
    for d in [0.1, 0.3, 0.6, 1.2, 2.4] {
        let g = gu_momentum_bessel(0.5, 0.5 + d, &[1.0], &form, &tol).unwrap().value;
        assert!(g > 0.0 && g < last, "{d}: {g}");
        last = g;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    #[test]
    fn constant_half_form_is_the_free_green_function(
        d in 2usize..=3,
        eta in -1.0f64..1.0,
        eta_p in -1.0f64..1.0,
        x in proptest::collection::vec(-1.0f64..1.0, 3),
        xp in proptest::collection::vec(-1.0f64..1.0, 3),
    ) {
        let form = MomentumForm::constant(d, 0.5).unwrap();
        let r2: f64 = (eta - eta_p).powi(2)
            + (0..d).map(|i| (x[i] - xp[i]).powi(2)).sum::<f64>();
        prop_assume!(r2 > 0.05);
        let tol = Tolerance::with_rel(1e-7);
        let g = gu_position(eta, &x[..d], eta_p, &xp[..d], &form, &tol).unwrap();
        let want = free_position_green(d, r2.sqrt()).unwrap();
        prop_assert!(rel(g.value, want) < 1e-3, "{} {}", g.value, want);
    }
}

#[test]
fn position_green_is_symmetric_and_positive() {
    let form = iso(3, 0.5);
    let tol = Tolerance::with_rel(1e-7);
    let (x, xp) = ([0.1, -0.2, 0.3], [0.5, 0.0, -0.1]);
    let g1 = gu_position(0.2, &x, 0.7, &xp, &form, &tol).unwrap().value;
    let g2 = gu_position(0.7, &xp, 0.2, &x, &form, &tol).unwrap().value;
    assert!(g1 > 0.0);
    assert!(rel(g1, g2) < 1e-6, "{g1} {g2}");
}

#[test]
fn position_green_decays_with_distance() {
    let form = iso(3, 0.5);
    let tol = Tolerance::with_rel(1e-7);
    let mut last = f64::INFINITY;
    for r in [0.25, 0.5, 1.0, 2.0, 4.0] {
        let g = gu_position(0.3, &[0.0; 3], 0.3, &[r, 0.0, 0.0], &form, &tol).unwrap().value;
        assert!(g > 0.0 && g < last, "{r}: {g}");
        last = g;
    }
}

#[test]
fn position_needs_two_dimensions_and_decay() {
    let tol = Tolerance::default();
    assert!(gu_position(0.0, &[0.0], 1.0, &[1.0], &iso(1, 0.5), &tol).is_err());
    // ρ = -0.7 does not exceed -1 + 1/3.
    assert!(gu_position(0.0, &[0.0; 3], 1.0, &[1.0, 0.0, 0.0], &iso(3, -1.4), &tol).is_err());
}
