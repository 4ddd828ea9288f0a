use fkg_core::exec::Sequential;
use fkg_core::green::{green_momentum, zero_momentum_finiteness, GreenMethod, GreenSettings};
use fkg_core::kernel::{fk_kernel_momentum, McSettings};
use fkg_core::numerics::Tolerance;
use fkg_core::oracle::*;
use fkg_core::potentials::*;
use proptest::prelude::*;

fn iso(e: f64) -> MomentumForm {
    MomentumForm::isotropic(1, PowerLawTerm::pure(e).unwrap()).unwrap()
}

#[test]
fn lattice_kernel_agrees_with_monte_carlo() {
    let form = iso(-0.5);
    let w = ScalarPotential::zero();
    let u = form.project(&[1.0]);
    let mc = McSettings {
        n_paths: 20_000,
        seed: 11,
        ..McSettings::default()
    };
    for (eta, eta_p) in [(0.48, 0.48), (0.0, 1.0), (-0.32, 0.8)] {
        let lat = kernel_with_estimate(LatticeGrid::default(), &u, 1.0, eta, eta_p).unwrap();
        let m = fk_kernel_momentum(&Sequential, eta, eta_p, 1.0, &[1.0], &form, &w, &mc).unwrap();
        let budget = 4.0 * m.std_error + lat.discretization_error;
        assert!((lat.value - m.mean).abs() <= budget, "({eta}, {eta_p}): {} {} ± {budget}", lat.value, m.mean);
    }
}

#[test]
fn lattice_green_sits_between_the_bounds() {
    let w = ScalarPotential::zero();
    let s = GreenSettings::default();
    for e in [-0.5, 1.0] {
        let form = iso(e);
        let u = form.project(&[2.0]);
        for (eta, eta_p) in [(0.0, 0.0), (0.32, 0.92)] {
            let lat = green_with_estimate(LatticeGrid::default(), &u, eta, eta_p).unwrap();
            let lo = green_momentum(&Sequential, eta, eta_p, &[2.0], &form, &w, GreenMethod::Lower, &s).unwrap();
            let hi = green_momentum(&Sequential, eta, eta_p, &[2.0], &form, &w, GreenMethod::Upper, &s).unwrap();
            let slack = lat.discretization_error;
            assert!(lo.value - lo.error <= lat.value + slack, "{e} ({eta}, {eta_p}): {} {}", lo.value, lat.value);
            assert!(lat.value - slack <= hi.value + hi.error, "{e} ({eta}, {eta_p}): {} {}", lat.value, hi.value);
        }
    }
}

#[test]
fn confining_w_alone_is_bounded_at_zero_momentum() {
    let w = ScalarPotential::new(vec![PowerLawTerm::pure(1.0).unwrap()]);
    let lat = green_with_estimate(LatticeGrid::default(), &w.line(), 0.0, 0.0).unwrap();
    let up = zero_momentum_finiteness(&w, &Tolerance::default()).unwrap();
    assert!(up.value.is_finite() && up.value > 0.0);
    assert!(lat.value <= up.value + lat.discretization_error, "{} {}", lat.value, up.value);
    // Jensen from below: at η = η′ = 0, G̃^L = ∫dτ (2πτ)^{-1/2} exp(-τ J),
    // with J = E|σZ| averaged over the bridge.
    let form = MomentumForm::constant(1, 0.0).unwrap();
    let lo = green_momentum(&Sequential, 0.0, 0.0, &[1.0], &form, &w, GreenMethod::Lower, &GreenSettings::default())
        .unwrap();
    assert!(lo.value <= lat.value + lat.discretization_error, "{} {}", lo.value, lat.value);
}

#[test]
fn lattice_kernel_is_a_semigroup() {
    let grid = LatticeGrid::new(-10.0, 10.0, 801).unwrap();
    let u = iso(0.5).project(&[1.5]);
    let op = LatticeOperator::from_potential(grid, &u).unwrap();
    let h = grid.spacing();
    let a = lattice_kernel_row(&op, 0.4, 0.5).unwrap();
    let b = lattice_kernel_row(&op, 0.6, -0.25).unwrap();
    let composed: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>() * h;
    let direct = lattice_kernel(&op, 1.0, 0.5, -0.25).unwrap();
    assert!(((composed - direct) / direct).abs() < 1e-9, "{composed} {direct}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn lattice_kernel_is_symmetric_and_positive(
        e in -0.8f64..2.0,
        amp in 0.1f64..3.0,
        tau in 0.05f64..2.0,
        i in 320usize..480,
        j in 320usize..480,
    ) {
        let u = LinePotential::from_terms(vec![PowerLawTerm::new(amp, e, 0.0).unwrap()]);
        let grid = LatticeGrid::new(-10.0, 10.0, 801).unwrap();
        let op = LatticeOperator::from_potential(grid, &u).unwrap();
        let (eta, eta_p) = (grid.site(i), grid.site(j));
        let k1 = lattice_kernel(&op, tau, eta, eta_p).unwrap();
        let k2 = lattice_kernel(&op, tau, eta_p, eta).unwrap();
        prop_assert!(k1 > 0.0);
        prop_assert!(((k1 - k2) / k1).abs() < 1e-9, "{} {}", k1, k2);
    }
}
