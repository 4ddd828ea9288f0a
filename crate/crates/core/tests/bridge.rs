use fkg_core::bridge::*;
use proptest::prelude::*;

fn paths(n_paths: usize, n_steps: usize, seed: u64) -> Vec<BridgePath> {
    let stream = RngStreamSpec::new(seed, 3);
    let mut s = BridgeSampler::new(stream, n_steps).unwrap();
    (0..n_paths as u64).map(|j| s.sample(stream, j)).collect()
}

#[test]
fn covariance_matches_bridge_kernel() {
    let n_steps = 16;
    let n = 100_000;
    let mut s = BridgeSampler::new(RngStreamSpec::new(11, 0), n_steps).unwrap();
    let mut buf = vec![0.0; n_steps + 1];
    let pairs = [(4, 4), (4, 8), (4, 12), (8, 8), (2, 14), (8, 15)];
    let mut sums = [[0.0f64; 4]; 6];
    for j in 0..n as u64 {
        s.fill(j, &mut buf);
        for (k, &(a, b)) in pairs.iter().enumerate() {
            let (x, y) = (buf[a], buf[b]);
            let xy = x * y;
            sums[k][0] += x;
            sums[k][1] += y;
            sums[k][2] += xy;
            sums[k][3] += xy * xy;
        }
    }
    let nf = n as f64;
    for (k, &(a, b)) in pairs.iter().enumerate() {
        let (sp, sl) = (a as f64 / n_steps as f64, b as f64 / n_steps as f64);
        let want = sp * (1.0 - sl);
        let mxy = sums[k][2] / nf;
        let cov = mxy - sums[k][0] / nf * sums[k][1] / nf;
        let se = ((sums[k][3] / nf - mxy * mxy) / nf).sqrt();
        assert!((cov - want).abs() < 4.0 * se, "s′={sp} s={sl}: {cov} vs {want} (se {se})");
    }
}

#[test]
fn midpoint_is_normal() {
    let n = 10_000;
    let mut xs: Vec<f64> = paths(n, 8, 5).iter().map(|p| p.gamma(0.5) / 0.5).collect();
    xs.sort_by(f64::total_cmp);
    let phi = |x: f64| 0.5 * (1.0 + libm::erf(x / std::f64::consts::SQRT_2));
    let nf = n as f64;
    let d = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = phi(x);
            (f - i as f64 / nf).max((i + 1) as f64 / nf - f)
        })
        .fold(0.0, f64::max);
    // Asymptotic Kolmogorov critical value at the 1% level.
    assert!(d * nf.sqrt() < 1.628, "D = {d}");
}

#[test]
fn dirichlet_acceptance_examples() {
    let ps = paths(10_000, 256, 1);
    let far = dirichlet_filter(&ps, 3.0, 3.0, 0.1).unwrap();
    let want = 1.0 - (-2.0 * 9.0 / 0.1f64).exp();
    assert!((far.acceptance - want).abs() <= 3.0 * far.std_error.max(1.0 / 10_000.0));
    let near = dirichlet_filter(&ps, 0.01, 0.01, 10.0).unwrap();
    assert!(near.acceptance < 0.05, "{}", near.acceptance);
}

#[test]
fn dirichlet_acceptance_matches_reflection_oracle() {
    // Grid minima miss crossings between grid points. The continuity
    // correction moves the barrier by 0.5826 √(τ/n).
    let n_steps = 256;
    let ps = paths(20_000, n_steps, 2);
    for (eta, tau) in [(0.5f64, 1.0f64), (1.0, 1.0), (0.3, 0.2)] {
        let r = dirichlet_filter(&ps, eta, eta, tau).unwrap();
        let exact = 1.0 - (-2.0 * eta * eta / tau).exp();
        let shifted = eta + 0.5826 * (tau / n_steps as f64).sqrt();
        let corrected = 1.0 - (-2.0 * shifted * shifted / tau).exp();
        assert!(r.acceptance > exact, "{eta} {tau}");
        assert!((r.acceptance - corrected).abs() < 4.0 * r.std_error + 0.005, "{eta} {tau}: {} vs {corrected}", r.acceptance);
    }
}

#[test]
fn refining_the_grid_lowers_acceptance_toward_the_oracle() {
    let (eta, tau) = (0.5f64, 1.0f64);
    let exact = 1.0 - (-2.0 * eta * eta / tau).exp();
    let mut last = f64::INFINITY;
    for n_steps in [64, 256, 1024] {
        let r = dirichlet_filter(&paths(5_000, n_steps, 8), eta, eta, tau).unwrap();
        // Finer paths refine the coarser ones, so survivors can only drop out.
        assert!(r.acceptance <= last);
        assert!(r.acceptance > exact - 3.0 * r.std_error);
        last = r.acceptance;
    }
}

#[test]
fn dirichlet_acceptance_decreases_with_tau() {
    let ps = paths(5_000, 64, 4);
    let mut last = 1.0;
    for tau in [0.05, 0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0] {
        let r = dirichlet_filter(&ps, 0.4, 0.4, tau).unwrap();
        assert!(r.acceptance <= last + 3.0 * r.std_error, "{tau}");
        last = r.acceptance;
    }
}

#[test]
fn dirichlet_rejects_nonpositive_endpoints() {
    let ps = paths(4, 8, 0);
    assert!(dirichlet_filter(&ps, 0.0, 1.0, 1.0).is_err());
    assert!(dirichlet_filter(&ps, 1.0, 1.0, 0.0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn identical_streams_give_identical_paths(seed in any::<u64>(), stream in 0u64..1 << 40, j in 0u64..1 << 20, k in 1u32..9) {
        let spec = RngStreamSpec::new(seed, stream);
        let a = sample_bridge_at(1 << k, spec, j).unwrap();
        let b = sample_bridge_at(1 << k, spec, j).unwrap();
        prop_assert_eq!(a.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>(), b.values.iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        prop_assert_eq!(a.values[0], 0.0);
        prop_assert_eq!(a.values[1 << k], 0.0);
    }

    #[test]
    fn path_position_hits_endpoints(eta in -5.0f64..5.0, eta_p in -5.0f64..5.0, tau in 0.01f64..10.0) {
        let p = sample_bridge(16, RngStreamSpec::new(9, 9)).unwrap();
        prop_assert_eq!(path_position(&p, eta, eta_p, tau, 0.0), eta);
        prop_assert_eq!(path_position(&p, eta, eta_p, tau, 1.0), eta_p);
    }
}
