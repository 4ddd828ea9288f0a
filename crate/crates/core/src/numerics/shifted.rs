//! `E|μ + σZ|^q` for a standard normal `Z`, and its average over one segment
//! of a Brownian bridge.

use alloc::vec::Vec;

use super::special::gaussian_abs_moment;
use crate::Result;

/// Beyond `v = |μ| / (σ√2)` the asymptotic expansion is used.
const V_MAX: f64 = 6.0;
const TABLE_STEPS: usize = 1200;

/// 8-point Gauss-Legendre rule on `[0, 1]`.
const GL8: [(f64, f64); 8] = [
    (0.019_855_071_751_231_912, 0.050_614_268_145_188_344),
    (0.101_666_761_293_186_64, 0.111_190_517_226_687_17),
    (0.237_233_795_041_835_5, 0.156_853_322_938_943_52),
    (0.408_282_678_752_175_1, 0.181_341_891_689_180_88),
    (0.591_717_321_247_824_8, 0.181_341_891_689_180_88),
    (0.762_766_204_958_164_5, 0.156_853_322_938_943_52),
    (0.898_333_238_706_813_4, 0.111_190_517_226_687_17),
    (0.980_144_928_248_768_1, 0.050_614_268_145_188_344),
];

/// `e^{-y} M((1+q)/2, 1/2, y)` by its series; all terms are positive.
fn kummer_scaled(q: f64, y: f64) -> f64 {
    let a = 0.5 * (1.0 + q);
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 0.0;
    while k < 2000.0 {
        term *= (a + k) / (0.5 + k) * y / (k + 1.0);
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
        k += 1.0;
    }
    libm::exp(-y) * sum
}

/// Tabulated `E|μ + σZ|^q` for one exponent `q > -1`.
#[derive(Clone, Debug)]
pub(crate) struct ShiftedAbsMoment {
    q: f64,
    abs_moment: f64,
    /// `e^{-v²} M((1+q)/2, 1/2, v²)` on a uniform grid in `v`.
    table: Vec<f64>,
    /// `binom(q, 2k) (2k-1)!!` for `k = 1..=4`.
    asym: [f64; 4],
    /// Per node of the segment rule: `t`, `2u³ w` and `(t(1-t))^{q/2}`.
    nodes: [(f64, f64, f64); 8],
}

impl ShiftedAbsMoment {
    pub(crate) fn new(q: f64) -> Result<Self> {
        let abs_moment = gaussian_abs_moment(q)?;
        let h = V_MAX / TABLE_STEPS as f64;
        let table = (0..=TABLE_STEPS + 2)
            .map(|i| {
                let v = i as f64 * h;
                kummer_scaled(q, v * v)
            })
            .collect();
        let mut asym = [0.0; 4];
        let mut binom = 1.0;
        let mut dfact = 1.0;
        for (k, a) in asym.iter_mut().enumerate() {
            let j = 2 * k as u32;
            binom *= (q - j as f64) * (q - j as f64 - 1.0) / ((j + 1) as f64 * (j + 2) as f64);
            dfact *= (j + 1) as f64;
            *a = binom * dfact;
        }
        let mut nodes = [(0.0, 0.0, 0.0); 8];
        for (n, &(u, w)) in nodes.iter_mut().zip(GL8.iter()) {
            // t = u⁴/2 from each end; the Jacobian 2u³ tames the √t growth of σ.
            let u2 = u * u;
            let t = 0.5 * u2 * u2;
            *n = (t, 2.0 * u2 * u * w, libm::pow(t * (1.0 - t), 0.5 * q));
        }
        Ok(ShiftedAbsMoment {
            q,
            abs_moment,
            table,
            asym,
            nodes,
        })
    }

    pub(crate) fn exponent(&self) -> f64 {
        self.q
    }

    pub(crate) fn eval(&self, mu: f64, sigma: f64) -> f64 {
        if sigma <= 0.0 {
            return libm::pow(mu.abs(), self.q);
        }
        self.eval_scaled(mu, sigma, libm::pow(sigma, self.q))
    }

    /// `eval` with `σ^q` supplied by the caller.
    #[inline]
    fn eval_scaled(&self, mu: f64, sigma: f64, sigma_q: f64) -> f64 {
        let m = mu.abs();
        let v = m / (sigma * core::f64::consts::SQRT_2);
        if v >= V_MAX {
            let r2 = (sigma / m) * (sigma / m);
            let mut s = 1.0;
            let mut rk = 1.0;
            for a in &self.asym {
                rk *= r2;
                s += a * rk;
            }
            return libm::pow(m, self.q) * s;
        }
        // Four-point Lagrange interpolation.
        let h = V_MAX / TABLE_STEPS as f64;
        let x = v / h;
        let i = (x as usize).clamp(1, TABLE_STEPS);
        let t = x - i as f64;
        let (f0, f1, f2, f3) = (self.table[i - 1], self.table[i], self.table[i + 1], self.table[i + 2]);
        let g = f1
            + t * (0.5 * (f2 - f0)
                + t * ((f0 - 2.5 * f1 + 2.0 * f2 - 0.5 * f3) + t * 0.5 * (3.0 * (f1 - f2) + f3 - f0)));
        sigma_q * self.abs_moment * g
    }

    /// `∫₀¹ E|d0 + t(d1 - d0) + sd √(t(1-t)) Z|^q dt`.
    pub(crate) fn bridge_segment_mean(&self, d0: f64, d1: f64, sd: f64) -> f64 {
        if sd <= 0.0 {
            let mut acc = 0.0;
            for &(t, w, _) in &self.nodes {
                acc += w * (self.eval(d0 + t * (d1 - d0), 0.0) + self.eval(d1 + t * (d0 - d1), 0.0));
            }
            return acc;
        }
        let sd_q = libm::pow(sd, self.q);
        let mut acc = 0.0;
        for &(t, w, scale) in &self.nodes {
            let sig = sd * libm::sqrt(t * (1.0 - t));
            let a = self.eval_scaled(d0 + t * (d1 - d0), sig, sd_q * scale);
            let b = self.eval_scaled(d1 + t * (d0 - d1), sig, sd_q * scale);
            acc += w * (a + b);
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::gaussian_expectation_with_breaks;
    use crate::numerics::{Breakpoint, Tolerance};

    fn oracle(q: f64, mu: f64, sigma: f64) -> f64 {
        // E over Z with the break at Z = -μ/σ.
        gaussian_expectation_with_breaks(
            |z| libm::pow((mu + sigma * z).abs(), q),
            &[Breakpoint::new(-mu / sigma, q.min(0.0))],
            &Tolerance::with_rel(1e-12),
        )
        .unwrap()
        .value
    }

    #[test]
    fn matches_direct_quadrature() {
        for q in [-0.5, -0.2, 0.5, 1.0, 2.4] {
            let m = ShiftedAbsMoment::new(q).unwrap();
            for (mu, sigma) in [(0.0, 1.0), (0.3, 1.0), (-2.0, 0.7), (5.0, 0.7), (9.0, 1.0), (40.0, 1.0)] {
                let got = m.eval(mu, sigma);
                let want = oracle(q, mu, sigma);
                assert!(((got - want) / want).abs() < 2e-7, "{q} {mu} {sigma}: {got} {want}");
            }
            assert_eq!(m.eval(2.0, 0.0), libm::pow(2.0, q));
        }
    }

    #[test]
    fn quadratic_moment_is_exact() {
        let m = ShiftedAbsMoment::new(2.0).unwrap();
        for (mu, s) in [(0.0, 1.0), (1.3, 0.4), (20.0, 0.5)] {
            assert!((m.eval(mu, s) - (mu * mu + s * s)).abs() < 1e-9 * (mu * mu + s * s));
        }
        // ∫ (d0 + t(d1-d0))² + sd² t(1-t) dt
        let (d0, d1, sd): (f64, f64, f64) = (0.4, -1.1, 0.3);
        let want = (d0 * d0 + d0 * d1 + d1 * d1) / 3.0 + sd * sd / 6.0;
        assert!((m.bridge_segment_mean(d0, d1, sd) - want).abs() < 1e-9);
    }

    #[test]
    fn segment_mean_from_the_center() {
        // Pinned at 0 on both ends: ∫ (sd²t(1-t))^{q/2} E|Z|^q dt = sd^q E|Z|^q B(1+q/2, 1+q/2).
        let q = -0.5;
        let m = ShiftedAbsMoment::new(q).unwrap();
        let b = libm::tgamma(0.75) * libm::tgamma(0.75) / libm::tgamma(1.5);
        let want = libm::pow(0.2, q) * gaussian_abs_moment(q).unwrap() * b;
        let got = m.bridge_segment_mean(0.0, 0.0, 0.2);
        assert!(((got - want) / want).abs() < 1e-6, "{got} {want}");
    }
}
