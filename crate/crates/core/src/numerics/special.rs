use core::f64::consts::PI;

use crate::{Error, Result};

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_860_606_512_090_082_402_43;

/// Γ(x) for x > 0.
pub fn gamma_fn(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::domain("gamma_fn needs a finite positive argument"));
    }
    Ok(libm::tgamma(x))
}

/// E|Y|^q for a standard normal Y, q > -1.
pub fn gaussian_abs_moment(q: f64) -> Result<f64> {
    if !(q > -1.0) {
        return Err(Error::divergent("E|Y|^q diverges for q <= -1"));
    }
    Ok(libm::pow(2.0, 0.5 * q) * gamma_fn(0.5 * (q + 1.0))? / libm::sqrt(PI))
}

/// Modified Bessel function of the second kind of order zero.
///
/// Underflows to `0` for arguments beyond ~745.
pub fn bessel_k0(x: f64) -> Result<f64> {
    check_positive(x)?;
    if x < 2.0 {
        Ok(k0_series(x))
    } else {
        Ok(k0_scaled_cf2(x) * libm::exp(-x))
    }
}

/// `e^x K₀(x)`, finite for every positive argument.
pub fn bessel_k0_scaled(x: f64) -> Result<f64> {
    check_positive(x)?;
    if x < 2.0 {
        Ok(k0_series(x) * libm::exp(x))
    } else {
        Ok(k0_scaled_cf2(x))
    }
}

fn check_positive(x: f64) -> Result<()> {
    if x > 0.0 && !x.is_nan() {
        Ok(())
    } else {
        Err(Error::domain("bessel_k0 needs x > 0"))
    }
}

/// K₀ for 0 < x < 2 from the ascending series
/// `-(ln(x/2) + γ) I₀(x) + Σ (x²/4)^k / (k!)² H_k`.
pub(crate) fn k0_series(x: f64) -> f64 {
    let y = 0.25 * x * x;
    let mut term = 1.0;
    let mut harmonic = 0.0;
    let mut i0 = 1.0;
    let mut tail = 0.0;
    for k in 1..60 {
        let kf = k as f64;
        term *= y / (kf * kf);
        harmonic += 1.0 / kf;
        i0 += term;
        tail += term * harmonic;
        if term < 1e-18 * i0 {
            break;
        }
    }
    -(libm::log(0.5 * x) + EULER_GAMMA) * i0 + tail
}

/// `e^x K₀(x)` for x ≥ 2 from Steed's continued fraction (Temme's CF2).
pub(crate) fn k0_scaled_cf2(x: f64) -> f64 {
    const MAX_ITER: usize = 10_000;
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut delh = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let a1 = 0.25;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 2..MAX_ITER {
        let fi = i as f64;
        a -= 2.0 * (fi - 1.0);
        c = -a * c / fi;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh = (b * d - 1.0) * delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < 1e-16 {
            break;
        }
    }
    libm::sqrt(PI / (2.0 * x)) / s
}
