//! Adaptive 7/15-point Gauss-Kronrod quadrature on finite intervals.

use alloc::vec::Vec;

use super::{QuadratureResult, Tolerance};
use crate::{Error, Result};

// Kronrod abscissae (positive half) and weights; the even-indexed entries
// are the 7-point Gauss abscissae.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Clone, Copy, Debug)]
pub(crate) struct Rule {
    pub value: f64,
    pub error: f64,
}

/// One 15-point Kronrod evaluation with the QUADPACK error heuristic.
pub(crate) fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Result<Rule> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let eval = |f: &mut F, x: f64| -> Result<f64> {
        let y = f(x);
        if y.is_finite() {
            Ok(y)
        } else {
            Err(Error::NonFiniteIntegrand { x })
        }
    };

    let fc = eval(f, center)?;
    let mut res_k = fc * WGK[7];
    let mut res_g = fc * WG[3];
    let mut res_abs = fc.abs() * WGK[7];
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = eval(f, center - dx)?;
        let f2 = eval(f, center + dx)?;
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }

    let value = res_k * half;
    let res_abs = res_abs * half.abs();
    let res_asc = res_asc * half.abs();
    let mut err = ((res_k - res_g) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * libm::pow(200.0 * err / res_asc, 1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * res_abs);
    }
    Ok(Rule {
        value,
        error: err,
    })
}

struct Segment {
    a: f64,
    b: f64,
    rule: Rule,
    splittable: bool,
}

/// Globally adaptive bisection: always split the segment with the largest
/// error estimate until the summed estimate meets the tolerance.
pub fn adaptive<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    tol: &Tolerance,
) -> Result<QuadratureResult> {
    if a == b {
        return Ok(QuadratureResult::zero());
    }
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::domain("adaptive quadrature needs finite limits"));
    }
    let first = gk15(&mut f, a, b)?;
    let mut segments: Vec<Segment> = Vec::with_capacity(64);
    segments.push(Segment {
        a,
        b,
        rule: first,
        splittable: true,
    });
    let mut evaluations = 15usize;

    loop {
        let (value, error) = segments
            .iter()
            .fold((0.0, 0.0), |(v, e), s| (v + s.rule.value, e + s.rule.error));
        let target = tol.abs.max(tol.rel * value.abs());
        if error <= target {
            return Ok(QuadratureResult {
                value,
                abs_error_estimate: error,
                evaluations,
            });
        }
        if segments.len() >= tol.max_subdivisions {
            return Err(Error::Accuracy {
                what: "adaptive Gauss-Kronrod subdivision limit",
                estimate: error,
                target,
            });
        }
        let worst = segments
            .iter()
            .enumerate()
            .filter(|(_, s)| s.splittable)
            .max_by(|x, y| x.1.rule.error.total_cmp(&y.1.rule.error))
            .map(|(i, _)| i);
        let Some(worst) = worst else {
            // Nothing left to bisect: the remaining error is roundoff.
            return Ok(QuadratureResult {
                value,
                abs_error_estimate: error,
                evaluations,
            });
        };
        let seg = segments.swap_remove(worst);
        let mid = 0.5 * (seg.a + seg.b);
        let width = seg.b - seg.a;
        let scale = seg.a.abs().max(seg.b.abs()).max(f64::MIN_POSITIVE);
        if width.abs() <= 1e3 * f64::EPSILON * scale {
            segments.push(Segment {
                splittable: false,
                ..seg
            });
            continue;
        }
        let left = gk15(&mut f, seg.a, mid)?;
        let right = gk15(&mut f, mid, seg.b)?;
        evaluations += 30;
        segments.push(Segment {
            a: seg.a,
            b: mid,
            rule: left,
            splittable: true,
        });
        segments.push(Segment {
            a: mid,
            b: seg.b,
            rule: right,
            splittable: true,
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let r = adaptive(|x| 3.0 * x * x, 0.0, 2.0, &Tolerance::default()).unwrap();
        assert!((r.value - 8.0).abs() < 1e-14);
        assert_eq!(r.evaluations, 15);
    }

    #[test]
    fn oscillatory_integrand_refines() {
        let r = adaptive(libm::cos, 0.0, 40.0, &Tolerance::default()).unwrap();
        assert!((r.value - libm::sin(40.0)).abs() < 1e-9);
        assert!(r.evaluations > 15);
    }

    #[test]
    fn non_finite_integrand_is_reported() {
        let err = adaptive(|x| 1.0 / (x - 0.5), 0.0, 1.0, &Tolerance::default());
        assert!(matches!(err, Err(Error::NonFiniteIntegrand { .. })));
    }

    #[test]
    fn budget_exhaustion_is_an_accuracy_error() {
        let tol = Tolerance {
            max_subdivisions: 3,
            ..Tolerance::default()
        };
        let err = adaptive(|x| libm::sqrt(x), 0.0, 1.0, &tol);
        assert!(matches!(err, Err(Error::Accuracy { .. })));
    }
}
