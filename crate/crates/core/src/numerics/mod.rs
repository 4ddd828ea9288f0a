//! Special functions and quadrature shared by every other module.
//!
//! All routines are pure functions of their inputs.

mod gauss_kronrod;
pub(crate) mod quadrature;
pub(crate) mod shifted;
mod special;

pub use gauss_kronrod::adaptive;
pub use quadrature::{
    beta_weight_integral, gaussian_expectation, gaussian_expectation_with_breaks,
    integrate_endpoint_singular, integrate_half_line, integrate_semi_infinite,
    integrate_unit_interval, integrate_with_breakpoints, Breakpoint, Node, SemiInfinite,
    GAUSSIAN_CUTOFF,
};
pub use special::{bessel_k0, bessel_k0_scaled, gamma_fn, gaussian_abs_moment, EULER_GAMMA};

/// Value of a numerical integral together with its error estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureResult {
    pub value: f64,
    pub abs_error_estimate: f64,
    pub evaluations: usize,
}

impl QuadratureResult {
    pub(crate) fn zero() -> Self {
        QuadratureResult {
            value: 0.0,
            abs_error_estimate: 0.0,
            evaluations: 1,
        }
    }

    pub(crate) fn accumulate(&mut self, other: &QuadratureResult) {
        self.value += other.value;
        self.abs_error_estimate += other.abs_error_estimate;
        self.evaluations += other.evaluations;
    }

    /// Relative error estimate, `0` for a vanishing value with zero error.
    pub fn rel_error(&self) -> f64 {
        if self.abs_error_estimate == 0.0 {
            0.0
        } else {
            self.abs_error_estimate / self.value.abs()
        }
    }
}

/// Accuracy target for adaptive quadrature.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
    pub max_subdivisions: usize,
}

impl Default for Tolerance {
    /// Relative 1e-8 for one-dimensional integrals.
    fn default() -> Self {
        Tolerance {
            rel: 1e-8,
            abs: 0.0,
            max_subdivisions: 2000,
        }
    }
}

impl Tolerance {
    /// Tolerance for the outer layer of iterated two-dimensional integrals.
    pub fn iterated() -> Self {
        Tolerance {
            rel: 1e-6,
            ..Tolerance::default()
        }
    }

    pub fn with_rel(rel: f64) -> Self {
        Tolerance {
            rel,
            ..Tolerance::default()
        }
    }

    pub(crate) fn with_abs(self, abs: f64) -> Self {
        Tolerance { abs, ..self }
    }
}
