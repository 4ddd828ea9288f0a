use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// An argument is outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// An integral (or the quantity defined by it) is infinite.
    #[error("divergent integral: {0}")]
    Divergent(String),

    /// Adaptive refinement ran out of budget before meeting the tolerance.
    #[error("accuracy not reached: {what} (error estimate {estimate:e}, target {target:e})")]
    Accuracy {
        what: &'static str,
        estimate: f64,
        target: f64,
    },

    /// Pointwise evaluation exactly at a negative-exponent singular center.
    #[error("evaluation at singular center {center}")]
    Singular { center: f64 },

    /// A Monte Carlo path produced a NaN or infinite contribution.
    #[error("non-finite potential on path segment {segment} (s = {s}): {value}")]
    NonFinitePath { segment: usize, s: f64, value: f64 },

    /// A quadrature integrand returned NaN or infinity.
    #[error("non-finite integrand at x = {x}")]
    NonFiniteIntegrand { x: f64 },

    /// The requested configuration is outside what the library supports.
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A discretized operator could not be inverted.
    #[error("degenerate operator: {0}")]
    Degenerate(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn divergent(msg: impl Into<String>) -> Self {
        Error::Divergent(msg.into())
    }

    /// True for errors that come from the numerics rather than the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Divergent(_)
                | Error::Accuracy { .. }
                | Error::NonFinitePath { .. }
                | Error::NonFiniteIntegrand { .. }
                | Error::Degenerate(_)
        )
    }
}
