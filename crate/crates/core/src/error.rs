use thiserror::Error;

/// Errors raised by the toolkit's numerical operations.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument fell outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Every coefficient is numerically zero; the polynomial has no finite root set.
    #[error("degenerate polynomial: all coefficients below {threshold:e} in magnitude")]
    DegeneratePolynomial { threshold: f64 },

    /// A polished root lies within tolerance of the counting circle.
    #[error("boundary ambiguity: root with |z| = {modulus} lies within {tolerance:e} of radius {radius}")]
    BoundaryAmbiguity {
        radius: f64,
        modulus: f64,
        tolerance: f64,
    },

    /// A sphere sample hit an exact zero of the polynomial twice in a row.
    #[error("non-finite log|psi| on sphere of radius {radius} (exact zero hit)")]
    NonFiniteSample { radius: f64 },

    /// Root finding or polishing did not reach the requested accuracy.
    #[error("root finding failed: {0}")]
    RootFinding(String),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for failures of the numerics rather than of the caller's input.
    pub fn is_numeric(&self) -> bool {
        !matches!(self, Error::Domain(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
