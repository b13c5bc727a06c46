//! Simulation and verification toolkit for Gaussian random SU(m+1) polynomials.
//!
//! * [`ensemble`]: the ensemble, reproducible sampling, overflow-free evaluation.
//! * [`mobius`]: the invariant norm and the shifted orthonormal basis.
//! * [`roots`] and [`zeros`]: exact root counts (one variable) and the
//!   sphere-average counting estimate (any number of variables).
//! * [`hole`]: hole-probability Monte Carlo, the exact coefficient-box lower
//!   bound and decay-exponent fits.
//! * [`harness`]: the experiment driver behind the `supoly` binary.

pub mod ensemble;
pub mod error;
pub mod lse;
pub mod mobius;
pub mod roots;
pub mod zeros;
pub mod harness;
pub mod hole;
pub mod rng;

pub use ensemble::{
    multinomial_log, sample_polynomial, Basis, ComplexPoint, EnsembleSpec, MultiIndex, Sampler,
    SUPolynomial,
};
pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use rng::{Domain, RandomStream, StreamKey};
