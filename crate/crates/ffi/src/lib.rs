//! C ABI for the `supoly` toolkit.
//!
//! Polynomials are opaque handles created by `supoly_polynomial_sample` or
//! `supoly_polynomial_from_coefficients` and released with
//! `supoly_polynomial_free`. Every fallible call returns a [`SupolyStatus`];
//! on failure `supoly_last_error_message` describes what went wrong on the
//! calling thread. Panics never cross the boundary.
//!
//! # Safety
//!
//! Pointer arguments must be valid for the lengths passed alongside them.
//! Handles must not be used after they are freed.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use supoly::hole::{fit_decay_exponent, hole_probability_mc, omega_lower_bound, DecayPoint};
use supoly::roots::roots_m1;
use supoly::zeros::{counting_exact_m1, counting_jensen};
use supoly::{Complex64, ComplexPoint, Domain, EnsembleSpec, Sampler, StreamKey, SUPolynomial};

/// Result codes shared by every function in this interface.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SupolyStatus {
    Ok = 0,
    NullPointer = 1,
    /// An argument lies outside the domain of the operation.
    DomainError = 2,
    /// Degenerate polynomial, boundary ambiguity or failed root finding.
    NumericError = 3,
    /// An output buffer is too small.
    BufferTooSmall = 4,
    Panic = 5,
}

/// Opaque polynomial handle.
pub struct SupolyPolynomial {
    inner: SUPolynomial,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SupolyHoleEstimate {
    pub trials: u64,
    pub hits: u64,
    pub p_hat: f64,
    /// Binomial standard error of `p_hat`.
    pub std_error: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SupolyCountingEstimate {
    pub value: f64,
    pub stat_error: f64,
    pub lower_anchor: f64,
    pub upper_anchor: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SupolyDecayFit {
    pub beta: f64,
    pub log_c: f64,
    pub residual_rms: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Failure(SupolyStatus, String);

impl From<supoly::Error> for Failure {
    fn from(e: supoly::Error) -> Self {
        let status = if e.is_numeric() {
            SupolyStatus::NumericError
        } else {
            SupolyStatus::DomainError
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(SupolyStatus::NullPointer, format!("{what} is null"))
}

fn domain(msg: impl Into<String>) -> Failure {
    Failure(SupolyStatus::DomainError, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SupolyStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last_error("");
            SupolyStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(_) => {
            set_last_error("internal panic");
            SupolyStatus::Panic
        }
    }
}

unsafe fn handle<'a>(p: *const SupolyPolynomial) -> Result<&'a SUPolynomial, Failure> {
    p.as_ref().map(|h| &h.inner).ok_or_else(|| null("polynomial handle"))
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn point(re: *const f64, im: *const f64, dim: usize) -> Result<ComplexPoint, Failure> {
    if re.is_null() || im.is_null() {
        return Err(null("point coordinates"));
    }
    let re = std::slice::from_raw_parts(re, dim);
    let im = std::slice::from_raw_parts(im, dim);
    Ok(ComplexPoint::new(re.iter().zip(im).map(|(&a, &b)| Complex64::new(a, b)).collect()))
}

fn check_dim(psi: &SUPolynomial, dim: usize) -> Result<(), Failure> {
    if dim == psi.spec().m() {
        Ok(())
    } else {
        Err(domain(format!("point has {dim} coordinates, polynomial has m = {}", psi.spec().m())))
    }
}

fn boxed(inner: SUPolynomial) -> *mut SupolyPolynomial {
    Box::into_raw(Box::new(SupolyPolynomial { inner }))
}

/// Message for the last failed call on this thread; empty after a success. Owned by the library.
#[no_mangle]
pub extern "C" fn supoly_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn supoly_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Samples trial `trial` of the `(m, degree, seed)` ensemble.
#[no_mangle]
pub unsafe extern "C" fn supoly_polynomial_sample(
    m: usize,
    degree: u32,
    seed: u64,
    trial: u64,
    out: *mut *mut SupolyPolynomial,
) -> SupolyStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let spec = EnsembleSpec::new(m, degree, seed)?;
        *out = boxed(Sampler::new(spec).sample(trial));
        Ok(())
    })
}

/// Builds a polynomial from Gaussian coordinates in graded lexicographic order.
#[no_mangle]
pub unsafe extern "C" fn supoly_polynomial_from_coefficients(
    m: usize,
    degree: u32,
    re: *const f64,
    im: *const f64,
    len: usize,
    out: *mut *mut SupolyPolynomial,
) -> SupolyStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        if re.is_null() || im.is_null() {
            return Err(null("coefficients"));
        }
        let spec = EnsembleSpec::new(m, degree, 0)?;
        let re = std::slice::from_raw_parts(re, len);
        let im = std::slice::from_raw_parts(im, len);
        let alpha = re.iter().zip(im).map(|(&a, &b)| Complex64::new(a, b)).collect();
        *out = boxed(SUPolynomial::from_coefficients(spec, alpha)?);
        Ok(())
    })
}

/// Releases a handle; null is ignored.
#[no_mangle]
pub unsafe extern "C" fn supoly_polynomial_free(p: *mut SupolyPolynomial) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Number of coefficients, `binomial(N+m, m)`; 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn supoly_polynomial_coefficient_count(p: *const SupolyPolynomial) -> usize {
    p.as_ref().map_or(0, |h| h.inner.alpha().len())
}

/// Copies the Gaussian coordinates into `re`/`im`, each of length `capacity`.
#[no_mangle]
pub unsafe extern "C" fn supoly_polynomial_coefficients(
    p: *const SupolyPolynomial,
    re: *mut f64,
    im: *mut f64,
    capacity: usize,
) -> SupolyStatus {
    guard(|| {
        let alpha = handle(p)?.alpha();
        if re.is_null() || im.is_null() {
            return Err(null("output buffers"));
        }
        if capacity < alpha.len() {
            return Err(Failure(
                SupolyStatus::BufferTooSmall,
                format!("need {} slots, got {capacity}", alpha.len()),
            ));
        }
        for (k, a) in alpha.iter().enumerate() {
            *re.add(k) = a.re;
            *im.add(k) = a.im;
        }
        Ok(())
    })
}

/// `psi(z) / (1+|z|^2)^(N/2)` at the `dim`-coordinate point `z`.
#[no_mangle]
pub unsafe extern "C" fn supoly_polynomial_evaluate_normalized(
    p: *const SupolyPolynomial,
    z_re: *const f64,
    z_im: *const f64,
    dim: usize,
    out_re: *mut f64,
    out_im: *mut f64,
) -> SupolyStatus {
    guard(|| {
        let psi = handle(p)?;
        check_dim(psi, dim)?;
        let v = psi.evaluate_normalized(&point(z_re, z_im, dim)?);
        *out_ref(out_re, "out_re")? = v.re;
        *out_ref(out_im, "out_im")? = v.im;
        Ok(())
    })
}

/// `log|psi(z)|`, `-inf` at an exact zero.
#[no_mangle]
pub unsafe extern "C" fn supoly_polynomial_log_abs(
    p: *const SupolyPolynomial,
    z_re: *const f64,
    z_im: *const f64,
    dim: usize,
    out: *mut f64,
) -> SupolyStatus {
    guard(|| {
        let psi = handle(p)?;
        check_dim(psi, dim)?;
        *out_ref(out, "out")? = psi.log_abs(&point(z_re, z_im, dim)?);
        Ok(())
    })
}

/// Roots of a one-variable polynomial. `count` always receives the number of finite roots.
#[no_mangle]
pub unsafe extern "C" fn supoly_polynomial_roots(
    p: *const SupolyPolynomial,
    re: *mut f64,
    im: *mut f64,
    capacity: usize,
    count: *mut usize,
) -> SupolyStatus {
    guard(|| {
        let psi = handle(p)?;
        let count = out_ref(count, "count")?;
        let roots = roots_m1(psi)?;
        *count = roots.len();
        if capacity < roots.len() {
            return Err(Failure(
                SupolyStatus::BufferTooSmall,
                format!("need {} slots, got {capacity}", roots.len()),
            ));
        }
        if roots.is_empty() {
            return Ok(());
        }
        if re.is_null() || im.is_null() {
            return Err(null("output buffers"));
        }
        for (k, z) in roots.roots.iter().enumerate() {
            *re.add(k) = z.re;
            *im.add(k) = z.im;
        }
        Ok(())
    })
}

/// Exact number of roots in the open disk `|z| < r` (one variable).
#[no_mangle]
pub unsafe extern "C" fn supoly_counting_exact(p: *const SupolyPolynomial, r: f64, out: *mut usize) -> SupolyStatus {
    guard(|| {
        let psi = handle(p)?;
        let out = out_ref(out, "out")?;
        *out = counting_exact_m1(psi, r)?;
        Ok(())
    })
}

/// Sphere-average count of zeros in `B(0, r)`; sphere points come from stream `(seed, trial)`.
#[no_mangle]
pub unsafe extern "C" fn supoly_counting_jensen(
    p: *const SupolyPolynomial,
    r: f64,
    kappa: f64,
    samples: usize,
    seed: u64,
    trial: u64,
    out: *mut SupolyCountingEstimate,
) -> SupolyStatus {
    guard(|| {
        let psi = handle(p)?;
        let out = out_ref(out, "out")?;
        let mut stream = StreamKey::new(seed, Domain::Sphere, trial).stream();
        let e = counting_jensen(psi, r, kappa, samples, &mut stream)?;
        *out = SupolyCountingEstimate {
            value: e.value,
            stat_error: e.stat_error,
            lower_anchor: e.lower_anchor,
            upper_anchor: e.upper_anchor,
        };
        Ok(())
    })
}

/// Monte Carlo hole frequency for the one-variable ensemble.
#[no_mangle]
pub unsafe extern "C" fn supoly_hole_probability_mc(
    degree: u32,
    seed: u64,
    r: f64,
    trials: u64,
    out: *mut SupolyHoleEstimate,
) -> SupolyStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let e = hole_probability_mc(EnsembleSpec::new(1, degree, seed)?, r, trials)?;
        *out = SupolyHoleEstimate { trials: e.trials, hits: e.hits, p_hat: e.p_hat, std_error: e.stderr };
        Ok(())
    })
}

/// Natural log of the exact coefficient-box probability, a lower bound on the hole probability.
#[no_mangle]
pub unsafe extern "C" fn supoly_omega_log_prob(m: usize, degree: u32, r: f64, out: *mut f64) -> SupolyStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = omega_lower_bound(EnsembleSpec::new(m, degree, 0)?, r)?.log_prob;
        Ok(())
    })
}

/// Least-squares fit of `log(-log p)` on `log N` from `len` pairs `(degrees[k], log_p[k])`.
#[no_mangle]
pub unsafe extern "C" fn supoly_fit_decay_exponent(
    degrees: *const f64,
    log_p: *const f64,
    len: usize,
    out: *mut SupolyDecayFit,
) -> SupolyStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        if degrees.is_null() || log_p.is_null() {
            return Err(null("points"));
        }
        let n = std::slice::from_raw_parts(degrees, len);
        let lp = std::slice::from_raw_parts(log_p, len);
        let points: Vec<DecayPoint> = n.iter().zip(lp).map(|(&d, &l)| DecayPoint::from_log_probability(d, l)).collect();
        let fit = fit_decay_exponent(&points)?;
        *out = SupolyDecayFit { beta: fit.beta, log_c: fit.log_c, residual_rms: fit.residual_rms };
        Ok(())
    })
}
