use std::ffi::CStr;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use supoly_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(supoly_last_error_message()) }.to_string_lossy().into_owned()
}

fn sample(m: usize, degree: u32, seed: u64, trial: u64) -> *mut SupolyPolynomial {
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { supoly_polynomial_sample(m, degree, seed, trial, &mut p) }, SupolyStatus::Ok);
    assert!(!p.is_null());
    p
}

#[test]
fn sample_matches_library_and_frees() {
    let p = sample(2, 3, 9, 4);
    let n = unsafe { supoly_polynomial_coefficient_count(p) };
    assert_eq!(n, 10);
    let (mut re, mut im) = (vec![0.0; n], vec![0.0; n]);
    assert_eq!(unsafe { supoly_polynomial_coefficients(p, re.as_mut_ptr(), im.as_mut_ptr(), n) }, SupolyStatus::Ok);
    let direct = supoly::Sampler::new(supoly::EnsembleSpec::new(2, 3, 9).unwrap()).sample(4);
    for (k, a) in direct.alpha().iter().enumerate() {
        assert_eq!((re[k], im[k]), (a.re, a.im));
    }
    assert_eq!(
        unsafe { supoly_polynomial_coefficients(p, re.as_mut_ptr(), im.as_mut_ptr(), n - 1) },
        SupolyStatus::BufferTooSmall
    );
    unsafe { supoly_polynomial_free(p) };
    unsafe { supoly_polynomial_free(ptr::null_mut()) };
}

#[test]
fn evaluation_through_handle() {
    // psi(z) = z: normalized value z / sqrt(1+|z|^2), log|psi| = log|z|
    let (re, im) = ([0.0, 1.0], [0.0, 0.0]);
    let mut p = ptr::null_mut();
    assert_eq!(
        unsafe { supoly_polynomial_from_coefficients(1, 1, re.as_ptr(), im.as_ptr(), 2, &mut p) },
        SupolyStatus::Ok
    );
    let (zr, zi) = ([3.0], [4.0]);
    let (mut vr, mut vi) = (0.0, 0.0);
    assert_eq!(
        unsafe { supoly_polynomial_evaluate_normalized(p, zr.as_ptr(), zi.as_ptr(), 1, &mut vr, &mut vi) },
        SupolyStatus::Ok
    );
    let s = 26f64.sqrt();
    assert!((vr - 3.0 / s).abs() < 1e-14 && (vi - 4.0 / s).abs() < 1e-14);
    let mut l = 0.0;
    assert_eq!(unsafe { supoly_polynomial_log_abs(p, zr.as_ptr(), zi.as_ptr(), 1, &mut l) }, SupolyStatus::Ok);
    assert!((l - 5f64.ln()).abs() < 1e-14);
    assert_eq!(
        unsafe { supoly_polynomial_log_abs(p, zr.as_ptr(), zi.as_ptr(), 2, &mut l) },
        SupolyStatus::DomainError
    );
    assert!(last_error().contains("coordinates"));
    unsafe { supoly_polynomial_free(p) };
}

#[test]
fn roots_and_counts() {
    let p = sample(1, 12, 3, 0);
    let mut count = 0usize;
    let (mut re, mut im) = (vec![0.0; 12], vec![0.0; 12]);
    assert_eq!(
        unsafe { supoly_polynomial_roots(p, re.as_mut_ptr(), im.as_mut_ptr(), 4, &mut count) },
        SupolyStatus::BufferTooSmall
    );
    assert_eq!(count, 12);
    assert_eq!(
        unsafe { supoly_polynomial_roots(p, re.as_mut_ptr(), im.as_mut_ptr(), 12, &mut count) },
        SupolyStatus::Ok
    );
    let inside = re.iter().zip(&im).filter(|(a, b)| a.hypot(**b) < 1.0).count();
    let mut n = 0usize;
    assert_eq!(unsafe { supoly_counting_exact(p, 1.0, &mut n) }, SupolyStatus::Ok);
    assert_eq!(n, inside);

    let mut est = SupolyCountingEstimate::default();
    assert_eq!(unsafe { supoly_counting_jensen(p, 1.0, 1.05, 20_000, 1, 0, &mut est) }, SupolyStatus::Ok);
    assert!(est.stat_error > 0.0 && est.lower_anchor < est.value && est.value < est.upper_anchor);
    assert_eq!(
        unsafe { supoly_counting_jensen(p, 1.0, 0.9, 100, 1, 0, &mut est) },
        SupolyStatus::DomainError
    );
    unsafe { supoly_polynomial_free(p) };
}

#[test]
fn degenerate_polynomial_is_numeric_error() {
    let (re, im) = ([0.0; 3], [0.0; 3]);
    let mut p = ptr::null_mut();
    assert_eq!(
        unsafe { supoly_polynomial_from_coefficients(1, 2, re.as_ptr(), im.as_ptr(), 3, &mut p) },
        SupolyStatus::Ok
    );
    let mut count = 0usize;
    assert_eq!(
        unsafe { supoly_polynomial_roots(p, ptr::null_mut(), ptr::null_mut(), 0, &mut count) },
        SupolyStatus::NumericError
    );
    assert!(last_error().contains("degenerate"));
    unsafe { supoly_polynomial_free(p) };
}

#[test]
fn null_arguments_are_reported() {
    let mut n = 0usize;
    assert_eq!(unsafe { supoly_counting_exact(ptr::null(), 1.0, &mut n) }, SupolyStatus::NullPointer);
    assert_eq!(unsafe { supoly_polynomial_sample(1, 2, 0, 0, ptr::null_mut()) }, SupolyStatus::NullPointer);
    assert_eq!(unsafe { supoly_polynomial_coefficient_count(ptr::null()) }, 0);
    let mut p = ptr::null_mut();
    assert_eq!(unsafe { supoly_polynomial_sample(0, 2, 0, 0, &mut p) }, SupolyStatus::DomainError);
    assert!(p.is_null());
}

#[test]
fn hole_omega_and_fit() {
    let mut h = SupolyHoleEstimate::default();
    assert_eq!(unsafe { supoly_hole_probability_mc(1, 7, 1.0, 20_000, &mut h) }, SupolyStatus::Ok);
    assert_eq!(h.trials, 20_000);
    assert!((h.p_hat - 0.5).abs() < 3.0 * h.std_error);

    let mut lp = 0.0;
    assert_eq!(unsafe { supoly_omega_log_prob(1, 1, 1.0, &mut lp) }, SupolyStatus::Ok);
    assert!((lp - (-1.0 + (1.0 - (-1.0f64).exp()).ln())).abs() < 1e-14);
    assert_eq!(unsafe { supoly_omega_log_prob(1, 0, 1.0, &mut lp) }, SupolyStatus::DomainError);

    let degrees = [5.0, 10.0, 20.0, 40.0];
    let log_p: Vec<f64> = degrees.iter().map(|n: &f64| -0.1 * n * n).collect();
    let mut fit = SupolyDecayFit::default();
    assert_eq!(
        unsafe { supoly_fit_decay_exponent(degrees.as_ptr(), log_p.as_ptr(), 4, &mut fit) },
        SupolyStatus::Ok
    );
    assert!((fit.beta - 2.0).abs() < 1e-9);
    assert_eq!(
        unsafe { supoly_fit_decay_exponent(degrees.as_ptr(), log_p.as_ptr(), 2, &mut fit) },
        SupolyStatus::DomainError
    );
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(supoly_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

fn header() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include").join("supoly.h")
}

const C_PROGRAM: &str = r#"
#include <stdio.h>
#include <math.h>
#include "supoly.h"

int main(void) {
    SupolyPolynomial *p = NULL;
    if (supoly_polynomial_sample(1, 8, 5, 0, &p) != SUPOLY_STATUS_OK) return 1;
    double re[8], im[8];
    size_t count = 0;
    if (supoly_polynomial_roots(p, re, im, 8, &count) != SUPOLY_STATUS_OK || count != 8) return 2;
    size_t inside = 0;
    if (supoly_counting_exact(p, 1.0, &inside) != SUPOLY_STATUS_OK) return 3;
    double zr = 0.5, zi = -0.25, l = 0.0;
    if (supoly_polynomial_log_abs(p, &zr, &zi, 1, &l) != SUPOLY_STATUS_OK || !isfinite(l)) return 4;
    supoly_polynomial_free(p);
    if (supoly_counting_exact(NULL, 1.0, &inside) != SUPOLY_STATUS_NULL_POINTER) return 5;
    printf("%s\n", supoly_last_error_message());
    return 0;
}
"#;

#[test]
fn header_is_generated_and_compiles() {
    let h = std::fs::read_to_string(header()).expect("header generated by build script");
    for name in [
        "supoly_polynomial_sample",
        "supoly_polynomial_free",
        "supoly_polynomial_roots",
        "supoly_hole_probability_mc",
        "supoly_fit_decay_exponent",
        "SUPOLY_STATUS_NUMERIC_ERROR",
    ] {
        assert!(h.contains(name), "{name} missing from header");
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("check.c");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let status = Command::new("cc")
        .arg("-fsyntax-only")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(header().parent().unwrap())
        .arg(&src)
        .status()
        .expect("a C compiler is available");
    assert!(status.success());
}

#[test]
fn c_program_links_against_static_library() {
    // the test binary lives in target/<profile>/deps; the static library one level up
    let exe = std::env::current_exe().unwrap();
    let lib = exe.parent().unwrap().parent().unwrap().join("libsupoly_ffi.a");
    assert!(lib.exists(), "static library not found at {}", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    let bin = dir.path().join("main");
    std::fs::write(&src, C_PROGRAM).unwrap();
    let status = Command::new("cc")
        .arg("-I")
        .arg(header().parent().unwrap())
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .expect("a C compiler is available");
    assert!(status.success());
    let out = Command::new(&bin).output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("null"));
}
