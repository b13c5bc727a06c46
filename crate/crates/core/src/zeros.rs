//! Zero statistics: the unintegrated counting function `n(r)`.
//!
//! For one variable `n(r)` is the number of roots in the open disk, computed
//! exactly from [`roots_m1`]. For any `m` it is estimated through the Jensen
//! identity: the difference of sphere averages of `log|psi|` over `[r, kappa r]`
//! divided by `log kappa` lies between `n(r)` and `n(kappa r)` because `n` is
//! nondecreasing.
//!
//! Sphere averages are plain Monte Carlo over the rotation-invariant measure,
//! realized as `r g / |g|` for a standard complex Gaussian vector `g`.

use crate::ensemble::{ComplexPoint, SUPolynomial};
use crate::error::{Error, Result};
use crate::rng::{Domain, RandomStream, StreamKey};
use crate::roots::roots_m1;
use num_complex::Complex64;
use std::sync::OnceLock;

/// Relative radius perturbation used when a root sits on the counting circle.
pub const BOUNDARY_RETRY: f64 = 1e-6;

/// Exact number of roots in `|z| < r` (one variable).
pub fn counting_exact_m1(psi: &SUPolynomial, r: f64) -> Result<usize> {
    if psi.spec().m() != 1 {
        return Err(Error::domain("exact counting requires m = 1"));
    }
    if !(r > 0.0) {
        return Err(Error::domain("radius must be positive"));
    }
    if psi.degree() == 0 {
        if psi.alpha()[0].norm() == 0.0 {
            return Err(Error::DegeneratePolynomial {
                threshold: crate::roots::DEGENERATE_THRESHOLD,
            });
        }
        return Ok(0);
    }
    roots_m1(psi)?.count_inside(r)
}

/// [`counting_exact_m1`], retrying at `r(1 - 1e-6)` then `r(1 + 1e-6)` on boundary ambiguity.
///
/// Returns the count and the radius actually used.
pub fn counting_exact_m1_with_retry(psi: &SUPolynomial, r: f64) -> Result<(usize, f64)> {
    let mut last = None;
    for radius in [r, r * (1.0 - BOUNDARY_RETRY), r * (1.0 + BOUNDARY_RETRY)] {
        match counting_exact_m1(psi, radius) {
            Ok(n) => return Ok((n, radius)),
            Err(e @ Error::BoundaryAmbiguity { .. }) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("loop ran"))
}

/// `N r^2 / (1 + r^2)`, the mean of `n(r)`.
pub fn expected_counting(degree: u32, r: f64) -> f64 {
    let n = degree as f64;
    if r > 1.0 {
        n / (1.0 + (r * r).recip())
    } else {
        n * r * r / (1.0 + r * r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereAverage {
    pub radius: f64,
    pub samples: usize,
    pub mean_log_abs: f64,
    pub stderr: f64,
}

#[derive(Debug, Default, Clone, Copy)]
struct Welford {
    n: usize,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn stderr(&self) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        (self.m2 / (self.n - 1) as f64 / self.n as f64).sqrt()
    }
}

fn unit_direction(stream: &mut RandomStream, m: usize) -> ComplexPoint {
    ComplexPoint::new(stream.sphere_point(m, 1.0))
}

fn check_radius(r: f64) -> Result<()> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(Error::domain("radius must be positive and finite"))
    }
}

/// Monte Carlo estimate of the average of `log|psi|` over the sphere of radius `r`.
pub fn sphere_log_average(psi: &SUPolynomial, r: f64, n_samples: usize, stream: &mut RandomStream) -> Result<SphereAverage> {
    check_radius(r)?;
    if n_samples < 2 {
        return Err(Error::domain("need at least two samples"));
    }
    let m = psi.spec().m();
    let mut acc = Welford::default();
    for _ in 0..n_samples {
        let mut value = psi.log_abs(&unit_direction(stream, m).scaled(r));
        if !value.is_finite() {
            value = psi.log_abs(&unit_direction(stream, m).scaled(r));
            if !value.is_finite() {
                return Err(Error::NonFiniteSample { radius: r });
            }
        }
        acc.push(value);
    }
    Ok(SphereAverage {
        radius: r,
        samples: n_samples,
        mean_log_abs: acc.mean,
        stderr: acc.stderr(),
    })
}

/// Sphere averages at `r` and `kappa r` over common directions, plus the paired difference.
#[derive(Debug, Clone, Copy)]
struct PairedAverages {
    inner: SphereAverage,
    outer: SphereAverage,
    diff_mean: f64,
    diff_stderr: f64,
}

fn paired_sphere_averages(
    psi: &SUPolynomial,
    r: f64,
    kappa: f64,
    n_samples: usize,
    stream: &mut RandomStream,
) -> Result<PairedAverages> {
    let m = psi.spec().m();
    let outer_r = kappa * r;
    let (mut inner, mut outer, mut diff) = (Welford::default(), Welford::default(), Welford::default());
    for _ in 0..n_samples {
        let mut sample = || {
            let u = unit_direction(stream, m);
            (psi.log_abs(&u.scaled(r)), psi.log_abs(&u.scaled(outer_r)))
        };
        let (mut a, mut b) = sample();
        if !(a.is_finite() && b.is_finite()) {
            (a, b) = sample();
            if !a.is_finite() {
                return Err(Error::NonFiniteSample { radius: r });
            }
            if !b.is_finite() {
                return Err(Error::NonFiniteSample { radius: outer_r });
            }
        }
        inner.push(a);
        outer.push(b);
        diff.push(b - a);
    }
    let avg = |w: &Welford, radius| SphereAverage {
        radius,
        samples: n_samples,
        mean_log_abs: w.mean,
        stderr: w.stderr(),
    };
    Ok(PairedAverages {
        inner: avg(&inner, r),
        outer: avg(&outer, outer_r),
        diff_mean: diff.mean,
        diff_stderr: diff.stderr(),
    })
}

/// Jensen-bracketed estimate of `n(r)`.
///
/// `value` estimates `K (L(kappa r) - L(r)) / log kappa`, which lies in
/// `[n(r), n(kappa r)]`. `upper_anchor = value + 3 stat_error` bounds `n(r)` from
/// above and `lower_anchor = value - 3 stat_error` bounds `n(kappa r)` from below.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CountingEstimate {
    pub value: f64,
    pub kappa: f64,
    pub lower_anchor: f64,
    pub upper_anchor: f64,
    pub stat_error: f64,
    pub inner: SphereAverage,
    pub outer: SphereAverage,
}

/// Normalization between sphere averages of `log|psi|` and the counting function.
///
/// Fixed once by the monomial `psi(z) = z`, whose count is 1 at every radius.
pub fn jensen_constant() -> f64 {
    static K: OnceLock<f64> = OnceLock::new();
    *K.get_or_init(|| {
        let psi = SUPolynomial::monomial(1, 1, &crate::MultiIndex::new(vec![1]), Complex64::new(1.0, 0.0))
            .expect("valid monomial");
        let kappa: f64 = 1.05;
        let mut stream = StreamKey::new(0, Domain::Sphere, 0).stream();
        let paired = paired_sphere_averages(&psi, 1.0, kappa, 16, &mut stream).expect("no zeros on the unit circle");
        let k = kappa.ln() / paired.diff_mean;
        assert!(
            (k - 1.0).abs() < 1e-6 || (k - 2.0).abs() < 1e-6,
            "Jensen calibration constant {k} is neither 1 nor 2"
        );
        k
    })
}

pub fn counting_jensen(
    psi: &SUPolynomial,
    r: f64,
    kappa: f64,
    n_samples: usize,
    stream: &mut RandomStream,
) -> Result<CountingEstimate> {
    check_radius(r)?;
    if !(kappa > 1.0 && kappa.is_finite()) {
        return Err(Error::domain("kappa must exceed 1"));
    }
    if n_samples < 2 {
        return Err(Error::domain("need at least two samples"));
    }
    let k = jensen_constant();
    let paired = paired_sphere_averages(psi, r, kappa, n_samples, stream)?;
    let log_kappa = kappa.ln();
    let value = k * paired.diff_mean / log_kappa;
    let stat_error = k * paired.diff_stderr / log_kappa;
    Ok(CountingEstimate {
        value,
        kappa,
        lower_anchor: value - 3.0 * stat_error,
        upper_anchor: value + 3.0 * stat_error,
        stat_error,
        inner: paired.inner,
        outer: paired.outer,
    })
}

/// Poisson kernel of the ball of radius `r` in `C^m` against the normalized sphere measure.
pub fn poisson_kernel(zeta: &ComplexPoint, z: &ComplexPoint, r: f64) -> Result<f64> {
    check_radius(r)?;
    let m = zeta.dim();
    if z.dim() != m {
        return Err(Error::domain("points must share a dimension"));
    }
    if zeta.norm_sq() >= r * r {
        return Err(Error::domain("zeta must lie strictly inside the ball"));
    }
    if (z.norm() - r).abs() > 1e-12 * r {
        return Err(Error::domain("z must lie on the sphere of radius r"));
    }
    let dist_sq: f64 = zeta
        .coords()
        .iter()
        .zip(z.coords())
        .map(|(a, b)| (b - a).norm_sqr())
        .sum();
    let mm = m as i32;
    Ok(r.powi(2 * mm - 2) * (r * r - zeta.norm_sq()) / dist_sq.powi(mm))
}

/// Largest `log|psi|` over `n_samples` uniform points on the sphere of radius `r`.
///
/// By the maximum principle this lower-bounds the maximum over the closed ball.
pub fn max_log_on_ball(psi: &SUPolynomial, r: f64, n_samples: usize, stream: &mut RandomStream) -> Result<f64> {
    check_radius(r)?;
    if n_samples == 0 {
        return Err(Error::domain("need at least one sample"));
    }
    let m = psi.spec().m();
    Ok((0..n_samples)
        .map(|_| psi.log_abs(&unit_direction(stream, m).scaled(r)))
        .fold(f64::NEG_INFINITY, f64::max))
}
