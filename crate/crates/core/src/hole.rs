//! Hole events: no zeros in the open ball `B(0, r)`.
//!
//! * [`hole_probability_mc`] counts holes among sampled one-variable polynomials.
//! * [`omega_lower_bound`] evaluates, in closed form, the probability of the
//!   coefficient box `|alpha_0| >= 1`, `|alpha_j| < lambda_j` with
//!   `lambda_j = multinomial(N; j)^(-1/2) N^(-m) r^(-|j|)`. Inside the box the
//!   constant term dominates every other term on the ball, so the box is
//!   contained in the hole event and its probability is a certified lower bound.
//! * [`fit_decay_exponent`] regresses `log(-log p)` on `log N`.

use crate::ensemble::{fmt17, multinomial_log, EnsembleSpec, MultiIndex, Sampler, SUPolynomial};
use crate::error::{Error, Result};
use crate::rng::{Domain, StreamKey};
use crate::zeros::{counting_exact_m1, counting_exact_m1_with_retry, expected_counting, BOUNDARY_RETRY};
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::TAU;

fn require_m1(spec: &EnsembleSpec) -> Result<()> {
    if spec.m() == 1 {
        Ok(())
    } else {
        Err(Error::domain("exact hole detection is only available for m = 1"))
    }
}

fn require_radius(r: f64) -> Result<()> {
    if r > 0.0 && r.is_finite() {
        Ok(())
    } else {
        Err(Error::domain("radius must be positive and finite"))
    }
}

/// True iff `psi` has no root in the open disk `|z| < r`.
///
/// A root within tolerance of the circle triggers one retry at `r (1 - 1e-6)`.
pub fn hole_indicator_m1(psi: &SUPolynomial, r: f64) -> Result<bool> {
    require_m1(psi.spec())?;
    require_radius(r)?;
    match counting_exact_m1(psi, r) {
        Ok(n) => Ok(n == 0),
        Err(Error::BoundaryAmbiguity { .. }) => Ok(counting_exact_m1(psi, r * (1.0 - BOUNDARY_RETRY))? == 0),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HoleEstimate {
    pub spec: EnsembleSpec,
    pub radius: f64,
    pub trials: u64,
    pub hits: u64,
    pub p_hat: f64,
    pub stderr: f64,
}

impl HoleEstimate {
    fn new(spec: EnsembleSpec, radius: f64, trials: u64, hits: u64) -> Self {
        let p_hat = hits as f64 / trials as f64;
        HoleEstimate {
            spec,
            radius,
            trials,
            hits,
            p_hat,
            stderr: (p_hat * (1.0 - p_hat) / trials as f64).sqrt(),
        }
    }
}

/// Sums a per-trial count over `0..trials` on the ambient rayon pool.
///
/// The result, including which error is reported, does not depend on the schedule:
/// the failing trial with the smallest index wins.
pub(crate) fn parallel_count<F>(trials: u64, f: F) -> Result<u64>
where
    F: Fn(u64) -> Result<u64> + Sync + Send,
{
    let (total, err) = (0..trials)
        .into_par_iter()
        .map(|t| match f(t) {
            Ok(v) => (v, None),
            Err(e) => (0, Some((t, e))),
        })
        .reduce(
            || (0u64, None),
            |(a, ea), (b, eb)| {
                let err = match (ea, eb) {
                    (Some(x), Some(y)) => Some(if x.0 <= y.0 { x } else { y }),
                    (x, None) => x,
                    (None, y) => y,
                };
                (a + b, err)
            },
        );
    match err {
        Some((_, e)) => Err(e),
        None => Ok(total),
    }
}

/// Monte Carlo hole frequency; trial `t` uses coefficient stream `(seed, t)`.
pub fn hole_probability_mc(spec: EnsembleSpec, r: f64, trials: u64) -> Result<HoleEstimate> {
    require_m1(&spec)?;
    require_radius(r)?;
    if trials == 0 {
        return Err(Error::domain("need at least one trial"));
    }
    let sampler = Sampler::new(spec);
    let hits = parallel_count(trials, |t| Ok(hole_indicator_m1(&sampler.sample(t), r)? as u64))?;
    Ok(HoleEstimate::new(spec, r, trials, hits))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OmegaBound {
    pub spec: EnsembleSpec,
    pub radius: f64,
    /// Natural log of the probability of the coefficient box.
    pub log_prob: f64,
    pub term_count: u64,
}

impl OmegaBound {
    /// One-line certificate `m N r log_prob`.
    pub fn certificate(&self) -> String {
        format!(
            "{} {} {} {}",
            self.spec.m(),
            self.spec.degree(),
            fmt17(self.radius),
            fmt17(self.log_prob)
        )
    }
}

/// `log(1 - exp(-lambda^2))` from `log lambda`, accurate for tiny and huge `lambda`.
pub fn log_prob_inside_disk(log_lambda: f64) -> f64 {
    let x = (2.0 * log_lambda).exp();
    if x < 1e-8 {
        2.0 * log_lambda - 0.5 * x
    } else {
        (-(-x).exp_m1()).ln()
    }
}

/// Log of the cap `lambda_j = multinomial(N; j)^(-1/2) N^(-m) r^(-|j|)`.
pub fn omega_log_cap(spec: &EnsembleSpec, r: f64, j: &MultiIndex) -> Result<f64> {
    let n = spec.degree() as f64;
    Ok(-0.5 * multinomial_log(spec.degree(), j)? - spec.m() as f64 * n.ln() - j.degree_total() as f64 * r.ln())
}

/// Visits `log lambda_j` for every `j` with `0 < |j| <= N` without materializing the indices.
fn for_each_log_cap(m: usize, degree: u32, r: f64, mut f: impl FnMut(f64)) {
    let ln_fact = |k: u32| libm::lgamma(k as f64 + 1.0);
    let base = ln_fact(degree);
    let ln_n = (degree as f64).ln();
    let ln_r = r.ln();
    // depth-first over entries; `acc` carries sum of ln(j_k!) so far
    fn walk(
        pos: usize,
        m: usize,
        remaining: u32,
        used: u32,
        acc: f64,
        ctx: &dyn Fn(u32, f64) -> Option<f64>,
        f: &mut dyn FnMut(f64),
    ) {
        if pos == m {
            if let Some(v) = ctx(used, acc) {
                f(v);
            }
            return;
        }
        for v in 0..=remaining {
            walk(
                pos + 1,
                m,
                remaining - v,
                used + v,
                acc + libm::lgamma(v as f64 + 1.0),
                ctx,
                f,
            );
        }
    }
    let ctx = |used: u32, acc: f64| {
        if used == 0 {
            return None;
        }
        let ml = base - acc - ln_fact(degree - used);
        Some(-0.5 * ml - m as f64 * ln_n - used as f64 * ln_r)
    };
    walk(0, m, degree, 0, 0.0, &ctx, &mut f);
}

/// Exact log-probability of the coefficient box contained in the hole event.
pub fn omega_lower_bound(spec: EnsembleSpec, r: f64) -> Result<OmegaBound> {
    require_radius(r)?;
    if spec.degree() == 0 {
        return Err(Error::domain("the coefficient box needs N >= 1"));
    }
    // Neumaier summation: up to millions of terms of mixed magnitude
    let mut sum = -1.0f64; // log P(|alpha_0| >= 1)
    let mut comp = 0.0f64;
    let mut count = 0u64;
    for_each_log_cap(spec.m(), spec.degree(), r, |log_cap| {
        let x = log_prob_inside_disk(log_cap);
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
        count += 1;
    });
    Ok(OmegaBound {
        spec,
        radius: r,
        log_prob: sum + comp,
        term_count: count,
    })
}

/// Draws coefficients conditioned on the coefficient box (one variable) for trial `t`.
pub fn sample_omega_conditioned(spec: EnsembleSpec, r: f64, trial: u64) -> Result<SUPolynomial> {
    require_m1(&spec)?;
    let mut stream = StreamKey::new(spec.seed(), Domain::OmegaConditioned, trial).stream();
    let n = spec.degree();
    let mut alpha = Vec::with_capacity(n as usize + 1);
    // |alpha_0|^2 given |alpha_0| >= 1 is 1 + Exp(1)
    let s0 = 1.0 - stream.uniform_open_zero().ln();
    alpha.push(Complex64::from_polar(s0.sqrt(), TAU * stream.uniform()));
    for j in 1..=n {
        let cap = omega_log_cap(&spec, r, &MultiIndex::new(vec![j]))?;
        // |alpha_j|^2 is Exp(1) truncated to [0, lambda^2): inverse CDF
        let mass = -(-(2.0 * cap).exp()).exp_m1();
        let u = stream.uniform();
        let s = -(-u * mass).ln_1p();
        alpha.push(Complex64::from_polar(s.sqrt(), TAU * stream.uniform()));
    }
    SUPolynomial::from_coefficients(spec, alpha)
}

/// Fraction of box-conditioned samples that are holes. Containment means this is always 1.
pub fn sanity_check_omega(spec: EnsembleSpec, r: f64, trials: u64) -> Result<f64> {
    require_m1(&spec)?;
    require_radius(r)?;
    if trials == 0 {
        return Err(Error::domain("need at least one trial"));
    }
    let holes = parallel_count(trials, |t| {
        let psi = sample_omega_conditioned(spec, r, t)?;
        Ok(hole_indicator_m1(&psi, r)? as u64)
    })?;
    Ok(holes as f64 / trials as f64)
}

/// One `(N, p)` observation, stored as `log p` so exact bounds far below `f64::MIN_POSITIVE` fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayPoint {
    pub degree: f64,
    pub log_p: f64,
}

impl DecayPoint {
    pub fn from_probability(degree: f64, p: f64) -> Self {
        DecayPoint { degree, log_p: p.ln() }
    }

    pub fn from_log_probability(degree: f64, log_p: f64) -> Self {
        DecayPoint { degree, log_p }
    }

    /// True iff `p` is strictly inside `(0, 1)`.
    pub fn is_fittable(&self) -> bool {
        self.log_p < 0.0 && self.log_p > f64::NEG_INFINITY && self.degree > 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayFit {
    /// `(N, log(-log p))` pairs that entered the fit.
    pub points: Vec<(f64, f64)>,
    pub beta: f64,
    pub log_c: f64,
    pub residual_rms: f64,
}

/// Least squares of `log(-log p)` against `log N`.
pub fn fit_decay_exponent(points: &[DecayPoint]) -> Result<DecayFit> {
    if let Some(bad) = points.iter().find(|p| !p.is_fittable()) {
        return Err(Error::domain(format!(
            "point N = {} has p = exp({}) outside (0, 1)",
            bad.degree, bad.log_p
        )));
    }
    if points.len() < 3 {
        return Err(Error::domain("need at least three points"));
    }
    let xy: Vec<(f64, f64)> = points.iter().map(|p| (p.degree.ln(), (-p.log_p).ln())).collect();
    let n = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::domain("all points share the same N"));
    }
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let beta = sxy / sxx;
    let log_c = my - beta * mx;
    let rss: f64 = xy.iter().map(|p| (p.1 - log_c - beta * p.0).powi(2)).sum();
    Ok(DecayFit {
        points: points.iter().map(|p| p.degree).zip(xy.iter().map(|q| q.1)).collect(),
        beta,
        log_c,
        residual_rms: (rss / n).sqrt(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeviationResult {
    pub trials: u64,
    pub violations: u64,
    pub frequency: f64,
}

/// Fraction of trials with `|n(r) - N r^2/(1+r^2)| > Delta N` (one variable, exact counts).
pub fn deviation_experiment(spec: EnsembleSpec, r: f64, delta: f64, trials: u64) -> Result<DeviationResult> {
    require_m1(&spec)?;
    require_radius(r)?;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::domain("Delta must lie in (0, 1)"));
    }
    if trials == 0 {
        return Err(Error::domain("need at least one trial"));
    }
    let sampler = Sampler::new(spec);
    let mean = expected_counting(spec.degree(), r);
    let window = delta * spec.degree() as f64;
    let violations = parallel_count(trials, |t| {
        let psi = sampler.sample(t);
        let n = if spec.degree() == 0 {
            0
        } else {
            counting_exact_m1_with_retry(&psi, r)?.0
        };
        Ok(((n as f64 - mean).abs() > window) as u64)
    })?;
    Ok(DeviationResult {
        trials,
        violations,
        frequency: violations as f64 / trials as f64,
    })
}
