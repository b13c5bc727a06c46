//! The SU(m+1) polynomial ensemble.
//!
//! A degree-`N` polynomial in `m` complex variables is stored by its Gaussian
//! coordinates `alpha_j` in the orthonormal basis `sqrt(multinomial(N; j)) z^j`.
//! Multi-indices are enumerated in graded lexicographic order: by total degree,
//! then lexicographically by entries.
//!
//! Evaluation is projectively normalized: we compute `psi(z) / (1+|z|^2)^(N/2)`
//! by summing terms in log-magnitude/phase form, so degrees in the thousands
//! evaluate without overflow.

use crate::error::{Error, Result};
use crate::lse::ScaledSum;
use crate::rng::{Domain, RandomStream, StreamKey};
use num_complex::Complex64;
use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::Arc;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex {
    entries: Vec<u32>,
}

impl MultiIndex {
    pub fn new(entries: Vec<u32>) -> Self {
        MultiIndex { entries }
    }

    pub fn zero(m: usize) -> Self {
        MultiIndex {
            entries: vec![0; m],
        }
    }

    pub fn entries(&self) -> &[u32] {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    /// `|j| = sum of entries`.
    pub fn degree_total(&self) -> u32 {
        self.entries.iter().sum()
    }
}

impl From<Vec<u32>> for MultiIndex {
    fn from(v: Vec<u32>) -> Self {
        MultiIndex::new(v)
    }
}

/// Experiment identity: number of variables, degree and master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EnsembleSpec {
    m: usize,
    degree: u32,
    seed: u64,
}

impl EnsembleSpec {
    pub fn new(m: usize, degree: u32, seed: u64) -> Result<Self> {
        if m == 0 {
            return Err(Error::domain("m must be at least 1"));
        }
        let spec = EnsembleSpec { m, degree, seed };
        spec.try_coefficient_count()?;
        Ok(spec)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    /// The degree `N`.
    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn with_seed(self, seed: u64) -> Self {
        EnsembleSpec { seed, ..self }
    }

    fn try_coefficient_count(&self) -> Result<usize> {
        binomial(self.degree as u64 + self.m as u64, self.m as u64)
            .and_then(|c| usize::try_from(c).ok())
            .ok_or_else(|| Error::domain("coefficient count overflows usize"))
    }

    /// `binomial(N + m, m)`.
    pub fn coefficient_count(&self) -> usize {
        self.try_coefficient_count()
            .expect("validated at construction")
    }
}

/// Exact `binomial(n, k)`, or `None` on overflow.
pub fn binomial(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

fn ln_factorial(n: u32) -> f64 {
    libm::lgamma(n as f64 + 1.0)
}

/// `log(N! / (j_1! ... j_m! (N-|j|)!))` via log-gamma.
pub fn multinomial_log(degree: u32, j: &MultiIndex) -> Result<f64> {
    let total = j.entries.iter().map(|&x| x as u64).sum::<u64>();
    if total > degree as u64 {
        return Err(Error::domain(format!(
            "multi-index degree {total} exceeds N = {degree}"
        )));
    }
    let rest = degree - total as u32;
    Ok(ln_factorial(degree)
        - j.entries.iter().map(|&x| ln_factorial(x)).sum::<f64>()
        - ln_factorial(rest))
}

/// All multi-indices of length `m` with `|j| <= N`, graded lexicographic order.
pub fn enumerate_multi_indices(m: usize, degree: u32) -> Vec<MultiIndex> {
    let mut out = Vec::new();
    let mut current = vec![0u32; m];
    for total in 0..=degree {
        fill_level(&mut current, 0, total, &mut out);
    }
    out
}

fn fill_level(current: &mut [u32], pos: usize, remaining: u32, out: &mut Vec<MultiIndex>) {
    if pos + 1 == current.len() {
        current[pos] = remaining;
        out.push(MultiIndex::new(current.to_vec()));
        return;
    }
    for v in 0..=remaining {
        current[pos] = v;
        fill_level(current, pos + 1, remaining - v, out);
    }
    current[pos] = 0;
}

/// Monomial basis for a fixed `(m, N)`: indices, half log-weights and a position lookup.
#[derive(Debug, Clone)]
pub struct Basis {
    m: usize,
    degree: u32,
    indices: Vec<MultiIndex>,
    half_log_weights: Vec<f64>,
    position: HashMap<MultiIndex, usize>,
}

impl Basis {
    pub fn new(m: usize, degree: u32) -> Result<Self> {
        EnsembleSpec::new(m, degree, 0)?;
        let indices = enumerate_multi_indices(m, degree);
        let half_log_weights = indices
            .iter()
            .map(|j| 0.5 * multinomial_log(degree, j).expect("enumerated |j| <= N"))
            .collect();
        let position = indices
            .iter()
            .enumerate()
            .map(|(i, j)| (j.clone(), i))
            .collect();
        Ok(Basis {
            m,
            degree,
            indices,
            half_log_weights,
            position,
        })
    }

    pub fn for_spec(spec: &EnsembleSpec) -> Self {
        Basis::new(spec.m, spec.degree).expect("spec is validated")
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.indices
    }

    /// `0.5 * multinomial_log(N, j)` for the `k`-th index.
    pub fn half_log_weight(&self, k: usize) -> f64 {
        self.half_log_weights[k]
    }

    pub fn position(&self, j: &MultiIndex) -> Option<usize> {
        self.position.get(j).copied()
    }
}

/// A point of `C^m`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexPoint {
    coords: Vec<Complex64>,
    norm_sq: f64,
}

impl ComplexPoint {
    pub fn new(coords: Vec<Complex64>) -> Self {
        let norm_sq = coords.iter().map(|c| c.norm_sqr()).sum();
        ComplexPoint { coords, norm_sq }
    }

    pub fn scalar(z: Complex64) -> Self {
        ComplexPoint::new(vec![z])
    }

    pub fn origin(m: usize) -> Self {
        ComplexPoint::new(vec![Complex64::new(0.0, 0.0); m])
    }

    pub fn coords(&self) -> &[Complex64] {
        &self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    /// `|z|^2`.
    pub fn norm_sq(&self) -> f64 {
        self.norm_sq
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq.sqrt()
    }

    pub fn scaled(&self, factor: f64) -> ComplexPoint {
        ComplexPoint::new(self.coords.iter().map(|c| c * factor).collect())
    }
}

/// A sampled (or explicitly constructed) member of the ensemble.
#[derive(Debug, Clone)]
pub struct SUPolynomial {
    spec: EnsembleSpec,
    basis: Arc<Basis>,
    alpha: Vec<Complex64>,
    // ln|alpha_j| + half log weight, and alpha_j/|alpha_j|
    log_coeff: Vec<f64>,
    phase: Vec<Complex64>,
}

impl SUPolynomial {
    /// Builds a polynomial from Gaussian coordinates listed in basis order.
    pub fn from_coefficients(spec: EnsembleSpec, alpha: Vec<Complex64>) -> Result<Self> {
        let basis = Arc::new(Basis::for_spec(&spec));
        Self::with_basis(spec, basis, alpha)
    }

    pub fn with_basis(spec: EnsembleSpec, basis: Arc<Basis>, alpha: Vec<Complex64>) -> Result<Self> {
        if basis.m != spec.m || basis.degree != spec.degree {
            return Err(Error::domain("basis does not match ensemble spec"));
        }
        if alpha.len() != basis.len() {
            return Err(Error::domain(format!(
                "expected {} coefficients, got {}",
                basis.len(),
                alpha.len()
            )));
        }
        let mut log_coeff = Vec::with_capacity(alpha.len());
        let mut phase = Vec::with_capacity(alpha.len());
        for (k, a) in alpha.iter().enumerate() {
            if !(a.re.is_finite() && a.im.is_finite()) {
                return Err(Error::domain(format!("coefficient {k} is not finite")));
            }
            let n = a.norm();
            if n == 0.0 {
                log_coeff.push(f64::NEG_INFINITY);
                phase.push(Complex64::new(1.0, 0.0));
            } else {
                let lw = n.ln() + basis.half_log_weights[k];
                if !lw.exp().is_finite() {
                    return Err(Error::domain(format!(
                        "weighted coefficient {k} overflows a double"
                    )));
                }
                log_coeff.push(lw);
                phase.push(a / n);
            }
        }
        Ok(SUPolynomial {
            spec,
            basis,
            alpha,
            log_coeff,
            phase,
        })
    }

    /// A single basis element `value * sqrt(multinomial(N; j)) z^j`.
    pub fn monomial(m: usize, degree: u32, j: &MultiIndex, value: Complex64) -> Result<Self> {
        let spec = EnsembleSpec::new(m, degree, 0)?;
        let basis = Arc::new(Basis::for_spec(&spec));
        let pos = basis
            .position(j)
            .ok_or_else(|| Error::domain("multi-index outside the basis"))?;
        let mut alpha = vec![Complex64::new(0.0, 0.0); basis.len()];
        alpha[pos] = value;
        Self::with_basis(spec, basis, alpha)
    }

    pub fn spec(&self) -> &EnsembleSpec {
        &self.spec
    }

    pub fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    pub fn alpha(&self) -> &[Complex64] {
        &self.alpha
    }

    pub fn degree(&self) -> u32 {
        self.spec.degree
    }

    /// Weighted coefficient `c_j = alpha_j sqrt(multinomial(N; j))` as a double.
    pub fn weighted_coefficient(&self, k: usize) -> Complex64 {
        self.alpha[k] * self.basis.half_log_weights[k].exp()
    }

    /// `psi(z) / (1+|z|^2)^(N/2)` accumulated as (log scale, scaled sum).
    pub fn evaluate_scaled(&self, z: &ComplexPoint) -> ScaledSum {
        let m = self.spec.m;
        assert_eq!(z.dim(), m, "point dimension does not match m");
        let n = self.spec.degree as usize;
        let log_rho = -0.5 * (1.0 + z.norm_sq()).ln();

        // per-variable log|w_k| and phasor powers u_k^p, w = z / sqrt(1+|z|^2)
        let mut log_w = Vec::with_capacity(m);
        let mut powers = Vec::with_capacity(m * (n + 1));
        for c in z.coords() {
            let a = c.norm();
            let u = if a == 0.0 {
                Complex64::new(1.0, 0.0)
            } else {
                c / a
            };
            log_w.push(if a == 0.0 {
                f64::NEG_INFINITY
            } else {
                a.ln() + log_rho
            });
            let mut p = Complex64::new(1.0, 0.0);
            for _ in 0..=n {
                powers.push(p);
                p *= u;
            }
        }

        let mut acc = ScaledSum::new();
        for (k, j) in self.basis.indices.iter().enumerate() {
            let mut lm = self.log_coeff[k];
            if lm == f64::NEG_INFINITY {
                continue;
            }
            let mut ph = self.phase[k];
            let mut total = 0u32;
            for (v, &e) in j.entries.iter().enumerate() {
                if e > 0 {
                    lm += e as f64 * log_w[v];
                    ph *= powers[v * (n + 1) + e as usize];
                    total += e;
                }
            }
            let rest = self.spec.degree - total;
            if rest > 0 {
                lm += rest as f64 * log_rho;
            }
            acc.add(lm, ph);
        }
        acc
    }

    /// `psi(z) / (1+|z|^2)^(N/2)`.
    pub fn evaluate_normalized(&self, z: &ComplexPoint) -> Complex64 {
        self.evaluate_scaled(z).value()
    }

    /// `log |psi(z)|`; `-inf` at an exact zero.
    pub fn log_abs(&self, z: &ComplexPoint) -> f64 {
        let l = self.evaluate_scaled(z).log_abs();
        if l == f64::NEG_INFINITY {
            return l;
        }
        l + 0.5 * self.spec.degree as f64 * (1.0 + z.norm_sq()).ln()
    }

    /// Text dump: header `m N seed`, then `j_1 ... j_m re im` per basis element.
    pub fn to_dump(&self) -> String {
        let mut s = String::new();
        writeln!(s, "{} {} {}", self.spec.m, self.spec.degree, self.spec.seed).unwrap();
        for (j, a) in self.basis.indices.iter().zip(&self.alpha) {
            for e in &j.entries {
                write!(s, "{e} ").unwrap();
            }
            writeln!(s, "{} {}", fmt17(a.re), fmt17(a.im)).unwrap();
        }
        s
    }

    pub fn from_dump(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::domain("empty coefficient dump"))?;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.len() != 3 {
            return Err(Error::domain("dump header must be `m N seed`"));
        }
        let parse_err = |what: &str| Error::domain(format!("bad {what} in coefficient dump"));
        let m: usize = h[0].parse().map_err(|_| parse_err("m"))?;
        let degree: u32 = h[1].parse().map_err(|_| parse_err("N"))?;
        let seed: u64 = h[2].parse().map_err(|_| parse_err("seed"))?;
        let spec = EnsembleSpec::new(m, degree, seed)?;
        let basis = Arc::new(Basis::for_spec(&spec));
        let mut alpha = vec![Complex64::new(0.0, 0.0); basis.len()];
        let mut seen = vec![false; basis.len()];
        for line in lines {
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != m + 2 {
                return Err(parse_err("row"));
            }
            let j = MultiIndex::new(
                f[..m]
                    .iter()
                    .map(|x| x.parse::<u32>().map_err(|_| parse_err("index")))
                    .collect::<Result<_>>()?,
            );
            let pos = basis
                .position(&j)
                .ok_or_else(|| Error::domain("multi-index outside the basis"))?;
            let re: f64 = f[m].parse().map_err(|_| parse_err("real part"))?;
            let im: f64 = f[m + 1].parse().map_err(|_| parse_err("imaginary part"))?;
            alpha[pos] = Complex64::new(re, im);
            seen[pos] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::domain("coefficient dump is missing multi-indices"));
        }
        Self::with_basis(spec, basis, alpha)
    }
}

/// Float formatting used in every text output: 17 significant digits.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Draws every `alpha_j` as an independent standard complex Gaussian from `stream`.
///
/// Coefficient `k` (basis order) is draw `k` of the stream.
pub fn sample_polynomial(spec: EnsembleSpec, stream: &mut RandomStream) -> SUPolynomial {
    let basis = Arc::new(Basis::for_spec(&spec));
    sample_with_basis(spec, basis, stream)
}

fn sample_with_basis(spec: EnsembleSpec, basis: Arc<Basis>, stream: &mut RandomStream) -> SUPolynomial {
    stream.seek_draw(0);
    let alpha = (0..basis.len()).map(|_| stream.complex_gaussian()).collect();
    SUPolynomial::with_basis(spec, basis, alpha).expect("gaussian draws are finite")
}

/// Repeated sampling for one spec; trial `t` uses stream `(seed, Coefficients, t)`.
#[derive(Debug, Clone)]
pub struct Sampler {
    spec: EnsembleSpec,
    basis: Arc<Basis>,
}

impl Sampler {
    pub fn new(spec: EnsembleSpec) -> Self {
        Sampler {
            spec,
            basis: Arc::new(Basis::for_spec(&spec)),
        }
    }

    pub fn spec(&self) -> &EnsembleSpec {
        &self.spec
    }

    pub fn basis(&self) -> &Arc<Basis> {
        &self.basis
    }

    pub fn stream_key(&self, trial: u64) -> StreamKey {
        StreamKey::new(self.spec.seed, Domain::Coefficients, trial)
    }

    pub fn sample(&self, trial: u64) -> SUPolynomial {
        let mut stream = self.stream_key(trial).stream();
        sample_with_basis(self.spec, self.basis.clone(), &mut stream)
    }
}
