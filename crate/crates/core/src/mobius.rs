//! The invariant norm and the one-parameter family of shifted orthonormal bases.
//!
//! For `zeta` in `C`, the shifted basis element with index `j` is
//!
//! ```text
//! sqrt(multinomial(N; j)) ((z1 - zeta)/s)^j1 ((1 + conj(zeta) z1)/s)^(N-|j|) z2^j2 ... zm^jm,
//! s = sqrt(1 + |zeta|^2)
//! ```
//!
//! Both this family and the monomial basis are orthonormal for the invariant
//! norm, so the change of coordinates between them is unitary and maps i.i.d.
//! Gaussian coordinates to i.i.d. Gaussian coordinates.

use crate::ensemble::{Basis, ComplexPoint, EnsembleSpec, MultiIndex, SUPolynomial};
use crate::error::{Error, Result};
use crate::lse::ScaledSum;
use crate::rng::RandomStream;
use nalgebra::DMatrix;
use num_complex::Complex64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MobiusParameter(Complex64);

impl MobiusParameter {
    pub fn new(zeta: Complex64) -> Result<Self> {
        if zeta.re.is_finite() && zeta.im.is_finite() {
            Ok(MobiusParameter(zeta))
        } else {
            Err(Error::domain("zeta must be finite"))
        }
    }

    pub fn value(&self) -> Complex64 {
        self.0
    }

    pub fn negated(&self) -> Self {
        MobiusParameter(-self.0)
    }

    /// `ln(1 + |zeta|^2)`.
    fn ln_s2(&self) -> f64 {
        self.0.norm_sqr().ln_1p()
    }
}

fn ln_binomial(n: u32, k: u32) -> f64 {
    libm::lgamma(n as f64 + 1.0) - libm::lgamma(k as f64 + 1.0) - libm::lgamma((n - k) as f64 + 1.0)
}

fn unit(z: Complex64) -> (f64, Complex64) {
    let a = z.norm();
    if a == 0.0 {
        (f64::NEG_INFINITY, Complex64::new(1.0, 0.0))
    } else {
        (a.ln(), z / a)
    }
}

/// Monomial-basis coordinates of the shifted basis element `j`.
pub fn expand_shifted_basis(basis: &Basis, zeta: MobiusParameter, j: &MultiIndex) -> Result<Vec<Complex64>> {
    let degree = basis.degree();
    if j.dim() != basis.m() {
        return Err(Error::domain("multi-index dimension does not match m"));
    }
    let col = basis
        .position(j)
        .ok_or_else(|| Error::domain(format!("|j| = {} exceeds N = {degree}", j.degree_total())))?;

    let a = j.entries()[0];
    let b = degree - j.degree_total();
    let tail: u32 = j.entries()[1..].iter().sum();
    let (ln_zeta, zeta_phase) = unit(zeta.value());
    let minus_zeta_phase = -zeta_phase;
    let conj_zeta_phase = zeta_phase.conj();
    let ln_s2 = zeta.ln_s2();
    let half_lw_j = basis.half_log_weight(col);

    let mut out = vec![Complex64::new(0.0, 0.0); basis.len()];
    let mut target = j.entries().to_vec();
    for p in 0..=(a + b) {
        // coefficient of z1^p in (z1 - zeta)^a (1 + conj(zeta) z1)^b
        let mut acc = ScaledSum::new();
        let q_lo = p.saturating_sub(b);
        let q_hi = p.min(a);
        for q in q_lo..=q_hi {
            let from_first = a - q; // powers of (-zeta)
            let from_second = p - q; // powers of conj(zeta)
            let mut lm = ln_binomial(a, q) + ln_binomial(b, from_second);
            let mut ph = Complex64::new(1.0, 0.0);
            if from_first > 0 {
                lm += from_first as f64 * ln_zeta;
                ph *= minus_zeta_phase.powu(from_first);
            }
            if from_second > 0 {
                lm += from_second as f64 * ln_zeta;
                ph *= conj_zeta_phase.powu(from_second);
            }
            acc.add(lm, ph);
        }
        if acc.log_scale() == f64::NEG_INFINITY {
            continue;
        }
        target[0] = p;
        let row = basis
            .position(&MultiIndex::new(target.clone()))
            .expect("p + tail <= N");
        let shift = half_lw_j - basis.half_log_weight(row) - 0.5 * (a + b) as f64 * ln_s2;
        out[row] = acc.scaled_sum() * (acc.log_scale() + shift).exp();
    }
    debug_assert!(tail + a + b == degree);
    Ok(out)
}

/// Matrix taking shifted-basis coordinates `alpha'` to monomial coordinates `alpha`.
#[derive(Debug, Clone)]
pub struct BasisTransform {
    spec: EnsembleSpec,
    zeta: MobiusParameter,
    matrix: DMatrix<Complex64>,
}

impl BasisTransform {
    pub fn new(spec: EnsembleSpec, zeta: MobiusParameter) -> Result<Self> {
        let basis = Basis::for_spec(&spec);
        let d = basis.len();
        let mut matrix = DMatrix::from_element(d, d, Complex64::new(0.0, 0.0));
        for (col, j) in basis.indices().iter().enumerate() {
            let v = expand_shifted_basis(&basis, zeta, j)?;
            for (row, x) in v.into_iter().enumerate() {
                matrix[(row, col)] = x;
            }
        }
        Ok(BasisTransform { spec, zeta, matrix })
    }

    pub fn spec(&self) -> &EnsembleSpec {
        &self.spec
    }

    pub fn zeta(&self) -> MobiusParameter {
        self.zeta
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    pub fn side(&self) -> usize {
        self.matrix.nrows()
    }

    /// `max |U U^* - I|` over all entries.
    pub fn unitarity_defect(&self) -> f64 {
        let prod = &self.matrix * self.matrix.adjoint();
        let d = self.side();
        let mut worst: f64 = 0.0;
        for r in 0..d {
            for c in 0..d {
                let target = if r == c { 1.0 } else { 0.0 };
                worst = worst.max((prod[(r, c)] - Complex64::new(target, 0.0)).norm());
            }
        }
        worst
    }
}

/// `alpha = M alpha'`.
pub fn transform_coefficients(alpha_prime: &[Complex64], transform: &BasisTransform) -> Result<Vec<Complex64>> {
    let d = transform.side();
    if alpha_prime.len() != d {
        return Err(Error::domain(format!(
            "coefficient vector has length {}, transform side is {d}",
            alpha_prime.len()
        )));
    }
    let mut out = vec![Complex64::new(0.0, 0.0); d];
    for (r, slot) in out.iter_mut().enumerate() {
        let mut acc = Complex64::new(0.0, 0.0);
        for (c, a) in alpha_prime.iter().enumerate() {
            acc += transform.matrix[(r, c)] * a;
        }
        *slot = acc;
    }
    Ok(out)
}

/// Direct evaluation of `sum_j alpha'_j e'_j(z) / (1+|z|^2)^(N/2)` in the shifted basis.
pub fn evaluate_shifted_normalized(
    basis: &Basis,
    zeta: MobiusParameter,
    alpha_prime: &[Complex64],
    z: &ComplexPoint,
) -> Result<Complex64> {
    if alpha_prime.len() != basis.len() || z.dim() != basis.m() {
        return Err(Error::domain("dimension mismatch in shifted evaluation"));
    }
    let ln_s2 = zeta.ln_s2();
    let z1 = z.coords()[0];
    let (ln_first, ph_first) = unit(z1 - zeta.value());
    let (ln_second, ph_second) = unit(1.0 + zeta.value().conj() * z1);
    let others: Vec<(f64, Complex64)> = z.coords()[1..].iter().map(|&c| unit(c)).collect();
    let ln_norm = 0.5 * basis.degree() as f64 * z.norm_sq().ln_1p();

    let mut acc = ScaledSum::new();
    for (k, j) in basis.indices().iter().enumerate() {
        let (ln_a, ph_a) = unit(alpha_prime[k]);
        if ln_a == f64::NEG_INFINITY {
            continue;
        }
        let e = j.entries();
        let b = basis.degree() - j.degree_total();
        let mut lm = ln_a + basis.half_log_weight(k) - 0.5 * (e[0] + b) as f64 * ln_s2 - ln_norm;
        let mut ph = ph_a;
        for (exp, (ln_f, ph_f)) in std::iter::once((e[0], (ln_first, ph_first)))
            .chain(std::iter::once((b, (ln_second, ph_second))))
            .chain(e[1..].iter().copied().zip(others.iter().copied()))
        {
            if exp > 0 {
                lm += exp as f64 * ln_f;
                ph *= ph_f.powu(exp);
            }
        }
        acc.add(lm, ph);
    }
    Ok(acc.value())
}

/// The invariant norm `||f||_N`, i.e. the l2 norm of the Gaussian coordinates.
pub fn norm_n(f: &SUPolynomial) -> f64 {
    f.alpha().iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

/// Monte Carlo estimate of `||f||_N^2` straight from its integral definition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormEstimate {
    pub norm_sq: f64,
    pub stderr: f64,
    pub samples: usize,
}

/// Estimates the integral `(N+m)!/(N! pi^m) int |f|^2 (1+|z|^2)^-(N+m+1) dm(z)`.
///
/// Points are drawn from the Fubini-Study density `~ (1+|z|^2)^-(m+1)`:
/// `t = |z|^2/(1+|z|^2)` has CDF `t^m`, angles come from a Gaussian direction.
/// The weighted integrand is then `binomial(N+m, m) |psi(z)|^2 / (1+|z|^2)^N`,
/// which is bounded by `binomial(N+m, m) sum |alpha_j|^2`.
pub fn norm_n_monte_carlo(f: &SUPolynomial, samples: usize, stream: &mut RandomStream) -> Result<NormEstimate> {
    if samples < 2 {
        return Err(Error::domain("need at least two samples"));
    }
    let m = f.spec().m();
    let d = f.spec().coefficient_count() as f64;
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for k in 0..samples {
        let t = stream.uniform_open_zero().powf(1.0 / m as f64);
        let radius = if t >= 1.0 {
            f64::MAX.sqrt()
        } else {
            (t / (1.0 - t)).sqrt()
        };
        let z = ComplexPoint::new(stream.sphere_point(m, radius));
        let y = d * f.evaluate_normalized(&z).norm_sqr();
        let delta = y - mean;
        mean += delta / (k + 1) as f64;
        m2 += delta * (y - mean);
    }
    let var = m2 / (samples - 1) as f64;
    Ok(NormEstimate {
        norm_sq: mean,
        stderr: (var / samples as f64).sqrt(),
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::Sampler;
    use crate::rng::{Domain, StreamKey};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn zero_shift_is_identity() {
        let basis = Basis::new(2, 4).unwrap();
        let zeta = MobiusParameter::new(c(0.0, 0.0)).unwrap();
        for (k, j) in basis.indices().iter().enumerate() {
            let v = expand_shifted_basis(&basis, zeta, j).unwrap();
            for (i, x) in v.iter().enumerate() {
                let target = if i == k { 1.0 } else { 0.0 };
                assert!((x - c(target, 0.0)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn degree_one_expansion() {
        let zeta_v = c(0.4, -0.9);
        let basis = Basis::new(1, 1).unwrap();
        let zeta = MobiusParameter::new(zeta_v).unwrap();
        let v = expand_shifted_basis(&basis, zeta, &MultiIndex::new(vec![1])).unwrap();
        let s = (1.0 + zeta_v.norm_sqr()).sqrt();
        assert!((v[0] - (-zeta_v / s)).norm() < 1e-15);
        assert!((v[1] - c(1.0 / s, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn expansion_rejects_large_index() {
        let basis = Basis::new(1, 3).unwrap();
        let zeta = MobiusParameter::new(c(0.1, 0.0)).unwrap();
        assert!(matches!(
            expand_shifted_basis(&basis, zeta, &MultiIndex::new(vec![4])),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn shifted_basis_matrix_is_unitary() {
        let t = BasisTransform::new(EnsembleSpec::new(1, 6, 0).unwrap(), MobiusParameter::new(c(0.7, 0.2)).unwrap())
            .unwrap();
        assert_eq!(t.side(), 7);
        assert!(t.unitarity_defect() < 1e-10);
        for m in [2, 3] {
            let t = BasisTransform::new(EnsembleSpec::new(m, 5, 0).unwrap(), MobiusParameter::new(c(-0.3, 1.1)).unwrap())
                .unwrap();
            assert!(t.unitarity_defect() < 1e-10, "m={m}: {}", t.unitarity_defect());
        }
    }

    #[test]
    fn zero_shift_transform_is_identity_on_vectors() {
        let spec = EnsembleSpec::new(1, 5, 0).unwrap();
        let t = BasisTransform::new(spec, MobiusParameter::new(c(0.0, 0.0)).unwrap()).unwrap();
        let p = Sampler::new(spec).sample(3);
        assert_eq!(transform_coefficients(p.alpha(), &t).unwrap(), p.alpha().to_vec());
    }

    #[test]
    fn pointwise_identity_of_both_expansions() {
        let spec = EnsembleSpec::new(1, 10, 8).unwrap();
        let zeta = MobiusParameter::new(c(0.0, 0.3)).unwrap();
        let t = BasisTransform::new(spec, zeta).unwrap();
        let basis = Basis::for_spec(&spec);
        let alpha_prime = Sampler::new(spec).sample(0).alpha().to_vec();
        let alpha = transform_coefficients(&alpha_prime, &t).unwrap();
        let p = SUPolynomial::from_coefficients(spec, alpha).unwrap();
        let mut rs = StreamKey::new(1, Domain::Custom(10), 0).stream();
        for _ in 0..50 {
            let z = ComplexPoint::scalar(rs.complex_gaussian() * 2.0);
            let lhs = p.evaluate_normalized(&z);
            let rhs = evaluate_shifted_normalized(&basis, zeta, &alpha_prime, &z).unwrap();
            assert!((lhs - rhs).norm() <= 1e-8 * lhs.norm().max(rhs.norm()));
        }
    }

    #[test]
    fn pointwise_identity_in_two_variables() {
        let spec = EnsembleSpec::new(2, 6, 8).unwrap();
        let zeta = MobiusParameter::new(c(0.5, -0.4)).unwrap();
        let t = BasisTransform::new(spec, zeta).unwrap();
        let basis = Basis::for_spec(&spec);
        let alpha_prime = Sampler::new(spec).sample(1).alpha().to_vec();
        let alpha = transform_coefficients(&alpha_prime, &t).unwrap();
        let p = SUPolynomial::from_coefficients(spec, alpha).unwrap();
        let mut rs = StreamKey::new(2, Domain::Custom(10), 0).stream();
        for _ in 0..50 {
            let z = ComplexPoint::new(vec![rs.complex_gaussian(), rs.complex_gaussian()]);
            let lhs = p.evaluate_normalized(&z);
            let rhs = evaluate_shifted_normalized(&basis, zeta, &alpha_prime, &z).unwrap();
            assert!((lhs - rhs).norm() <= 1e-8 * lhs.norm().max(rhs.norm()));
        }
    }

    #[test]
    fn l2_norm_preserved() {
        let mut rs = StreamKey::new(3, Domain::Custom(11), 0).stream();
        for trial in 0..100u64 {
            let degree = (trial % 21) as u32;
            let spec = EnsembleSpec::new(1, degree, 5).unwrap();
            let zeta = MobiusParameter::new(rs.complex_gaussian()).unwrap();
            let t = BasisTransform::new(spec, zeta).unwrap();
            let ap = Sampler::new(spec).sample(trial).alpha().to_vec();
            let a = transform_coefficients(&ap, &t).unwrap();
            let n0: f64 = ap.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            let n1: f64 = a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
            assert!(((n1 - n0) / n0).abs() < 1e-10);
        }
    }

    #[test]
    fn length_mismatch_rejected() {
        let t = BasisTransform::new(EnsembleSpec::new(1, 3, 0).unwrap(), MobiusParameter::new(c(0.2, 0.0)).unwrap())
            .unwrap();
        assert!(transform_coefficients(&[c(1.0, 0.0); 3], &t).is_err());
    }

    #[test]
    fn inverse_shift_composes_to_identity() {
        for m in [1, 2] {
            let spec = EnsembleSpec::new(m, 7, 0).unwrap();
            let zeta = MobiusParameter::new(c(0.6, -0.35)).unwrap();
            let fwd = BasisTransform::new(spec, zeta).unwrap();
            let back = BasisTransform::new(spec, zeta.negated()).unwrap();
            let composed = back.matrix() * fwd.matrix();
            let phase = composed[(0, 0)];
            assert!((phase.norm() - 1.0).abs() < 1e-8);
            let d = composed.nrows();
            for r in 0..d {
                for col in 0..d {
                    let target = if r == col { phase } else { c(0.0, 0.0) };
                    assert!((composed[(r, col)] - target).norm() < 1e-8);
                }
            }
        }
    }

    #[test]
    fn transformed_gaussians_stay_white() {
        // 10^5 trials: at 10^4 the expected Frobenius noise of a 6x6 sample covariance is ~0.06
        let spec = EnsembleSpec::new(1, 5, 21).unwrap();
        let t = BasisTransform::new(spec, MobiusParameter::new(c(0.8, 0.5)).unwrap()).unwrap();
        let sampler = Sampler::new(spec);
        let d = t.side();
        let trials = 100_000u64;
        let mut cov = DMatrix::from_element(d, d, c(0.0, 0.0));
        for trial in 0..trials {
            let a = transform_coefficients(sampler.sample(trial).alpha(), &t).unwrap();
            for r in 0..d {
                for col in 0..d {
                    cov[(r, col)] += a[r] * a[col].conj();
                }
            }
        }
        cov /= c(trials as f64, 0.0);
        let mut frob = 0.0;
        for r in 0..d {
            for col in 0..d {
                let target = if r == col { 1.0 } else { 0.0 };
                frob += (cov[(r, col)] - c(target, 0.0)).norm_sqr();
            }
        }
        assert!(frob.sqrt() < 0.05, "Frobenius distance {}", frob.sqrt());
    }

    #[test]
    fn norm_of_basis_elements_and_zero() {
        let p = SUPolynomial::monomial(2, 4, &MultiIndex::new(vec![1, 2]), c(1.0, 0.0)).unwrap();
        assert_eq!(norm_n(&p), 1.0);
        let z = SUPolynomial::from_coefficients(EnsembleSpec::new(1, 3, 0).unwrap(), vec![c(0.0, 0.0); 4]).unwrap();
        assert_eq!(norm_n(&z), 0.0);
    }

    #[test]
    fn monte_carlo_norm_matches_parseval() {
        let spec = EnsembleSpec::new(1, 5, 31).unwrap();
        let p = Sampler::new(spec).sample(0);
        let mut stream = StreamKey::new(31, Domain::NormIntegral, 0).stream();
        let est = norm_n_monte_carlo(&p, 1_000_000, &mut stream).unwrap();
        let exact = norm_n(&p).powi(2);
        assert!(((est.norm_sq - exact) / exact).abs() < 0.02, "{} vs {exact}", est.norm_sq);
        assert!((est.norm_sq - exact).abs() < 4.0 * est.stderr);
    }

    #[test]
    fn monte_carlo_norm_of_basis_element() {
        let p = SUPolynomial::monomial(2, 3, &MultiIndex::new(vec![1, 1]), c(1.0, 0.0)).unwrap();
        let mut stream = StreamKey::new(2, Domain::NormIntegral, 0).stream();
        let est = norm_n_monte_carlo(&p, 200_000, &mut stream).unwrap();
        assert!((est.norm_sq - 1.0).abs() < 0.02);
    }
}
