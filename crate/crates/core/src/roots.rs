//! Roots of one-variable ensemble members.
//!
//! Aberth-Ehrlich iteration on the weighted coefficients, with a
//! companion-matrix eigenvalue fallback, followed by Newton polishing against
//! the normalized residual `|psi(z)| / (1+|z|^2)^(N/2)`.

use crate::ensemble::{ComplexPoint, SUPolynomial};
use crate::error::{Error, Result};
use crate::rng::{Domain, StreamKey};
use nalgebra::DMatrix;
use num_complex::Complex64;
use std::f64::consts::TAU;

/// Coefficients below this magnitude are treated as zero.
pub const DEGENERATE_THRESHOLD: f64 = 1e-300;
/// Target normalized residual for every polished root.
pub const POLISH_TOLERANCE: f64 = 1e-10;
pub const MAX_POLISH_STEPS: usize = 50;
pub const MAX_ABERTH_SWEEPS: usize = 200;

#[derive(Debug, Clone, PartialEq)]
pub struct RootSet {
    pub roots: Vec<Complex64>,
    /// Normalized residual `|psi(root)| / (1+|root|^2)^(N/2)` per root.
    pub residuals: Vec<f64>,
    /// Leading coefficients treated as zero (roots at infinity).
    pub degree_deficit: usize,
}

impl RootSet {
    pub fn len(&self) -> usize {
        self.roots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.roots.is_empty()
    }

    /// Number of roots with `|z| < r`.
    ///
    /// Fails with [`Error::BoundaryAmbiguity`] when a root lies within `1e-8 r` of the circle.
    pub fn count_inside(&self, r: f64) -> Result<usize> {
        if !(r > 0.0) {
            return Err(Error::domain("radius must be positive"));
        }
        let tolerance = 1e-8 * r;
        let mut count = 0;
        for z in &self.roots {
            let modulus = z.norm();
            if (modulus - r).abs() <= tolerance {
                return Err(Error::BoundaryAmbiguity {
                    radius: r,
                    modulus,
                    tolerance,
                });
            }
            if modulus < r {
                count += 1;
            }
        }
        Ok(count)
    }
}

/// `p(z) / p'(z)` for coefficients in ascending order, reversed Horner outside the unit disk.
fn newton_ratio(c: &[Complex64], z: Complex64) -> Complex64 {
    let d = c.len() - 1;
    if z.norm_sqr() <= 1.0 {
        let mut p = c[d];
        let mut dp = Complex64::new(0.0, 0.0);
        for k in (0..d).rev() {
            dp = dp * z + p;
            p = p * z + c[k];
        }
        p / dp
    } else {
        let w = z.inv();
        let mut q = c[0];
        let mut dq = Complex64::new(0.0, 0.0);
        for &ck in &c[1..] {
            dq = dq * w + q;
            q = q * w + ck;
        }
        z * q / (q * d as f64 - w * dq)
    }
}

fn aberth(c: &[Complex64]) -> Option<Vec<Complex64>> {
    let d = c.len() - 1;
    let radius = (c[0].norm() / c[d].norm()).powf(1.0 / d as f64);
    let radius = if radius.is_finite() && radius > 0.0 {
        radius
    } else {
        1.0
    };
    let mut init = StreamKey::new(0, Domain::RootInit, d as u64).stream();
    let mut z: Vec<Complex64> = (0..d)
        .map(|k| {
            let angle = TAU * (k as f64 + 0.25 + 0.5 * init.uniform()) / d as f64;
            Complex64::from_polar(radius, angle)
        })
        .collect();
    let mut done = vec![false; d];

    for _ in 0..MAX_ABERTH_SWEEPS {
        let mut all_done = true;
        for i in 0..d {
            if done[i] {
                continue;
            }
            let ratio = newton_ratio(c, z[i]);
            if !(ratio.re.is_finite() && ratio.im.is_finite()) {
                return None;
            }
            let mut repulsion = Complex64::new(0.0, 0.0);
            for (k, zk) in z.iter().enumerate() {
                if k != i {
                    repulsion += (z[i] - zk).inv();
                }
            }
            let step = ratio / (Complex64::new(1.0, 0.0) - ratio * repulsion);
            if !(step.re.is_finite() && step.im.is_finite()) {
                return None;
            }
            z[i] -= step;
            if step.norm() <= 4.0 * f64::EPSILON * z[i].norm() || step.norm() < 1e-300 {
                done[i] = true;
            } else {
                all_done = false;
            }
        }
        if all_done {
            return Some(z);
        }
    }
    None
}

/// Eigenvalues of the companion matrix of the (ascending) coefficients.
pub fn companion_roots(c: &[Complex64]) -> Result<Vec<Complex64>> {
    let d = c.len() - 1;
    if d == 0 {
        return Ok(Vec::new());
    }
    let lead = c[d];
    let mut comp = DMatrix::from_element(d, d, Complex64::new(0.0, 0.0));
    for k in 0..d {
        comp[(k, d - 1)] = -c[k] / lead;
        if k + 1 < d {
            comp[(k + 1, k)] = Complex64::new(1.0, 0.0);
        }
    }
    let ev = comp
        .schur()
        .eigenvalues()
        .ok_or_else(|| Error::RootFinding("companion Schur decomposition failed".into()))?;
    Ok(ev.iter().copied().collect())
}

fn normalized_residual(psi: &SUPolynomial, z: Complex64) -> f64 {
    psi.evaluate_normalized(&ComplexPoint::scalar(z)).norm()
}

fn polish(psi: &SUPolynomial, c: &[Complex64], z0: Complex64) -> (Complex64, f64) {
    let mut z = z0;
    let mut res = normalized_residual(psi, z);
    for _ in 0..MAX_POLISH_STEPS {
        if res < POLISH_TOLERANCE * 1e-3 {
            break;
        }
        let step = newton_ratio(c, z);
        if !(step.re.is_finite() && step.im.is_finite()) {
            break;
        }
        let candidate = z - step;
        let r = normalized_residual(psi, candidate);
        if r < res {
            z = candidate;
            res = r;
        } else {
            break;
        }
    }
    (z, res)
}

/// All roots of a one-variable ensemble member.
pub fn roots_m1(psi: &SUPolynomial) -> Result<RootSet> {
    if psi.spec().m() != 1 {
        return Err(Error::domain("root finding requires m = 1"));
    }
    let n = psi.degree() as usize;
    if n == 0 {
        return Err(Error::domain("root finding requires N >= 1"));
    }
    let coeffs: Vec<Complex64> = (0..=n).map(|k| psi.weighted_coefficient(k)).collect();
    let significant = |x: &Complex64| x.norm() >= DEGENERATE_THRESHOLD;
    let top = coeffs
        .iter()
        .rposition(significant)
        .ok_or(Error::DegeneratePolynomial {
            threshold: DEGENERATE_THRESHOLD,
        })?;
    let low = coeffs.iter().position(significant).expect("top exists");
    let degree_deficit = n - top;

    let mut roots = vec![Complex64::new(0.0, 0.0); low];
    let mut residuals = vec![0.0; low];
    let reduced = &coeffs[low..=top];

    match reduced.len() - 1 {
        0 => {}
        1 => {
            let z = -reduced[0] / reduced[1];
            let (z, res) = polish(psi, reduced, z);
            roots.push(z);
            residuals.push(res);
        }
        _ => {
            let mut attempt = |raw: Vec<Complex64>| -> Option<(Vec<Complex64>, Vec<f64>)> {
                let mut zs = Vec::with_capacity(raw.len());
                let mut rs = Vec::with_capacity(raw.len());
                for z in raw {
                    let (z, r) = polish(psi, reduced, z);
                    if !(r < POLISH_TOLERANCE) {
                        return None;
                    }
                    zs.push(z);
                    rs.push(r);
                }
                Some((zs, rs))
            };
            let found = aberth(reduced)
                .and_then(&mut attempt)
                .or_else(|| companion_roots(reduced).ok().and_then(&mut attempt))
                .ok_or_else(|| {
                    Error::RootFinding(format!(
                        "no root set with normalized residual below {POLISH_TOLERANCE:e}"
                    ))
                })?;
            roots.extend(found.0);
            residuals.extend(found.1);
        }
    }
    Ok(RootSet {
        roots,
        residuals,
        degree_deficit,
    })
}
