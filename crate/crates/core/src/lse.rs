//! Overflow-free accumulation of complex sums whose terms are given as a
//! log-magnitude and a unit phasor.

use num_complex::Complex64;

/// Running complex sum `exp(log_scale) * sum`, rescaled whenever a larger term arrives.
#[derive(Debug, Clone, Copy)]
pub struct ScaledSum {
    log_scale: f64,
    sum: Complex64,
}

impl Default for ScaledSum {
    fn default() -> Self {
        ScaledSum {
            log_scale: f64::NEG_INFINITY,
            sum: Complex64::new(0.0, 0.0),
        }
    }
}

impl ScaledSum {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `exp(log_mag) * phasor`. Terms with `log_mag = -inf` are exact zeros.
    #[inline]
    pub fn add(&mut self, log_mag: f64, phasor: Complex64) {
        if log_mag == f64::NEG_INFINITY {
            return;
        }
        if log_mag > self.log_scale {
            if self.log_scale == f64::NEG_INFINITY {
                self.sum = phasor;
            } else {
                self.sum = self.sum * (self.log_scale - log_mag).exp() + phasor;
            }
            self.log_scale = log_mag;
        } else {
            self.sum += phasor * (log_mag - self.log_scale).exp();
        }
    }

    /// Adds an ordinary complex number.
    pub fn add_value(&mut self, value: Complex64) {
        let n = value.norm();
        if n > 0.0 {
            self.add(n.ln(), value / n);
        }
    }

    /// Log of the largest term seen, `-inf` for an empty sum.
    pub fn log_scale(&self) -> f64 {
        self.log_scale
    }

    /// Scaled partial sum; the true value is `exp(log_scale()) * scaled_sum()`.
    pub fn scaled_sum(&self) -> Complex64 {
        self.sum
    }

    /// `log |sum|`, `-inf` if the sum is exactly zero.
    pub fn log_abs(&self) -> f64 {
        if self.log_scale == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        let n = self.sum.norm();
        if n == 0.0 {
            f64::NEG_INFINITY
        } else {
            self.log_scale + n.ln()
        }
    }

    /// The sum as a plain complex number (may overflow or underflow).
    pub fn value(&self) -> Complex64 {
        if self.log_scale == f64::NEG_INFINITY {
            Complex64::new(0.0, 0.0)
        } else {
            self.sum * self.log_scale.exp()
        }
    }
}
