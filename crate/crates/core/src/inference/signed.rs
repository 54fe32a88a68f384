//! Log-domain helpers, including sums whose terms carry a sign.

use super::InferenceError;

#[inline]
pub(crate) fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `ln Σ exp(l)` over unsigned terms.
pub(crate) fn log_sum_exp(terms: &[f64]) -> f64 {
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + terms.iter().map(|l| (l - m).exp()).sum::<f64>().ln()
}

/// Result of a signed log-sum-exp: `total = scaled · e^{max_log}` where
/// `scaled` is relative to the largest term magnitude.
#[derive(Debug, Clone, Copy)]
pub(crate) struct SignedSum {
    pub scaled: f64,
    pub max_log: f64,
}

impl SignedSum {
    /// `(positive?, ln|term|)` pairs, Neumaier-compensated.
    pub fn new(terms: impl Iterator<Item = (bool, f64)> + Clone) -> Self {
        let max_log = terms
            .clone()
            .map(|(_, l)| l)
            .fold(f64::NEG_INFINITY, f64::max);
        if max_log == f64::NEG_INFINITY {
            return SignedSum {
                scaled: 0.0,
                max_log,
            };
        }
        let mut sum = 0.0f64;
        let mut comp = 0.0f64;
        for (positive, l) in terms {
            let x = if positive { (l - max_log).exp() } else { -(l - max_log).exp() };
            let t = sum + x;
            if sum.abs() >= x.abs() {
                comp += (sum - t) + x;
            } else {
                comp += (x - t) + sum;
            }
            sum = t;
        }
        SignedSum {
            scaled: sum + comp,
            max_log,
        }
    }

    /// Natural log of a sum that must be positive.
    pub fn log_positive(self, tolerance: f64) -> Result<f64, InferenceError> {
        if self.scaled < -tolerance || self.scaled <= 0.0 || !self.scaled.is_finite() {
            return Err(InferenceError::NegativeMass { value: self.scaled });
        }
        Ok(self.max_log + self.scaled.ln())
    }

    /// Natural log of a sum expected to be non-negative; cancellation noise
    /// below zero maps to `-inf`.
    pub fn log_clamped(self, tolerance: f64) -> Result<f64, InferenceError> {
        if self.scaled < -tolerance || self.scaled.is_nan() {
            return Err(InferenceError::NegativeMass { value: self.scaled });
        }
        if self.scaled <= 0.0 {
            return Ok(f64::NEG_INFINITY);
        }
        Ok(self.max_log + self.scaled.ln())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_add() {
        assert!((log_add_exp(0.0, 0.0) - 2f64.ln()).abs() < 1e-15);
        assert_eq!(log_add_exp(f64::NEG_INFINITY, 3.0), 3.0);
    }

    #[test]
    fn signed() {
        // e^1 - e^0 = e - 1
        let s = SignedSum::new([(true, 1.0), (false, 0.0)].into_iter());
        let v = s.log_positive(1e-9).unwrap();
        assert!((v - (std::f64::consts::E - 1.0).ln()).abs() < 1e-14);

        let s = SignedSum::new([(false, 1.0), (true, 0.0)].into_iter());
        assert!(matches!(s.log_positive(1e-9), Err(InferenceError::NegativeMass { .. })));
        assert!(s.log_clamped(1e-9).is_err());

        let zero = SignedSum::new([(true, 0.5), (false, 0.5)].into_iter());
        assert_eq!(zero.log_clamped(1e-9).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn unsigned() {
        assert!((log_sum_exp(&[0.0, 0.0, 0.0]) - 3f64.ln()).abs() < 1e-15);
        assert_eq!(log_sum_exp(&[]), f64::NEG_INFINITY);
    }
}
