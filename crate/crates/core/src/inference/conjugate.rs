//! Conjugate envelope of `x ↦ ln(1 - e^{-x})`.
//!
//! For every `ξ > 0` and `x > 0`, `ln(1 - e^{-x}) ≤ ξx - f*(ξ)`, with equality
//! at `x = ln((ξ + 1) / ξ)`.

use super::InferenceError;

/// `(ξ + 1) ln(ξ + 1) - ξ ln ξ`.
pub fn f_star(xi: f64) -> Result<f64, InferenceError> {
    if !xi.is_finite() || xi <= 0.0 {
        return Err(InferenceError::Domain(xi));
    }
    Ok(f_star_unchecked(xi))
}

#[inline]
pub(crate) fn f_star_unchecked(xi: f64) -> f64 {
    (xi + 1.0) * xi.ln_1p() - xi * xi.ln()
}

/// Upper envelope `ξx - f*(ξ)` evaluated at `x`.
pub fn conjugate_upper(xi: f64, x: f64) -> Result<f64, InferenceError> {
    Ok(xi * x - f_star(xi)?)
}

/// The `x` at which the envelope touches the curve.
pub fn tight_point(xi: f64) -> Result<f64, InferenceError> {
    if xi.is_nan() || xi <= 0.0 {
        return Err(InferenceError::Domain(xi));
    }
    Ok((1.0 / xi).ln_1p())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn value_at_one() {
        assert!((f_star(1.0).unwrap() - 2.0 * 2f64.ln()).abs() < 1e-15);
        assert!((tight_point(1.0).unwrap() - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn domain() {
        assert!(f_star(0.0).is_err());
        assert!(f_star(-1.0).is_err());
        assert!(f_star(f64::NAN).is_err());
    }

    #[test]
    fn small_xi_is_finite() {
        let v = f_star(1e-12).unwrap();
        assert!(v.is_finite() && v > 0.0);
    }
}
