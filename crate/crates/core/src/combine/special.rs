//! Normal and chi-square functions used by the combiners.

use statrs::function::{erf, gamma};

use crate::error::{Error, Result};

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("normal quantile needs p in (0, 1), got {p}")));
    }
    let mut x = -std::f64::consts::SQRT_2 * erf::erfc_inv(2.0 * p);
    // Newton steps on the accurate CDF
    for _ in 0..2 {
        let density = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        if density < 1e-300 {
            break;
        }
        let step = (normal_cdf(x) - p) / density;
        if !step.is_finite() {
            break;
        }
        x -= step;
    }
    Ok(x)
}

/// `P(χ²_df ≥ x)` via the regularized upper incomplete gamma function.
pub fn chisq_upper(df: f64, x: f64) -> Result<f64> {
    if !(df > 0.0) || x.is_nan() {
        return Err(Error::Domain(format!("chi-square tail needs df > 0, got df={df}, x={x}")));
    }
    if x <= 0.0 {
        return Ok(1.0);
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    gamma::checked_gamma_ur(df / 2.0, x / 2.0).map_err(|e| Error::Domain(e.to_string()))
}
