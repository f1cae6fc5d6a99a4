//! Standard normal distribution function and its inverse.

use std::f64::consts::SQRT_2;

use libm::erfc;
use statrs::function::erf::erfc_inv;

use crate::error::{Error, Result};

/// Φ(x), the standard normal CDF.
///
/// Evaluated through `erfc` so that both tails keep full relative precision.
pub fn normal_cdf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    0.5 * erfc(-x / SQRT_2)
}

/// Φ⁻¹(p). Fails for `p` outside the open unit interval.
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(
            "normal_quantile",
            format!("p = {p} is not in (0, 1)"),
        ));
    }
    let mut z = -SQRT_2 * erfc_inv(2.0 * p);
    // One Newton step against erfc; tightens the far tails.
    let pdf = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    if pdf > 0.0 {
        let step = (normal_cdf(z) - p) / pdf;
        if step.is_finite() && step.abs() < 1e-3 * (1.0 + z.abs()) {
            z -= step;
        }
    }
    Ok(z)
}

/// Standard normal density.
pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}
