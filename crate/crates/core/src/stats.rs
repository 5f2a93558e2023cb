//! Normal-tail helpers and binomial confidence intervals.

use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{invalid, Result};

fn standard_normal() -> Normal {
    Normal::standard()
}

/// Upper tail of the standard normal, `Q(x) = Pr(Z > x)`.
pub fn q_function(x: f64) -> f64 {
    standard_normal().sf(x)
}

/// Inverse of [`q_function`]: the `x` with `Q(x) = p`.
///
/// Computed as `-Φ⁻¹(p)` so small tail probabilities keep full precision.
pub fn q_inverse(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(invalid(format!("tail probability {p} outside (0, 1)")));
    }
    Ok(-standard_normal().inverse_cdf(p))
}

/// Wilson score interval for `successes` out of `trials` at two-sided
/// `confidence`.
pub fn wilson_interval(successes: u64, trials: u64, confidence: f64) -> Result<(f64, f64)> {
    if trials == 0 {
        return Err(invalid("Wilson interval needs at least one trial"));
    }
    if successes > trials {
        return Err(invalid(format!(
            "{successes} successes out of {trials} trials"
        )));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(invalid(format!("confidence {confidence} outside (0, 1)")));
    }
    let z = q_inverse((1.0 - confidence) / 2.0)?;
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    // the closed form is exact at the boundaries; clamp rounding only
    let low = if successes == 0 {
        0.0
    } else {
        (centre - half).clamp(0.0, p)
    };
    let high = if successes == trials {
        1.0
    } else {
        (centre + half).clamp(p, 1.0)
    };
    Ok((low, high))
}

/// Binomial standard error `√(p(1−p)/n)`.
pub fn binomial_se(p: f64, trials: u64) -> f64 {
    (p * (1.0 - p) / trials as f64).sqrt()
}
