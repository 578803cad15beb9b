//! Small numeric helpers shared across modules.

use statrs::distribution::{ContinuousCDF, Normal};

/// Φ⁻¹(0.975) to double precision, used for every 95% Wald interval.
pub const Z_975: f64 = 1.959964;

pub fn normal_cdf(x: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-x / std::f64::consts::SQRT_2)
}

/// Two-sided normal quantile for level `alpha`; returns [`Z_975`] at 0.05.
pub fn two_sided_z(alpha: f64) -> f64 {
    if (alpha - 0.05).abs() < 1e-15 {
        return Z_975;
    }
    Normal::standard().inverse_cdf(1.0 - alpha / 2.0)
}

/// Empirical quantile with linear interpolation between order statistics
/// (the "type 7" convention: `h = (n - 1) q`).
///
/// Returns `None` for an empty sample or `q` outside `[0, 1]`.
pub fn quantile_type7(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() || !(0.0..=1.0).contains(&q) {
        return None;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    Some(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Sample standard deviation (n - 1 denominator); `NaN` below two values.
pub fn sample_sd(values: &[f64]) -> f64 {
    if values.len() < 2 {
        return f64::NAN;
    }
    if values.iter().all(|v| *v == values[0]) {
        return 0.0;
    }
    let m = mean(values);
    let ss: f64 = values.iter().map(|v| (v - m) * (v - m)).sum();
    (ss / (values.len() - 1) as f64).sqrt()
}
