//! Small descriptive statistics and the bootstrap z-test.

use statrs::function::erf::erfc;

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population standard deviation.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64).sqrt()
}

/// Two-sided p-value of a standard normal statistic.
pub fn two_sided_p(z: f64) -> f64 {
    if z.is_nan() {
        return 1.0;
    }
    erfc(z.abs() / std::f64::consts::SQRT_2)
}

/// z statistic and two-sided p-value for `H0: E[d] = 0`, from a bootstrap
/// distribution of differences, using the bootstrap standard deviation.
///
/// A degenerate distribution (spread at rounding level) is significant exactly when its
/// mean differs from zero.
pub fn bootstrap_z_test(diffs: &[f64]) -> (f64, f64) {
    let m = mean(diffs);
    let s = std_dev(diffs);
    if !s.is_finite() || s <= 1e-12 * (1.0 + m.abs()) {
        if m.abs() <= 1e-12 || m.is_nan() {
            return (0.0, 1.0);
        }
        return (m.signum() * f64::INFINITY, 0.0);
    }
    let z = m / s;
    (z, two_sided_p(z))
}
