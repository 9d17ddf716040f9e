//! Standard normal kernels with attention to the far tails.

use libm::erfc;
use statrs::function::erf::erfc_inv;

pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

pub fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z - LN_SQRT_2PI).exp()
}

pub fn std_normal_ln_pdf(z: f64) -> f64 {
    -0.5 * z * z - LN_SQRT_2PI
}

/// `Phi(z)`, accurate in relative terms for the lower tail.
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// `ln Phi(-z)` for `z >= 0` (log of the upper tail at `z`), finite far past
/// the point where `Phi(-z)` underflows.
pub fn ln_std_normal_upper_tail(z: f64) -> f64 {
    if z < 30.0 {
        return (0.5 * erfc(z / std::f64::consts::SQRT_2)).ln();
    }
    // Mills-ratio asymptotic series, ample beyond z = 30
    let z2 = z * z;
    let series = 1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2) + 105.0 / (z2 * z2 * z2 * z2);
    std_normal_ln_pdf(z) - z.ln() + series.ln()
}

/// `Phi^{-1}(p)` for `p` in `(0, 1)`.
///
/// Pass the smaller tail for accuracy: for `p > 1/2` prefer
/// `-std_normal_quantile(1 - p)` computed from an accurate `1 - p`.
pub fn std_normal_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    if p > 0.5 {
        return -std_normal_quantile(1.0 - p);
    }
    let mut z = -std::f64::consts::SQRT_2 * erfc_inv(2.0 * p);
    if z.is_finite() {
        // one Halley step on Phi(z) = p
        let e = std_normal_cdf(z) - p;
        let u = e * (0.5 * z * z + LN_SQRT_2PI).exp();
        z -= u / (1.0 + 0.5 * z * u);
    }
    z
}

/// Positive `z` with `ln Phi(-z) = ln_tail`, for `ln_tail` well below zero.
pub fn std_normal_quantile_from_ln_tail(ln_tail: f64) -> f64 {
    let t = -2.0 * ln_tail;
    let mut z = (t - t.ln() - (2.0 * std::f64::consts::PI).ln()).max(1.0).sqrt();
    for _ in 0..50 {
        let lt = ln_std_normal_upper_tail(z);
        let hazard = (std_normal_ln_pdf(z) - lt).exp();
        let step = (lt - ln_tail) / hazard;
        z += step;
        if step.abs() <= 1e-15 * z {
            break;
        }
    }
    z
}
