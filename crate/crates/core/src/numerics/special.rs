//! Bessel J0 and the standard normal distribution function.

use core::f64::consts::{FRAC_PI_4, PI, SQRT_2};

/// Below this argument the power series is used, above it the Hankel asymptotic
/// expansion. The asymptotic series cannot reach 1e-10 much below x = 12.
const J0_SERIES_LIMIT: f64 = 12.0;

/// Bessel function of the first kind of order zero.
pub fn bessel_j0(x: f64) -> f64 {
    let x = x.abs();
    if x <= J0_SERIES_LIMIT {
        j0_series(x)
    } else {
        j0_asymptotic(x)
    }
}

fn j0_series(x: f64) -> f64 {
    let q = -0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..200 {
        term *= q / (k * k) as f64;
        sum += term;
        if term.abs() < 1e-17 * sum.abs().max(1e-3) {
            break;
        }
    }
    sum
}

fn j0_asymptotic(x: f64) -> f64 {
    // t_k = prod_{i<=k} (2i-1)^2 / (k! (8x)^k)
    let mut p = 1.0;
    let mut q = 0.0;
    let mut t: f64 = 1.0;
    let mut prev = f64::INFINITY;
    for k in 1..60 {
        let odd = (2 * k - 1) as f64;
        t *= odd * odd / (k as f64 * 8.0 * x);
        if t > prev || t < 1e-18 {
            break;
        }
        prev = t;
        let sign = if (k / 2 + k % 2) % 2 == 0 { 1.0 } else { -1.0 };
        if k % 2 == 0 {
            p += sign * t;
        } else {
            q += sign * t;
        }
    }
    let chi = x - FRAC_PI_4;
    libm::sqrt(2.0 / (PI * x)) * (p * libm::cos(chi) - q * libm::sin(chi))
}

/// Standard normal distribution function `P(Z <= z)`.
pub fn normal_cdf(z: f64) -> f64 {
    if z.is_nan() {
        return f64::NAN;
    }
    0.5 * libm::erfc(-z / SQRT_2)
}
