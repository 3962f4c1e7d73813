//! Self-contained numerical kernels.

pub mod kernel;
pub mod linalg;
pub mod nnls;
pub mod special;

use alloc::vec::Vec;

pub use kernel::Kernel;
pub use linalg::{cholesky, solve_lower, solve_upper_transpose, Cholesky, Matrix, RidgePolicy};
pub use nnls::{nnls, NnlsSolution};
pub use special::{bessel_j0, normal_cdf};

/// Median of a slice (reorders it). Returns NaN for empty input.
pub fn median(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// `n` equally spaced values from `start` to `end` inclusive.
pub fn linspace(start: f64, end: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => alloc::vec![start],
        _ => (0..n)
            .map(|k| if k == n - 1 { end } else { start + (end - start) * k as f64 / (n - 1) as f64 })
            .collect(),
    }
}

/// `n` log-spaced values from `start` to `end` inclusive (both positive).
pub fn logspace(start: f64, end: f64, n: usize) -> Vec<f64> {
    let (a, b) = (libm::log(start), libm::log(end));
    linspace(a, b, n)
        .into_iter()
        .enumerate()
        .map(|(k, v)| match k {
            0 => start,
            k if k + 1 == n => end,
            _ => libm::exp(v),
        })
        .collect()
}

/// Mean and sample standard deviation.
pub fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean) * (v - mean)).sum();
    (mean, libm::sqrt(ss / (n - 1) as f64))
}
