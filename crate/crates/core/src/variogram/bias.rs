//! Residual bias matrix and the iterative bias-corrected pilot estimate.

use alloc::vec::Vec;

use super::empirical::{empirical_variogram, EmpiricalVariogram, LagGrid, PairSet, VariogramOptions};
use crate::numerics::linalg::Matrix;
use crate::trend::TrendFit;
use crate::{Error, Result};

/// `B = S Sigma S^T - Sigma S^T - S Sigma`, so that `Var(e_hat) = Sigma + B`.
#[derive(Debug, Clone, PartialEq)]
pub struct BiasMatrix {
    pub matrix: Matrix,
}

pub fn bias_matrix(s: &Matrix, sigma: &Matrix) -> Result<BiasMatrix> {
    let n = s.rows();
    if !s.is_square() || sigma.rows() != n || sigma.cols() != n {
        return Err(Error::DimensionMismatch("bias matrix needs square S and Sigma of equal size".into()));
    }
    let s_sigma = s.matmul(sigma);
    let s_sigma_st = s_sigma.matmul_transpose(s);
    let sigma_st = sigma.matmul_transpose(s);
    Ok(BiasMatrix { matrix: s_sigma_st.sub(&sigma_st).sub(&s_sigma) })
}

/// Pseudo-covariances from a pilot semivariogram: `max(s2 - gamma(d_ij), 0)`
/// off the diagonal and `s2` on it, where `s2` is the largest pilot estimate.
pub fn pseudo_covariances(pilot: &EmpiricalVariogram, distances: &Matrix) -> Result<Matrix> {
    if pilot.lags.is_empty() {
        return Err(Error::InvalidInput("empty pilot variogram".into()));
    }
    if !distances.is_square() {
        return Err(Error::DimensionMismatch("distance matrix must be square".into()));
    }
    let sill = pilot.max_estimate();
    let n = distances.rows();
    Ok(Matrix::from_fn(n, n, |i, j| {
        if i == j {
            sill
        } else {
            (sill - pilot.interpolate(distances[(i, j)])).max(0.0)
        }
    }))
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CorrectionOptions {
    pub max_iter: usize,
    /// Stop when the sup-norm change relative to the sup-norm of the previous estimate drops below this.
    pub tol: f64,
}

impl Default for CorrectionOptions {
    fn default() -> Self {
        Self { max_iter: 10, tol: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrectedVariogram {
    pub estimate: EmpiricalVariogram,
    pub uncorrected: EmpiricalVariogram,
    pub iterations: usize,
    pub converged: bool,
    /// Relative change after each correction step.
    pub changes: Vec<f64>,
}

fn relative_change(new: &[f64], old: &[f64], floor: f64) -> f64 {
    let diff = new.iter().zip(old).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let scale = old.iter().map(|v| v.abs()).fold(floor, f64::max);
    if diff == 0.0 {
        0.0
    } else if scale > 0.0 {
        diff / scale
    } else {
        f64::INFINITY
    }
}

/// Iterates pilot estimate, pseudo-covariances, bias matrix and corrected
/// estimate. Without convergence the iterate with the smallest change is returned.
pub fn bias_corrected_variogram(
    fit: &TrendFit,
    pairs: &PairSet,
    distances: &Matrix,
    lags: &LagGrid,
    g: f64,
    vopts: &VariogramOptions,
    copts: &CorrectionOptions,
) -> Result<CorrectedVariogram> {
    let s = fit.smoother.matrix();
    // changes below rounding noise of the data variance count as zero
    let values = fit.sample.values();
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let floor = 1e-12 * values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / values.len() as f64;
    let uncorrected = empirical_variogram(&fit.residuals, pairs, lags, g, None, vopts)?;
    let mut current = uncorrected.clone();
    let mut changes = Vec::new();
    let mut best: Option<(f64, EmpiricalVariogram, usize)> = None;
    for it in 1..=copts.max_iter {
        let c = pseudo_covariances(&current, distances)?;
        let b = bias_matrix(s, &c)?;
        let next = empirical_variogram(&fit.residuals, pairs, lags, g, Some(&b.matrix), vopts)?;
        let change = relative_change(&next.estimates, &current.estimates, floor);
        changes.push(change);
        log::trace!("bias correction step {it}: relative change {change:e}");
        current = next;
        if change < copts.tol {
            return Ok(CorrectedVariogram { estimate: current, uncorrected, iterations: it, converged: true, changes });
        }
        if best.as_ref().is_none_or(|(bc, _, _)| change < *bc) {
            best = Some((change, current.clone(), it));
        }
    }
    match best {
        None => Ok(CorrectedVariogram { estimate: current, uncorrected, iterations: 0, converged: false, changes }),
        Some((_, estimate, iterations)) => {
            log::debug!("bias correction did not converge in {} steps", copts.max_iter);
            Ok(CorrectedVariogram { estimate, uncorrected, iterations, converged: false, changes })
        }
    }
}
