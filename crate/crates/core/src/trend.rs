//! Multivariate local linear trend estimation and bandwidth selection.
//!
//! At a location `x` the estimator solves the kernel-weighted least squares
//! problem
//!
//! ```text
//! min_{a, b} sum_i (Y_i - a - b^T (x_i - x))^2 K_H(x_i - x)
//! ```
//!
//! and returns `a = e1^T (X^T W X)^{-1} X^T W Y = s_x^T Y`. Stacking `s_{x_i}^T`
//! for the sample locations gives the smoother (hat) matrix `S`.

use alloc::vec;
use alloc::vec::Vec;

use crate::geometry::{median_nearest_neighbor, BandwidthMatrix, Point, SpatialSample};
use crate::maybe_rayon::*;
use crate::numerics::linalg::{dot, solve_small, Matrix};
use crate::numerics::{logspace, Kernel};
use crate::{Error, Result};

/// Kernel choice and neighbor admissibility for the local fits.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SmootherOptions {
    pub kernel: Kernel,
    /// Points with nonzero weight required at every evaluation location.
    pub min_neighbors: usize,
}

impl Default for SmootherOptions {
    fn default() -> Self {
        // 3 (d + 1) with d = 2
        Self { kernel: Kernel::Triweight, min_neighbors: 9 }
    }
}

/// Local linear weight vector `s_x` at `x`.
pub fn local_linear_weights(
    sample: &SpatialSample,
    x: Point,
    bandwidth: &BandwidthMatrix,
    opts: &SmootherOptions,
) -> Result<Vec<f64>> {
    weights_at(sample.locations(), x, bandwidth, opts).map_err(|neighbors| Error::BandwidthTooSmall {
        location: 0,
        neighbors,
        required: opts.min_neighbors,
    })
}

/// Returns the dense weight vector, or the number of points with nonzero
/// kernel weight when the local design is not admissible.
fn weights_at(
    locations: &[Point],
    x: Point,
    bandwidth: &BandwidthMatrix,
    opts: &SmootherOptions,
) -> core::result::Result<Vec<f64>, usize> {
    let n = locations.len();
    let mut w = vec![0.0; n];
    let mut a = [[0.0; 3]; 3];
    let mut neighbors = 0;
    for (i, p) in locations.iter().enumerate() {
        let d = [p[0] - x[0], p[1] - x[1]];
        let k = opts.kernel.product(bandwidth.inverse_apply(d));
        if k == 0.0 {
            continue;
        }
        neighbors += 1;
        w[i] = k;
        let row = [1.0, d[0], d[1]];
        for r in 0..3 {
            for c in 0..3 {
                a[r][c] += k * row[r] * row[c];
            }
        }
    }
    if neighbors < opts.min_neighbors.max(1) {
        return Err(neighbors);
    }
    let z = match solve_small(a, [1.0, 0.0, 0.0]) {
        Some(z) => z,
        None => {
            let ridge = 1e-10 * (a[0][0] + a[1][1] + a[2][2]);
            for r in 0..3 {
                a[r][r] += ridge;
            }
            solve_small(a, [1.0, 0.0, 0.0]).ok_or(neighbors)?
        }
    };
    for (i, p) in locations.iter().enumerate() {
        if w[i] != 0.0 {
            w[i] *= z[0] + z[1] * (p[0] - x[0]) + z[2] * (p[1] - x[1]);
        }
    }
    Ok(w)
}

/// Hat matrix of the local linear smoother at the sample locations.
#[derive(Debug, Clone, PartialEq)]
pub struct SmootherMatrix {
    matrix: Matrix,
    bandwidth: BandwidthMatrix,
    kernel: Kernel,
}

impl SmootherMatrix {
    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn bandwidth(&self) -> BandwidthMatrix {
        self.bandwidth
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    pub fn apply(&self, y: &[f64]) -> Vec<f64> {
        self.matrix.mul_vec(y)
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace()
    }

    /// Wraps an explicit matrix (used to evaluate the criteria on hypothetical smoothers).
    pub fn from_matrix(matrix: Matrix, bandwidth: BandwidthMatrix, kernel: Kernel) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::DimensionMismatch("smoother matrix must be square".into()));
        }
        Ok(Self { matrix, bandwidth, kernel })
    }
}

pub fn smoother_matrix(
    sample: &SpatialSample,
    bandwidth: &BandwidthMatrix,
    opts: &SmootherOptions,
) -> Result<SmootherMatrix> {
    let locs = sample.locations();
    let n = locs.len();
    let rows: Vec<core::result::Result<Vec<f64>, usize>> =
        range(n).map(|i| weights_at(locs, locs[i], bandwidth, opts)).collect();
    let mut data = Vec::with_capacity(n * n);
    for (i, row) in rows.into_iter().enumerate() {
        match row {
            Ok(r) => data.extend_from_slice(&r),
            Err(neighbors) => {
                return Err(Error::BandwidthTooSmall { location: i, neighbors, required: opts.min_neighbors })
            }
        }
    }
    Ok(SmootherMatrix { matrix: Matrix::from_row_major(n, n, data), bandwidth: *bandwidth, kernel: opts.kernel })
}

/// Fitted trend `S Y` and residuals `Y - S Y`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrendFit {
    pub sample: SpatialSample,
    pub smoother: SmootherMatrix,
    pub fitted: Vec<f64>,
    pub residuals: Vec<f64>,
    pub options: SmootherOptions,
}

impl TrendFit {
    pub fn bandwidth(&self) -> BandwidthMatrix {
        self.smoother.bandwidth
    }
}

pub fn fit_trend(sample: &SpatialSample, bandwidth: &BandwidthMatrix, opts: &SmootherOptions) -> Result<TrendFit> {
    let smoother = smoother_matrix(sample, bandwidth, opts)?;
    Ok(fit_with_smoother(sample, smoother, opts))
}

/// Fit reusing a precomputed smoother matrix for the same locations.
pub fn fit_with_smoother(sample: &SpatialSample, smoother: SmootherMatrix, opts: &SmootherOptions) -> TrendFit {
    let fitted = smoother.apply(sample.values());
    let residuals = sample.values().iter().zip(&fitted).map(|(y, m)| y - m).collect();
    TrendFit { sample: sample.clone(), smoother, fitted, residuals, options: *opts }
}

/// Local linear weights at arbitrary targets, with rows of singular targets masked.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetSmoother {
    weights: Matrix,
    valid: Vec<bool>,
}

impl TargetSmoother {
    pub fn new(
        sample: &SpatialSample,
        bandwidth: &BandwidthMatrix,
        targets: &[Point],
        opts: &SmootherOptions,
    ) -> Self {
        let n = sample.len();
        let rows: Vec<Option<Vec<f64>>> =
            range(targets.len()).map(|t| weights_at(sample.locations(), targets[t], bandwidth, opts).ok()).collect();
        let mut weights = Matrix::zeros(targets.len(), n);
        let mut valid = Vec::with_capacity(targets.len());
        for (t, row) in rows.into_iter().enumerate() {
            valid.push(row.is_some());
            if let Some(r) = row {
                weights.row_mut(t).copy_from_slice(&r);
            }
        }
        Self { weights, valid }
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn is_valid(&self, target: usize) -> bool {
        self.valid[target]
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    pub fn masked(&self) -> Vec<usize> {
        self.valid.iter().enumerate().filter(|(_, v)| !**v).map(|(i, _)| i).collect()
    }

    /// Predictions at every target (`None` where masked).
    pub fn apply(&self, y: &[f64]) -> Vec<Option<f64>> {
        (0..self.valid.len()).map(|t| self.valid[t].then(|| dot(self.weights.row(t), y))).collect()
    }
}

/// Trend estimate at the targets with the fit's bandwidth.
pub fn predict_trend(fit: &TrendFit, targets: &[Point]) -> Result<Vec<f64>> {
    let ts = TargetSmoother::new(&fit.sample, &fit.bandwidth(), targets, &fit.options);
    let masked = ts.masked();
    if !masked.is_empty() {
        return Err(Error::SingularTargets { targets: masked });
    }
    Ok(ts.apply(fit.sample.values()).into_iter().map(|v| v.unwrap()).collect())
}

/// Trend estimate at the targets, `None` where the local design is singular.
pub fn predict_trend_masked(fit: &TrendFit, targets: &[Point]) -> Vec<Option<f64>> {
    TargetSmoother::new(&fit.sample, &fit.bandwidth(), targets, &fit.options).apply(fit.sample.values())
}

fn residual_sum_of_squares(sample: &SpatialSample, smoother: &SmootherMatrix) -> f64 {
    let fitted = smoother.apply(sample.values());
    sample.values().iter().zip(&fitted).map(|(y, m)| (y - m) * (y - m)).sum()
}

/// Leave-one-out cross-validation through the hat-diagonal shortcut.
pub fn cv_score(sample: &SpatialSample, smoother: &SmootherMatrix) -> Result<f64> {
    let fitted = smoother.apply(sample.values());
    let n = sample.len() as f64;
    let mut total = 0.0;
    for (i, (y, m)) in sample.values().iter().zip(&fitted).enumerate() {
        let denom = 1.0 - smoother.matrix[(i, i)];
        if denom <= 1e-10 {
            return Err(Error::DegenerateBandwidth { ratio: smoother.matrix[(i, i)] });
        }
        let r = (y - m) / denom;
        total += r * r;
    }
    Ok(total / n)
}

fn gcv_with_ratio(sample: &SpatialSample, smoother: &SmootherMatrix, ratio: f64) -> Result<f64> {
    if !(ratio < 1.0) {
        return Err(Error::DegenerateBandwidth { ratio });
    }
    let n = sample.len() as f64;
    let denom = 1.0 - ratio;
    Ok(residual_sum_of_squares(sample, smoother) / (n * denom * denom))
}

/// Classical generalized cross-validation.
pub fn gcv_score(sample: &SpatialSample, smoother: &SmootherMatrix) -> Result<f64> {
    gcv_with_ratio(sample, smoother, smoother.trace() / sample.len() as f64)
}

/// Generalized cross-validation with the denominator corrected by `tr(S R) / n`.
pub fn cgcv_score(sample: &SpatialSample, smoother: &SmootherMatrix, correlation: &Matrix) -> Result<f64> {
    let n = sample.len();
    if correlation.rows() != n || correlation.cols() != n {
        return Err(Error::DimensionMismatch("correlation matrix does not match sample".into()));
    }
    let s = &smoother.matrix;
    // tr(S R) = sum_ij S_ij R_ji
    let mut tr = 0.0;
    for i in 0..n {
        for (j, &v) in s.row(i).iter().enumerate() {
            if v != 0.0 {
                tr += v * correlation[(j, i)];
            }
        }
    }
    gcv_with_ratio(sample, smoother, tr / n as f64)
}

/// Mean average squared error `|Sm - m|^2 / n + tr(S Sigma S^T) / n`.
pub fn mase_score(smoother: &SmootherMatrix, true_trend: &[f64], covariance: &Matrix) -> Result<f64> {
    let n = smoother.dim();
    if true_trend.len() != n || covariance.rows() != n || covariance.cols() != n {
        return Err(Error::DimensionMismatch("MASE inputs do not match the smoother".into()));
    }
    let sm = smoother.apply(true_trend);
    let bias: f64 = sm.iter().zip(true_trend).map(|(a, b)| (a - b) * (a - b)).sum();
    let s = &smoother.matrix;
    let t = s.matmul(covariance);
    let variance: f64 = t.as_slice().iter().zip(s.as_slice()).map(|(a, b)| a * b).sum();
    Ok((bias + variance) / n as f64)
}

/// Bandwidth selection criterion.
#[derive(Debug, Clone, Copy)]
pub enum Criterion<'a> {
    Cv,
    Gcv,
    Cgcv { correlation: &'a Matrix },
    Mase { true_trend: &'a [f64], covariance: &'a Matrix },
}

impl Criterion<'_> {
    pub fn score(&self, sample: &SpatialSample, smoother: &SmootherMatrix) -> Result<f64> {
        match *self {
            Criterion::Cv => cv_score(sample, smoother),
            Criterion::Gcv => gcv_score(sample, smoother),
            Criterion::Cgcv { correlation } => cgcv_score(sample, smoother, correlation),
            Criterion::Mase { true_trend, covariance } => mase_score(smoother, true_trend, covariance),
        }
    }
}

/// Candidate bandwidth matrices for exhaustive search.
#[derive(Debug, Clone, PartialEq)]
pub struct BandwidthGrid {
    candidates: Vec<BandwidthMatrix>,
}

impl BandwidthGrid {
    pub fn from_candidates(candidates: Vec<BandwidthMatrix>) -> Self {
        Self { candidates }
    }

    /// `per_axis x per_axis` diagonal bandwidths, log-spaced between `lo` and `hi` on each axis.
    pub fn log_spaced(lo: [f64; 2], hi: [f64; 2], per_axis: usize) -> Result<Self> {
        if !(lo[0] > 0.0 && lo[1] > 0.0 && hi[0] >= lo[0] && hi[1] >= lo[1]) || per_axis == 0 {
            return Err(Error::InvalidInput(alloc::format!("invalid bandwidth grid {lo:?}..{hi:?}")));
        }
        let xs = logspace(lo[0], hi[0], per_axis);
        let ys = logspace(lo[1], hi[1], per_axis);
        let mut candidates = Vec::with_capacity(per_axis * per_axis);
        for &hx in &xs {
            for &hy in &ys {
                candidates.push(BandwidthMatrix::diagonal(hx, hy)?);
            }
        }
        Ok(Self { candidates })
    }

    /// 10 x 10 grid from half the median nearest-neighbor spacing up to the data range per axis.
    pub fn default_for(sample: &SpatialSample) -> Result<Self> {
        let delta = median_nearest_neighbor(sample.locations());
        let b = sample.bounds();
        let range = [b[0].1 - b[0].0, b[1].1 - b[1].0];
        let lo = [0.5 * delta, 0.5 * delta];
        let hi = [range[0].max(lo[0]), range[1].max(lo[1])];
        if !(delta > 0.0) {
            return Err(Error::InvalidInput("bandwidth grid needs at least two distinct locations".into()));
        }
        Self::log_spaced(lo, hi, 10)
    }

    pub fn candidates(&self) -> &[BandwidthMatrix] {
        &self.candidates
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BandwidthSelection {
    pub bandwidth: BandwidthMatrix,
    pub score: f64,
    /// Criterion value per candidate, `None` where inadmissible.
    pub scores: Vec<Option<f64>>,
}

/// Exhaustive search; ties go to the larger determinant.
pub fn select_bandwidth(
    sample: &SpatialSample,
    criterion: Criterion<'_>,
    grid: &BandwidthGrid,
    opts: &SmootherOptions,
) -> Result<BandwidthSelection> {
    if grid.is_empty() {
        return Err(Error::InvalidInput("empty bandwidth search grid".into()));
    }
    let cands = grid.candidates();
    let scores: Vec<Option<f64>> = range(cands.len())
        .map(|c| {
            let s = smoother_matrix(sample, &cands[c], opts).ok()?;
            criterion.score(sample, &s).ok().filter(|v| v.is_finite())
        })
        .collect();
    let best = best_candidate(&scores, cands);
    match best {
        Some((c, score)) => Ok(BandwidthSelection { bandwidth: cands[c], score, scores }),
        None => Err(Error::NoAdmissibleBandwidth { smallest_admissible: smallest_admissible_by_doubling(sample, grid, opts) }),
    }
}

fn best_candidate(scores: &[Option<f64>], cands: &[BandwidthMatrix]) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (c, score) in scores.iter().enumerate() {
        let Some(score) = *score else { continue };
        best = match best {
            Some((b, bs)) if !(score < bs || (score == bs && cands[c].determinant() > cands[b].determinant())) => {
                Some((b, bs))
            }
            _ => Some((c, score)),
        };
    }
    best
}

fn smallest_admissible_by_doubling(
    sample: &SpatialSample,
    grid: &BandwidthGrid,
    opts: &SmootherOptions,
) -> Option<[f64; 2]> {
    let largest = grid
        .candidates()
        .iter()
        .copied()
        .max_by(|a, b| a.determinant().total_cmp(&b.determinant()))?;
    let mut scale = 1.0;
    for _ in 0..40 {
        let h = largest.scaled(scale).ok()?;
        if smoother_matrix(sample, &h, opts).is_ok() {
            return Some(h.diag());
        }
        scale *= 2.0;
    }
    None
}
