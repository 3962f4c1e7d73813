//! Trend/variogram pipeline and the semiparametric bootstrap for exceedance probabilities.
//!
//! A bootstrap replicate draws `e*` with replacement from the centered
//! decorrelated residuals, forms `Y* = m_hat + L e*`, refits the trend with
//! the same bandwidth and adds the simple kriging prediction of the refitted
//! residuals. Both steps are linear in `Y*`, so for fixed targets they are
//! folded into one operator `P + Lambda (I - S)` built once per fit.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::error::StageExt;
use crate::geometry::{pairwise_distances, BandwidthMatrix, Point, RegularGrid, SpatialSample};
use crate::kriging::KrigingSystem;
use crate::maybe_rayon::*;
use crate::numerics::linalg::{cholesky, dot, solve_lower, Cholesky, Matrix, RidgePolicy};
use crate::rng::{stream, Domain};
use crate::trend::{
    fit_trend, fit_with_smoother, select_bandwidth, BandwidthGrid, Criterion, SmootherMatrix, SmootherOptions,
    TargetSmoother, TrendFit,
};
use crate::variogram::{
    bias_corrected_variogram, correlation_matrix, covariance_matrix, default_bandwidth_candidates, fit_shapiro_botha,
    select_variogram_bandwidth, CorrectedVariogram, CorrectionOptions, KernelDimension, LagGrid, PairSet, Variogram,
    VariogramModel, VariogramOptions,
};
use crate::{Error, Result};

/// How the trend bandwidth is obtained.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum TrendBandwidth {
    /// CV pilot, then CGCV refreshes with the current corrected variogram.
    Iterative { max_outer: usize, per_axis: usize },
    Fixed(BandwidthMatrix),
}

impl Default for TrendBandwidth {
    fn default() -> Self {
        TrendBandwidth::Iterative { max_outer: 2, per_axis: 10 }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PipelineConfig {
    pub trend: TrendBandwidth,
    pub smoother: SmootherOptions,
    pub variogram: VariogramOptions,
    pub correction: CorrectionOptions,
    /// Fixed variogram bandwidth; selected by cross-validation when `None`.
    pub variogram_bandwidth: Option<f64>,
    pub lag_count: usize,
    pub lag_fraction: f64,
    pub kernel_dimension: KernelDimension,
    pub nodes: Option<usize>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            trend: TrendBandwidth::default(),
            smoother: SmootherOptions::default(),
            variogram: VariogramOptions::default(),
            correction: CorrectionOptions::default(),
            variogram_bandwidth: None,
            lag_count: 25,
            lag_fraction: 0.55,
            kernel_dimension: KernelDimension::Infinite,
            nodes: None,
        }
    }
}

/// One pass of trend fit and variogram estimation.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OuterIteration {
    pub bandwidth: [[f64; 2]; 2],
    pub variogram_bandwidth: f64,
    pub residual_sill: f64,
    pub corrected_sill: f64,
    pub correction_steps: usize,
    pub correction_converged: bool,
}

#[derive(Debug, Clone)]
pub struct PipelineFit {
    pub trend: TrendFit,
    pub distances: Matrix,
    pub lags: LagGrid,
    pub variogram_bandwidth: f64,
    pub variograms: CorrectedVariogram,
    pub residual_model: VariogramModel,
    pub corrected_model: VariogramModel,
    pub residual_factor: Cholesky,
    pub corrected_factor: Cholesky,
    pub report: Vec<OuterIteration>,
}

impl PipelineFit {
    pub fn bandwidth(&self) -> BandwidthMatrix {
        self.trend.bandwidth()
    }

    pub fn sample(&self) -> &SpatialSample {
        &self.trend.sample
    }
}

struct Pass {
    trend: TrendFit,
    g: f64,
    variograms: CorrectedVariogram,
    residual_model: VariogramModel,
    corrected_model: VariogramModel,
}

fn run_pass(
    trend: TrendFit,
    pairs: &PairSet,
    distances: &Matrix,
    lags: &LagGrid,
    config: &PipelineConfig,
) -> Result<Pass> {
    let g = match config.variogram_bandwidth {
        Some(g) => g,
        None => {
            let cands = default_bandwidth_candidates(lags);
            select_variogram_bandwidth(&trend.residuals, pairs, lags, &cands, &config.variogram)
                .stage("variogram bandwidth")?
                .bandwidth
        }
    };
    let variograms = bias_corrected_variogram(&trend, pairs, distances, lags, g, &config.variogram, &config.correction)
        .stage("bias correction")?;
    let residual_model =
        fit_shapiro_botha(&variograms.uncorrected, config.kernel_dimension, config.nodes).stage("residual variogram model")?;
    let corrected_model =
        fit_shapiro_botha(&variograms.estimate, config.kernel_dimension, config.nodes).stage("corrected variogram model")?;
    Ok(Pass { trend, g, variograms, residual_model, corrected_model })
}

fn close(a: &BandwidthMatrix, b: &BandwidthMatrix) -> bool {
    let (x, y) = (a.entries(), b.entries());
    (0..2).all(|i| (x[i][i] - y[i][i]).abs() < 0.01 * y[i][i].abs())
}

/// Runs the alternating trend/variogram estimation.
pub fn fit_pipeline(sample: &SpatialSample, config: &PipelineConfig) -> Result<PipelineFit> {
    fit_pipeline_cached(sample, config, None)
}

/// As [`fit_pipeline`], reusing `smoother` when the bandwidth is fixed to the smoother's own.
pub fn fit_pipeline_cached(
    sample: &SpatialSample,
    config: &PipelineConfig,
    smoother: Option<&SmootherMatrix>,
) -> Result<PipelineFit> {
    let distances = pairwise_distances(sample.locations());
    let pairs = PairSet::from_distances(&distances).stage("pair set")?;
    let lags = LagGrid::regular(pairs.max_distance(), config.lag_fraction, config.lag_count).stage("lag grid")?;

    let (mut h, max_outer, per_axis) = match &config.trend {
        TrendBandwidth::Fixed(h) => (*h, 1, 0),
        TrendBandwidth::Iterative { max_outer, per_axis } => {
            let grid = if *per_axis == 10 {
                BandwidthGrid::default_for(sample)
            } else {
                default_grid(sample, *per_axis)
            }
            .stage("trend bandwidth")?;
            let h0 = select_bandwidth(sample, Criterion::Cv, &grid, &config.smoother).stage("pilot bandwidth")?.bandwidth;
            (h0, (*max_outer).max(1), *per_axis)
        }
    };

    let mut report = Vec::new();
    let mut pass;
    let mut outer = 0;
    loop {
        let trend = match smoother {
            Some(s) if s.bandwidth() == h && s.dim() == sample.len() => fit_with_smoother(sample, s.clone(), &config.smoother),
            _ => fit_trend(sample, &h, &config.smoother).stage("trend fit")?,
        };
        pass = run_pass(trend, &pairs, &distances, &lags, config)?;
        outer += 1;
        report.push(OuterIteration {
            bandwidth: h.entries(),
            variogram_bandwidth: pass.g,
            residual_sill: pass.residual_model.sill(),
            corrected_sill: pass.corrected_model.sill(),
            correction_steps: pass.variograms.iterations,
            correction_converged: pass.variograms.converged,
        });
        if outer >= max_outer {
            break;
        }
        let sigma = covariance_matrix(&pass.corrected_model, &distances);
        let r = match correlation_matrix(&sigma) {
            Ok(r) => r,
            // A zero corrected sill leaves no dependence to correct for.
            Err(Error::NonPositiveDiagonal { .. }) => Matrix::identity(sample.len()),
            Err(e) => return Err(e.at_stage("correlation matrix")),
        };
        let grid = default_grid(sample, per_axis).stage("trend bandwidth")?;
        let h1 = select_bandwidth(sample, Criterion::Cgcv { correlation: &r }, &grid, &config.smoother)
            .stage("cgcv bandwidth")?
            .bandwidth;
        if close(&h1, &h) {
            break;
        }
        h = h1;
    }

    let residual_factor = cholesky(&covariance_matrix(&pass.residual_model, &distances), RidgePolicy::Auto)
        .stage("residual covariance factorization")?;
    let corrected_factor = cholesky(&covariance_matrix(&pass.corrected_model, &distances), RidgePolicy::Auto)
        .stage("corrected covariance factorization")?;
    Ok(PipelineFit {
        trend: pass.trend,
        distances,
        lags,
        variogram_bandwidth: pass.g,
        variograms: pass.variograms,
        residual_model: pass.residual_model,
        corrected_model: pass.corrected_model,
        residual_factor,
        corrected_factor,
        report,
    })
}

fn default_grid(sample: &SpatialSample, per_axis: usize) -> Result<BandwidthGrid> {
    let full = BandwidthGrid::default_for(sample)?;
    if per_axis == 10 || per_axis == 0 {
        return Ok(full);
    }
    let c = full.candidates();
    let lo = c[0].diag();
    let hi = c[c.len() - 1].diag();
    BandwidthGrid::log_spaced(lo, hi, per_axis)
}

/// `e = L^{-1} residuals`, centered.
pub fn decorrelate_residuals(factor: &Cholesky, residuals: &[f64]) -> Vec<f64> {
    let mut e = solve_lower(factor, residuals);
    let mean = e.iter().sum::<f64>() / e.len() as f64;
    e.iter_mut().for_each(|v| *v -= mean);
    e
}

/// Linear map from data-location responses to trend-plus-kriging predictions at targets.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionOperator {
    matrix: Matrix,
    valid: Vec<bool>,
}

impl PredictionOperator {
    /// Rows `p_t + lambda_t - S^T lambda_t` for every target.
    pub fn new<V: Variogram + Sync>(
        target_smoother: &TargetSmoother,
        smoother: &Matrix,
        kriging: &KrigingSystem<V>,
        targets: &[Point],
    ) -> Result<Self> {
        let n = smoother.rows();
        let p = target_smoother.weights();
        if p.rows() != targets.len() || p.cols() != n || kriging.len() != n {
            return Err(Error::DimensionMismatch("prediction operator inputs disagree".into()));
        }
        let rows: Vec<Vec<f64>> = range(targets.len())
            .map(|t| {
                if !target_smoother.is_valid(t) {
                    return vec![0.0; n];
                }
                let lambda = kriging.weights(targets[t]);
                let mut row: Vec<f64> = p.row(t).iter().zip(&lambda).map(|(a, b)| a + b).collect();
                for (k, &l) in lambda.iter().enumerate() {
                    if l != 0.0 {
                        for (r, s) in row.iter_mut().zip(smoother.row(k)) {
                            *r -= l * s;
                        }
                    }
                }
                row
            })
            .collect();
        let mut matrix = Matrix::zeros(targets.len(), n);
        for (t, r) in rows.into_iter().enumerate() {
            matrix.row_mut(t).copy_from_slice(&r);
        }
        Ok(Self { matrix, valid: target_smoother.valid().to_vec() })
    }

    pub fn len(&self) -> usize {
        self.valid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.valid.is_empty()
    }

    pub fn valid(&self) -> &[bool] {
        &self.valid
    }

    pub fn masked(&self) -> usize {
        self.valid.iter().filter(|v| !**v).count()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    /// Predictions at targets, `None` where masked.
    pub fn apply(&self, y: &[f64]) -> Vec<Option<f64>> {
        (0..self.len()).map(|t| self.valid[t].then(|| dot(self.matrix.row(t), y))).collect()
    }
}

/// Everything a replicate needs: the fitted trend, the centered decorrelated
/// residuals, the factor used to recorrelate them and the prediction operator.
#[derive(Debug, Clone, Copy)]
pub struct BootstrapInputs<'a> {
    pub fitted: &'a [f64],
    pub e: &'a [f64],
    pub factor: &'a Cholesky,
    pub operator: &'a PredictionOperator,
}

fn replicate_into(inputs: &BootstrapInputs<'_>, rng: &mut impl Rng, e_star: &mut [f64], out: &mut [f64]) {
    let n = inputs.e.len();
    for v in e_star.iter_mut() {
        *v = inputs.e[rng.random_range(0..n)];
    }
    let eps = inputs.factor.mul_lower(e_star);
    let y: Vec<f64> = inputs.fitted.iter().zip(&eps).map(|(m, e)| m + e).collect();
    for (t, o) in out.iter_mut().enumerate() {
        *o = if inputs.operator.valid[t] { dot(inputs.operator.matrix.row(t), &y) } else { f64::NAN };
    }
}

/// Bootstrap responses `Y*` at the data locations.
pub fn bootstrap_sample(inputs: &BootstrapInputs<'_>, rng: &mut impl Rng) -> Vec<f64> {
    let n = inputs.e.len();
    let e_star: Vec<f64> = (0..n).map(|_| inputs.e[rng.random_range(0..n)]).collect();
    let eps = inputs.factor.mul_lower(&e_star);
    inputs.fitted.iter().zip(&eps).map(|(m, e)| m + e).collect()
}

/// One replicate `Y_hat*` at the targets (`None` where masked).
pub fn bootstrap_replicate(inputs: &BootstrapInputs<'_>, rng: &mut impl Rng) -> Vec<Option<f64>> {
    let mut e_star = vec![0.0; inputs.e.len()];
    let mut out = vec![0.0; inputs.operator.len()];
    replicate_into(inputs, rng, &mut e_star, &mut out);
    out.into_iter().map(|v| (!v.is_nan()).then_some(v)).collect()
}

/// Exceedance frequencies over `B` replicates at one threshold.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RiskMap {
    pub threshold: f64,
    /// `count / B` per target, `None` at masked targets.
    pub probabilities: Vec<Option<f64>>,
    pub counts: Vec<u32>,
    pub replicates: usize,
    pub seed: u64,
    pub masked: usize,
    pub grid: Option<RegularGrid>,
}

/// One map per threshold, all from the same `B` replicates.
pub fn risk_maps(inputs: &BootstrapInputs<'_>, thresholds: &[f64], replicates: usize, seed: u64) -> Result<Vec<RiskMap>> {
    if replicates == 0 {
        return Err(Error::InvalidInput("at least one bootstrap replicate required".into()));
    }
    if thresholds.iter().any(|c| c.is_nan()) {
        return Err(Error::InvalidInput("thresholds must not be NaN".into()));
    }
    let n = inputs.e.len();
    if inputs.fitted.len() != n || inputs.factor.dim() != n || inputs.operator.matrix.cols() != n {
        return Err(Error::DimensionMismatch("bootstrap inputs disagree in size".into()));
    }
    let targets = inputs.operator.len();
    let width = thresholds.len() * targets;
    let count_one = |mut acc: Vec<u32>, j: usize| {
        let mut rng = stream(seed, Domain::Bootstrap, j as u64);
        let mut e_star = vec![0.0; n];
        let mut out = vec![0.0; targets];
        replicate_into(inputs, &mut rng, &mut e_star, &mut out);
        for (k, &c) in thresholds.iter().enumerate() {
            let row = &mut acc[k * targets..(k + 1) * targets];
            for (slot, &v) in row.iter_mut().zip(&out) {
                if v >= c {
                    *slot += 1;
                }
            }
        }
        acc
    };
    #[cfg(feature = "parallel")]
    let counts = range(replicates)
        .fold(|| vec![0u32; width], count_one)
        .reduce(|| vec![0u32; width], |mut a, b| {
            a.iter_mut().zip(&b).for_each(|(x, y)| *x += y);
            a
        });
    #[cfg(not(feature = "parallel"))]
    let counts = range(replicates).fold(vec![0u32; width], count_one);

    let masked = inputs.operator.masked();
    Ok(thresholds
        .iter()
        .enumerate()
        .map(|(k, &c)| {
            let row = counts[k * targets..(k + 1) * targets].to_vec();
            let probabilities = row
                .iter()
                .zip(&inputs.operator.valid)
                .map(|(&cnt, &ok)| ok.then(|| cnt as f64 / replicates as f64))
                .collect();
            RiskMap { threshold: c, probabilities, counts: row, replicates, seed, masked, grid: None }
        })
        .collect())
}

/// Covariance used to generate and krige the bootstrap errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Mode {
    /// True error covariance (simulation only).
    Theoretical,
    /// Variogram of the raw residuals.
    Residual,
    /// Bias-corrected variogram.
    Corrected,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Theoretical, Mode::Residual, Mode::Corrected];

    pub fn name(self) -> &'static str {
        match self {
            Mode::Theoretical => "theoretical",
            Mode::Residual => "residual",
            Mode::Corrected => "corrected",
        }
    }
}

/// True covariance factor and the matching prediction operator.
#[derive(Debug, Clone)]
pub struct Truth {
    pub factor: Cholesky,
    pub operator: PredictionOperator,
}

impl Truth {
    pub fn new<V: Variogram + Sync + Clone>(
        locations: &[Point],
        model: &V,
        smoother: &Matrix,
        target_smoother: &TargetSmoother,
        targets: &[Point],
    ) -> Result<Self> {
        let kriging = KrigingSystem::new(locations, model.clone())?;
        let operator = PredictionOperator::new(target_smoother, smoother, &kriging, targets)?;
        Ok(Self { factor: kriging.factor().clone(), operator })
    }
}

impl PipelineFit {
    /// Prediction operator under the fitted residual or corrected covariance.
    pub fn operator(&self, mode: Mode, targets: &[Point], target_smoother: Option<&TargetSmoother>) -> Result<PredictionOperator> {
        let model = match mode {
            Mode::Residual => &self.residual_model,
            Mode::Corrected => &self.corrected_model,
            Mode::Theoretical => {
                return Err(Error::InvalidInput("theoretical mode requires the simulation truth".into()));
            }
        };
        let owned;
        let ts = match target_smoother {
            Some(ts) => ts,
            None => {
                owned = TargetSmoother::new(self.sample(), &self.bandwidth(), targets, &self.trend.options);
                &owned
            }
        };
        let kriging = KrigingSystem::new(self.sample().locations(), model.clone()).stage("kriging system")?;
        PredictionOperator::new(ts, self.trend.smoother.matrix(), &kriging, targets)
    }

    /// Risk maps for `mode`; `truth` is required for [`Mode::Theoretical`].
    pub fn risk_maps(
        &self,
        mode: Mode,
        targets: &[Point],
        thresholds: &[f64],
        replicates: usize,
        seed: u64,
        truth: Option<&Truth>,
    ) -> Result<Vec<RiskMap>> {
        let (e, factor, owned, operator);
        match mode {
            Mode::Theoretical => {
                let t = truth.ok_or_else(|| Error::InvalidInput("theoretical mode requires the simulation truth".into()))?;
                e = decorrelate_residuals(&t.factor, &self.trend.residuals);
                factor = &t.factor;
                operator = &t.operator;
            }
            Mode::Residual | Mode::Corrected => {
                e = decorrelate_residuals(&self.residual_factor, &self.trend.residuals);
                factor = if mode == Mode::Residual { &self.residual_factor } else { &self.corrected_factor };
                owned = self.operator(mode, targets, None)?;
                operator = &owned;
            }
        }
        let inputs = BootstrapInputs { fitted: &self.trend.fitted, e: &e, factor, operator };
        risk_maps(&inputs, thresholds, replicates, seed)
    }

    /// As [`PipelineFit::risk_maps`] on the nodes of `grid`.
    pub fn risk_maps_on_grid(
        &self,
        mode: Mode,
        grid: &RegularGrid,
        thresholds: &[f64],
        replicates: usize,
        seed: u64,
    ) -> Result<Vec<RiskMap>> {
        let mut maps = self.risk_maps(mode, &grid.nodes(), thresholds, replicates, seed, None)?;
        maps.iter_mut().for_each(|m| m.grid = Some(grid.clone()));
        Ok(maps)
    }
}
