//! Monte Carlo study: Gaussian fields around a known trend, true risk and squared-error summaries.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::bootstrap::{fit_pipeline_cached, Mode, PipelineConfig, PredictionOperator, TrendBandwidth, Truth};
use crate::error::StageExt;
use crate::geometry::{make_regular_grid, pairwise_distances, BandwidthMatrix, Point, RegularGrid, SpatialSample};
use crate::maybe_rayon::*;
use crate::numerics::linalg::{cholesky, Cholesky, Matrix, RidgePolicy};
use crate::numerics::{mean_sd, median, normal_cdf};
use crate::rng::{derive_seed, stream, Domain};
use crate::trend::{select_bandwidth, smoother_matrix, BandwidthGrid, Criterion, SmootherMatrix, TargetSmoother};
use crate::variogram::{covariance_matrix, Variogram};
use crate::{Error, Result};

/// `2.5 + sin(2 pi x1) + 4 (x2 - 0.5)^2`.
pub fn true_trend(x: Point) -> f64 {
    2.5 + libm::sin(2.0 * core::f64::consts::PI * x[0]) + 4.0 * (x[1] - 0.5) * (x[1] - 0.5)
}

/// Exponential semivariogram with practical range `r`; zero at the origin.
pub fn exp_variogram(u: f64, c0: f64, c1: f64, r: f64) -> f64 {
    if u == 0.0 {
        0.0
    } else {
        c0 + c1 * (1.0 - libm::exp(-3.0 * u / r))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExponentialVariogram {
    pub nugget: f64,
    pub partial_sill: f64,
    pub range: f64,
}

impl Variogram for ExponentialVariogram {
    fn semivariance(&self, u: f64) -> f64 {
        exp_variogram(u, self.nugget, self.partial_sill, self.range)
    }

    fn sill(&self) -> f64 {
        self.nugget + self.partial_sill
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Design {
    Regular,
    /// Fresh uniform locations on the unit square for every replicate.
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Scale {
    Desk,
    Full,
}

impl Scale {
    /// `(N, B, data side, prediction grid side)`.
    pub fn defaults(self) -> (usize, usize, usize, usize) {
        match self {
            Scale::Desk => (100, 200, 10, 25),
            Scale::Full => (1000, 1000, 20, 50),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scale::Desk => "desk",
            Scale::Full => "full",
        }
    }
}

/// Trend bandwidth rule used inside the study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum StudyBandwidth {
    /// MASE minimizer under the scenario truth.
    #[default]
    Mase,
    /// The data-driven CV then CGCV route of [`crate::bootstrap::fit_pipeline`].
    Cgcv,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Scenario {
    pub id: String,
    pub design: Design,
    /// Data locations per axis (`n = side^2` for both designs).
    pub side: usize,
    pub nugget: f64,
    pub partial_sill: f64,
    pub range: f64,
    pub thresholds: Vec<f64>,
    pub replicates: usize,
    pub bootstrap: usize,
    pub grid_side: usize,
    pub seed: u64,
    pub bandwidth: StudyBandwidth,
}

impl Scenario {
    fn base(id: &str, scale: Scale, range: f64, design: Design) -> Self {
        let (n_rep, b, side, grid_side) = scale.defaults();
        Self {
            id: id.to_string(),
            design,
            side,
            nugget: 0.04,
            partial_sill: 0.12,
            range,
            thresholds: vec![2.5],
            replicates: n_rep,
            bootstrap: b,
            grid_side,
            seed: 1,
            bandwidth: StudyBandwidth::Mase,
        }
    }

    /// `c = 2.5`, `sigma^2 = 0.16`, `r = 0.5`, `c0 = 0.04`, regular design.
    pub fn table1(scale: Scale) -> Self {
        Self::base("table1", scale, 0.5, Design::Regular)
    }

    /// table1 settings with practical range `r` (nugget 25% of the sill).
    pub fn table2(range: f64, scale: Scale) -> Self {
        Self::base(&alloc::format!("table2-r{range}"), scale, range, Design::Regular)
    }

    /// table1 settings with uniformly scattered locations.
    pub fn table3(scale: Scale) -> Self {
        Self::base("table3", scale, 0.5, Design::Uniform)
    }

    pub fn n(&self) -> usize {
        self.side * self.side
    }

    pub fn sill(&self) -> f64 {
        self.nugget + self.partial_sill
    }

    pub fn model(&self) -> ExponentialVariogram {
        ExponentialVariogram { nugget: self.nugget, partial_sill: self.partial_sill, range: self.range }
    }

    pub fn prediction_grid(&self) -> Result<RegularGrid> {
        make_regular_grid([(0.0, 1.0), (0.0, 1.0)], [self.grid_side, self.grid_side])
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidScenario(alloc::format!("{}: {m}", self.id)));
        if !(self.nugget >= 0.0 && self.nugget.is_finite()) {
            return bad("nugget must be finite and nonnegative");
        }
        if !(self.partial_sill > 0.0 && self.partial_sill.is_finite()) {
            return bad("partial sill must be positive");
        }
        if !(self.range > 0.0 && self.range.is_finite()) {
            return bad("practical range must be positive");
        }
        if self.side < 3 {
            return bad("need at least 3 locations per axis");
        }
        if self.replicates == 0 || self.bootstrap == 0 {
            return bad("replicate counts must be positive");
        }
        if self.grid_side == 0 {
            return bad("prediction grid is empty");
        }
        if self.thresholds.is_empty() || self.thresholds.iter().any(|c| !c.is_finite()) {
            return bad("need at least one finite threshold");
        }
        Ok(())
    }
}

/// `P(Y(x0) >= c)` for `Y(x0) ~ N(m(x0), sigma^2)`.
pub fn true_risk(x0: Point, c: f64, scenario: &Scenario) -> f64 {
    normal_cdf((true_trend(x0) - c) / libm::sqrt(scenario.sill()))
}

fn regular_locations(side: usize) -> Result<Vec<Point>> {
    Ok(make_regular_grid([(0.0, 1.0), (0.0, 1.0)], [side, side])?.nodes())
}

fn uniform_locations(n: usize, rng: &mut impl Rng) -> Vec<Point> {
    (0..n).map(|_| [rng.random::<f64>(), rng.random::<f64>()]).collect()
}

fn true_factor(locations: &[Point], model: &ExponentialVariogram) -> Result<Cholesky> {
    cholesky(&covariance_matrix(model, &pairwise_distances(locations)), RidgePolicy::Auto)
}

/// Field generator; the covariance factor is kept for regular designs.
#[derive(Debug, Clone)]
pub struct FieldSimulator {
    scenario: Scenario,
    fixed: Option<(Vec<Point>, Cholesky)>,
}

impl FieldSimulator {
    pub fn new(scenario: &Scenario) -> Result<Self> {
        scenario.validate()?;
        let fixed = match scenario.design {
            Design::Regular => {
                let locs = regular_locations(scenario.side)?;
                let l = true_factor(&locs, &scenario.model())?;
                Some((locs, l))
            }
            Design::Uniform => None,
        };
        Ok(Self { scenario: scenario.clone(), fixed })
    }

    /// Replicate `index`: `m(x) + L z` with `z` from the replicate's field stream.
    pub fn simulate(&self, index: u64) -> Result<SpatialSample> {
        let s = &self.scenario;
        let owned;
        let (locs, l) = match &self.fixed {
            Some((locs, l)) => (locs, l),
            None => {
                let mut rng = stream(s.seed, Domain::Design, index);
                let locs = uniform_locations(s.n(), &mut rng);
                let l = true_factor(&locs, &s.model())?;
                owned = (locs, l);
                (&owned.0, &owned.1)
            }
        };
        let mut rng = stream(s.seed, Domain::Field, index);
        let z: Vec<f64> = (0..locs.len()).map(|_| rng.sample(StandardNormal)).collect();
        let eps = l.mul_lower(&z);
        let values = locs.iter().zip(&eps).map(|(p, e)| true_trend(*p) + e).collect();
        SpatialSample::new(locs.clone(), values)
    }
}

pub fn simulate_field(scenario: &Scenario, index: u64) -> Result<SpatialSample> {
    FieldSimulator::new(scenario)?.simulate(index)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SeMetrics {
    pub mean: f64,
    pub median: f64,
    pub sd: f64,
    pub nodes: usize,
}

fn summarize(mut se: Vec<f64>) -> Result<SeMetrics> {
    if se.is_empty() {
        return Err(Error::InvalidInput("every node is masked".into()));
    }
    let (mean, sd) = mean_sd(&se);
    let nodes = se.len();
    let median = median(&mut se);
    Ok(SeMetrics { mean, median, sd, nodes })
}

fn squared_errors(truth: &[f64], estimate: &[Option<f64>]) -> Result<Vec<f64>> {
    if truth.len() != estimate.len() {
        return Err(Error::DimensionMismatch("true and estimated maps differ in size".into()));
    }
    Ok(truth.iter().zip(estimate).filter_map(|(t, e)| e.map(|e| (t - e) * (t - e))).collect())
}

/// Summary of `(r - r_hat)^2` over unmasked nodes.
pub fn se_metrics(true_map: &[f64], estimated_map: &[Option<f64>]) -> Result<SeMetrics> {
    summarize(squared_errors(true_map, estimated_map)?)
}

/// One line of the result table.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ResultRow {
    pub scenario: String,
    pub mode: Mode,
    pub threshold: f64,
    pub n: usize,
    pub replicates: usize,
    pub bootstrap: usize,
    pub mean_se: f64,
    pub median_se: f64,
    pub sd_se: f64,
    pub failures: usize,
}

/// Per-replicate diagnostics of the estimated quantities.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ReplicateRecord {
    pub index: usize,
    pub bandwidth: [f64; 2],
    pub variogram_bandwidth: f64,
    pub residual_sill: f64,
    pub corrected_sill: f64,
    pub masked: usize,
    /// Mean SE per (mode, threshold), modes outer.
    pub mean_se: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ScenarioResult {
    pub scenario: Scenario,
    pub modes: Vec<Mode>,
    pub rows: Vec<ResultRow>,
    pub records: Vec<ReplicateRecord>,
    pub failures: usize,
    /// False when more than 5% of replicates failed.
    pub valid: bool,
}

impl ScenarioResult {
    pub fn row(&self, mode: Mode, threshold: f64) -> Option<&ResultRow> {
        self.rows.iter().find(|r| r.mode == mode && r.threshold == threshold)
    }
}

/// Shared per-design quantities: the trend bandwidth, both smoothers and the truth operator.
#[derive(Debug, Clone)]
struct DesignCache {
    bandwidth: BandwidthMatrix,
    smoother: SmootherMatrix,
    targets: TargetSmoother,
    truth: Option<Truth>,
}

fn mase_bandwidth(sample: &SpatialSample, scenario: &Scenario, config: &PipelineConfig) -> Result<BandwidthMatrix> {
    let m: Vec<f64> = sample.locations().iter().map(|p| true_trend(*p)).collect();
    let sigma: Matrix = covariance_matrix(&scenario.model(), &pairwise_distances(sample.locations()));
    let grid = BandwidthGrid::default_for(sample)?;
    Ok(select_bandwidth(sample, Criterion::Mase { true_trend: &m, covariance: &sigma }, &grid, &config.smoother)?.bandwidth)
}

fn design_cache(
    sample: &SpatialSample,
    bandwidth: BandwidthMatrix,
    scenario: &Scenario,
    config: &PipelineConfig,
    nodes: &[Point],
    with_truth: bool,
) -> Result<DesignCache> {
    let smoother = smoother_matrix(sample, &bandwidth, &config.smoother)?;
    let targets = TargetSmoother::new(sample, &bandwidth, nodes, &config.smoother);
    let truth = if with_truth {
        Some(Truth::new(sample.locations(), &scenario.model(), smoother.matrix(), &targets, nodes)?)
    } else {
        None
    };
    Ok(DesignCache { bandwidth, smoother, targets, truth })
}

struct ReplicateOutcome {
    record: ReplicateRecord,
    /// Squared errors per (mode, threshold).
    se: Vec<Vec<f64>>,
}

fn run_replicate(
    index: usize,
    scenario: &Scenario,
    modes: &[Mode],
    simulator: &FieldSimulator,
    shared: Option<&DesignCache>,
    base: &PipelineConfig,
    nodes: &[Point],
    true_maps: &[Vec<f64>],
) -> Result<ReplicateOutcome> {
    let sample = simulator.simulate(index as u64).stage("field simulation")?;
    let needs_truth = modes.contains(&Mode::Theoretical);
    let owned;
    let cache: Option<&DesignCache> = match (shared, scenario.bandwidth) {
        (Some(c), _) => Some(c),
        (None, StudyBandwidth::Mase) => {
            let h = mase_bandwidth(&sample, scenario, base).stage("mase bandwidth")?;
            owned = design_cache(&sample, h, scenario, base, nodes, needs_truth).stage("design cache")?;
            Some(&owned)
        }
        (None, StudyBandwidth::Cgcv) => None,
    };
    let fit = match cache {
        Some(c) => {
            let cfg = PipelineConfig { trend: TrendBandwidth::Fixed(c.bandwidth), ..base.clone() };
            fit_pipeline_cached(&sample, &cfg, Some(&c.smoother))?
        }
        None => fit_pipeline_cached(&sample, base, None)?,
    };
    let late;
    let (targets, truth) = match cache {
        Some(c) => (&c.targets, c.truth.as_ref()),
        None => {
            let ts = TargetSmoother::new(&sample, &fit.bandwidth(), nodes, &base.smoother);
            let truth = if needs_truth {
                Some(Truth::new(sample.locations(), &scenario.model(), fit.trend.smoother.matrix(), &ts, nodes)?)
            } else {
                None
            };
            late = (ts, truth);
            (&late.0, late.1.as_ref())
        }
    };
    let seed = derive_seed(scenario.seed, Domain::Bootstrap, index as u64);
    let mut se = Vec::with_capacity(modes.len() * scenario.thresholds.len());
    let mut mean_se = Vec::with_capacity(se.capacity());
    for &mode in modes {
        let maps = match mode {
            Mode::Theoretical => fit.risk_maps(mode, nodes, &scenario.thresholds, scenario.bootstrap, seed, truth)?,
            _ => {
                let op: PredictionOperator = fit.operator(mode, nodes, Some(targets))?;
                let e = crate::bootstrap::decorrelate_residuals(&fit.residual_factor, &fit.trend.residuals);
                let factor = if mode == Mode::Residual { &fit.residual_factor } else { &fit.corrected_factor };
                let inputs = crate::bootstrap::BootstrapInputs { fitted: &fit.trend.fitted, e: &e, factor, operator: &op };
                crate::bootstrap::risk_maps(&inputs, &scenario.thresholds, scenario.bootstrap, seed)?
            }
        };
        for (map, truth_map) in maps.iter().zip(true_maps) {
            let v = squared_errors(truth_map, &map.probabilities)?;
            mean_se.push(if v.is_empty() { f64::NAN } else { v.iter().sum::<f64>() / v.len() as f64 });
            se.push(v);
        }
    }
    let h = fit.bandwidth();
    Ok(ReplicateOutcome {
        record: ReplicateRecord {
            index,
            bandwidth: h.diag(),
            variogram_bandwidth: fit.variogram_bandwidth,
            residual_sill: fit.residual_model.sill(),
            corrected_sill: fit.corrected_model.sill(),
            masked: targets.masked().len(),
            mean_se,
        },
        se,
    })
}

/// Runs the `N` replicates of `scenario` for the requested modes.
pub fn run_scenario(scenario: &Scenario, modes: &[Mode], config: &PipelineConfig) -> Result<ScenarioResult> {
    scenario.validate()?;
    if modes.is_empty() {
        return Err(Error::InvalidInput("no bootstrap modes requested".into()));
    }
    let simulator = FieldSimulator::new(scenario).stage("scenario setup")?;
    let grid = scenario.prediction_grid()?;
    let nodes = grid.nodes();
    let true_maps: Vec<Vec<f64>> =
        scenario.thresholds.iter().map(|&c| nodes.iter().map(|p| true_risk(*p, c, scenario)).collect()).collect();

    let mut base = config.clone();
    if scenario.bandwidth == StudyBandwidth::Cgcv && matches!(base.trend, TrendBandwidth::Fixed(_)) {
        base.trend = TrendBandwidth::default();
    }
    let shared = match (scenario.design, scenario.bandwidth) {
        (Design::Regular, StudyBandwidth::Mase) => {
            let first = simulator.simulate(0).stage("field simulation")?;
            let h = mase_bandwidth(&first, scenario, &base).stage("mase bandwidth")?;
            log::info!("scenario {}: MASE bandwidth {:?}", scenario.id, h.diag());
            Some(design_cache(&first, h, scenario, &base, &nodes, modes.contains(&Mode::Theoretical)).stage("design cache")?)
        }
        _ => None,
    };

    let outcomes: Vec<Result<ReplicateOutcome>> = range(scenario.replicates)
        .map(|i| run_replicate(i, scenario, modes, &simulator, shared.as_ref(), &base, &nodes, &true_maps))
        .collect();

    let width = modes.len() * scenario.thresholds.len();
    let mut pooled: Vec<Vec<f64>> = vec![Vec::new(); width];
    let mut records = Vec::new();
    let mut failures = 0;
    for (i, out) in outcomes.into_iter().enumerate() {
        match out {
            Ok(o) => {
                for (p, v) in pooled.iter_mut().zip(o.se) {
                    p.extend(v);
                }
                records.push(o.record);
            }
            Err(e) => {
                log::warn!("scenario {} replicate {i} failed: {e}", scenario.id);
                failures += 1;
            }
        }
    }
    let valid = failures * 20 <= scenario.replicates;
    let mut rows = Vec::with_capacity(width);
    for (k, se) in pooled.into_iter().enumerate() {
        let mode = modes[k / scenario.thresholds.len()];
        let threshold = scenario.thresholds[k % scenario.thresholds.len()];
        let m = summarize(se).unwrap_or(SeMetrics { mean: f64::NAN, median: f64::NAN, sd: f64::NAN, nodes: 0 });
        rows.push(ResultRow {
            scenario: scenario.id.clone(),
            mode,
            threshold,
            n: scenario.n(),
            replicates: scenario.replicates,
            bootstrap: scenario.bootstrap,
            mean_se: m.mean,
            median_se: m.median,
            sd_se: m.sd,
            failures,
        });
    }
    Ok(ScenarioResult { scenario: scenario.clone(), modes: modes.to_vec(), rows, records, failures, valid })
}
