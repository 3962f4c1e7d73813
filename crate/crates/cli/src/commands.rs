//! Command implementations.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use georisk_core::bootstrap::{fit_pipeline, Mode, OuterIteration, PipelineFit};
use georisk_core::geometry::{find_duplicate, pairwise_distances};
use georisk_core::kriging::KrigingSystem;
use georisk_core::numerics::{cholesky, RidgePolicy};
use georisk_core::rng::{stream, Domain, Rng};
use georisk_core::simulation::{run_scenario, ExponentialVariogram, ScenarioResult};
use georisk_core::trend::predict_trend_masked;
use georisk_core::variogram::{covariance_matrix, evaluate_model, Variogram, VariogramModel};
use georisk_core::geometry::make_regular_grid;
use georisk_core::{Point, RegularGrid, SpatialSample};
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::args::MapMode;
use crate::config::{Common, FitConfig, RiskmapConfig, SimulateConfig, SynthConfig};
use crate::error::{classify, CliError, Result};
use crate::io::{fmt_value, grid_csv, ingest_csv, table_csv, write_atomic};
use crate::svg::heatmap;

#[derive(Debug, Default, Serialize)]
struct Timings {
    command: &'static str,
    threads: usize,
    seconds: BTreeMap<String, f64>,
}

impl Timings {
    fn new(command: &'static str) -> Self {
        Self { command, threads: rayon::current_num_threads(), seconds: BTreeMap::new() }
    }

    fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        self.seconds.insert(stage.to_string(), t.elapsed().as_secs_f64());
        out
    }
}

#[derive(Debug, Clone, Copy, Serialize)]
struct ModelSummary {
    nugget: f64,
    sill: f64,
}

impl From<&VariogramModel> for ModelSummary {
    fn from(m: &VariogramModel) -> Self {
        Self { nugget: m.nugget, sill: m.sill() }
    }
}

#[derive(Debug, Clone, Serialize)]
struct FitSummary {
    n: usize,
    bandwidth: [[f64; 2]; 2],
    variogram_bandwidth: f64,
    residual_model: ModelSummary,
    corrected_model: ModelSummary,
    correction_iterations: usize,
    correction_converged: bool,
    iterations: Vec<OuterIteration>,
}

impl FitSummary {
    fn new(fit: &PipelineFit) -> Self {
        Self {
            n: fit.sample().len(),
            bandwidth: fit.bandwidth().entries(),
            variogram_bandwidth: fit.variogram_bandwidth,
            residual_model: (&fit.residual_model).into(),
            corrected_model: (&fit.corrected_model).into(),
            correction_iterations: fit.variograms.iterations,
            correction_converged: fit.variograms.converged,
            iterations: fit.report.clone(),
        }
    }
}

fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(value).expect("serializable report");
    v.push(b'\n');
    v
}

fn prepare_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(CliError::io(dir))
}

fn load_sample(common: &Common) -> Result<SpatialSample> {
    let path = common.input.as_deref().ok_or_else(|| CliError::Config("no input file".into()))?;
    let sample = ingest_csv(path, common.transform)?;
    log::info!("read {} locations from {}", sample.len(), path.display());
    Ok(sample)
}

fn sample_grid(sample: &SpatialSample, dims: [usize; 2]) -> Result<RegularGrid> {
    make_regular_grid(sample.bounds(), dims).map_err(classify)
}

fn file_tag(c: f64) -> String {
    format!("c{c}")
}

#[derive(Serialize)]
struct MapEntry {
    threshold: f64,
    file: String,
    masked: usize,
    mean_probability: Option<f64>,
}

#[derive(Serialize)]
struct RiskmapReport<'a> {
    config: &'a RiskmapConfig,
    grid: [usize; 2],
    bounds: [(f64, f64); 2],
    fit: FitSummary,
    maps: Vec<MapEntry>,
}

pub fn riskmap(cfg: &RiskmapConfig) -> Result<()> {
    let mut timings = Timings::new("riskmap");
    let out = &cfg.common.out;
    prepare_out(out)?;
    let sample = timings.time("ingest", || load_sample(&cfg.common))?;
    let grid = sample_grid(&sample, cfg.grid)?;
    let fit = timings.time("fit", || fit_pipeline(&sample, &cfg.pipeline)).map_err(classify)?;
    log_fit(&fit);
    let mode = match cfg.mode {
        MapMode::Corrected => Mode::Corrected,
        MapMode::Residual => Mode::Residual,
    };
    let maps = timings
        .time("bootstrap", || fit.risk_maps_on_grid(mode, &grid, &cfg.thresholds, cfg.replicates, cfg.common.seed))
        .map_err(classify)?;

    let mut entries = Vec::new();
    for (c, map) in cfg.thresholds.iter().zip(&maps) {
        let name = format!("riskmap_{}.csv", file_tag(*c));
        write_atomic(&out.join(&name), &grid_csv(&grid, &map.probabilities, "probability"))?;
        if cfg.svg {
            let svg = heatmap(&grid, &map.probabilities, &format!("P(Y >= {c})"), Some((0.0, 1.0)));
            write_atomic(&out.join(format!("riskmap_{}.svg", file_tag(*c))), svg.as_bytes())?;
        }
        let valid: Vec<f64> = map.probabilities.iter().flatten().copied().collect();
        entries.push(MapEntry {
            threshold: *c,
            file: name,
            masked: map.masked,
            mean_probability: (!valid.is_empty()).then(|| valid.iter().sum::<f64>() / valid.len() as f64),
        });
    }
    let report =
        RiskmapReport { config: cfg, grid: cfg.grid, bounds: sample.bounds(), fit: FitSummary::new(&fit), maps: entries };
    write_atomic(&out.join("riskmap.json"), &json_bytes(&report))?;
    write_atomic(&out.join("timings.json"), &json_bytes(&timings))
}

fn log_fit(fit: &PipelineFit) {
    for (k, it) in fit.report.iter().enumerate() {
        log::info!(
            "pass {}: H diag {:?}, g {:.4}, sill residual {:.4} corrected {:.4} ({} correction steps{})",
            k + 1,
            [it.bandwidth[0][0], it.bandwidth[1][1]],
            it.variogram_bandwidth,
            it.residual_sill,
            it.corrected_sill,
            it.correction_steps,
            if it.correction_converged { "" } else { ", not converged" }
        );
    }
}

#[derive(Serialize)]
struct FitReport<'a> {
    config: &'a FitConfig,
    grid: [usize; 2],
    bounds: [(f64, f64); 2],
    fit: FitSummary,
    residual_model: &'a VariogramModel,
    corrected_model: &'a VariogramModel,
    masked: usize,
}

pub fn fit(cfg: &FitConfig) -> Result<()> {
    let mut timings = Timings::new("fit");
    let out = &cfg.common.out;
    prepare_out(out)?;
    let sample = timings.time("ingest", || load_sample(&cfg.common))?;
    let grid = sample_grid(&sample, cfg.grid)?;
    let fit = timings.time("fit", || fit_pipeline(&sample, &cfg.pipeline)).map_err(classify)?;
    log_fit(&fit);

    let nodes = grid.nodes();
    let trend = predict_trend_masked(&fit.trend, &nodes);
    let kriged = timings.time("kriging", || -> Result<Vec<Option<f64>>> {
        let system = KrigingSystem::new(sample.locations(), fit.corrected_model.clone()).map_err(classify)?;
        let sk = system.predict(&fit.trend.residuals, &nodes).map_err(classify)?;
        Ok(trend.iter().zip(sk).map(|(m, r)| m.map(|m| m + r)).collect())
    })?;
    write_atomic(&out.join("trend.csv"), &grid_csv(&grid, &trend, "trend"))?;
    write_atomic(&out.join("kriging.csv"), &grid_csv(&grid, &kriged, "prediction"))?;

    let v = &fit.variograms;
    let rows: Vec<Vec<String>> = v
        .estimate
        .lags
        .iter()
        .enumerate()
        .map(|(k, &u)| {
            vec![
                u.to_string(),
                v.uncorrected.estimates[k].to_string(),
                v.estimate.estimates[k].to_string(),
                evaluate_model(&fit.residual_model, u).to_string(),
                evaluate_model(&fit.corrected_model, u).to_string(),
            ]
        })
        .collect();
    write_atomic(
        &out.join("variogram.csv"),
        &table_csv(&["lag", "uncorrected", "corrected", "residual_model", "corrected_model"], rows),
    )?;

    if cfg.svg {
        write_atomic(&out.join("trend.svg"), heatmap(&grid, &trend, "trend", None).as_bytes())?;
        write_atomic(&out.join("kriging.svg"), heatmap(&grid, &kriged, "kriging prediction", None).as_bytes())?;
    }
    let report = FitReport {
        config: cfg,
        grid: cfg.grid,
        bounds: sample.bounds(),
        fit: FitSummary::new(&fit),
        residual_model: &fit.residual_model,
        corrected_model: &fit.corrected_model,
        masked: trend.iter().filter(|t| t.is_none()).count(),
    };
    write_atomic(&out.join("fit.json"), &json_bytes(&report))?;
    write_atomic(&out.join("timings.json"), &json_bytes(&timings))
}

#[derive(Serialize)]
struct SimulationReport<'a> {
    config: &'a SimulateConfig,
    results: &'a [ScenarioResult],
}

pub fn simulate(cfg: &SimulateConfig) -> Result<()> {
    let mut timings = Timings::new("simulate");
    prepare_out(&cfg.out)?;
    let mut results = Vec::new();
    for sc in &cfg.scenarios {
        log::info!("scenario {}: n = {}, N = {}, B = {}", sc.id, sc.n(), sc.replicates, sc.bootstrap);
        let res = timings.time(&sc.id, || run_scenario(sc, &Mode::ALL, &cfg.pipeline)).map_err(classify)?;
        for row in &res.rows {
            log::info!("{} {:>11} c = {}: mean SE {:.4e}", row.scenario, row.mode.name(), row.threshold, row.mean_se);
        }
        results.push(res);
    }
    let rows: Vec<Vec<String>> = results
        .iter()
        .flat_map(|r| &r.rows)
        .map(|row| {
            vec![
                row.scenario.clone(),
                row.mode.name().to_string(),
                row.threshold.to_string(),
                row.n.to_string(),
                row.replicates.to_string(),
                row.bootstrap.to_string(),
                fmt_value(Some(row.mean_se)),
                fmt_value(Some(row.median_se)),
                fmt_value(Some(row.sd_se)),
                row.failures.to_string(),
            ]
        })
        .collect();
    write_atomic(
        &cfg.out.join("simulation.csv"),
        &table_csv(&["scenario", "mode", "threshold", "n", "N", "B", "mean_se", "median_se", "sd_se", "failures"], rows),
    )?;
    write_atomic(&cfg.out.join("simulation.json"), &json_bytes(&SimulationReport { config: cfg, results: &results }))?;
    write_atomic(&cfg.out.join("timings.json"), &json_bytes(&timings))?;
    let invalid: Vec<String> = results
        .iter()
        .filter(|r| !r.valid)
        .map(|r| format!("{}: {} of {} replicates failed", r.scenario.id, r.failures, r.scenario.replicates))
        .collect();
    if invalid.is_empty() {
        Ok(())
    } else {
        Err(CliError::Validity(invalid.join("; ")))
    }
}

const LON: (f64, f64) = (-124.5, -67.0);
const LAT: (f64, f64) = (25.0, 49.0);

/// Root-scale trend of the synthetic precipitation surface: dry southwest, wet east.
pub fn synthetic_trend(p: Point) -> f64 {
    let u = (p[0] - LON.0) / (LON.1 - LON.0);
    let v = (p[1] - LAT.0) / (LAT.1 - LAT.0);
    0.55 + 1.2 * u + 0.35 * (std::f64::consts::PI * v).sin() * u
}

/// Synthetic data in the precipitation file format: root-scale Gaussian field, squared.
pub fn synthetic_sample(n: usize, seed: u64) -> Result<SpatialSample> {
    let mut rng = stream(seed, Domain::Synthetic, 0);
    let round = |v: f64, k: i32| (v * 10f64.powi(k)).round() / 10f64.powi(k);
    let mut locations: Vec<Point> = Vec::with_capacity(n);
    while locations.len() < n {
        let p = [
            round(LON.0 + (LON.1 - LON.0) * rng.random::<f64>(), 4),
            round(LAT.0 + (LAT.1 - LAT.0) * rng.random::<f64>(), 4),
        ];
        locations.push(p);
        if find_duplicate(&locations).is_some() {
            locations.pop();
        }
    }
    let model = ExponentialVariogram { nugget: 0.02, partial_sill: 0.1, range: 2.0 };
    let l = cholesky(&covariance_matrix(&model, &pairwise_distances(&locations)), RidgePolicy::Auto).map_err(classify)?;
    let mut rng = stream(seed, Domain::Synthetic, 1);
    let z: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let eps = l.mul_lower(&z);
    let values = locations.iter().zip(eps).map(|(p, e)| round((synthetic_trend(*p) + e).max(0.0).powi(2), 3)).collect();
    SpatialSample::new(locations, values).map_err(classify)
}

pub fn synth_data(cfg: &SynthConfig) -> Result<()> {
    prepare_out(&cfg.out)?;
    let sample = synthetic_sample(cfg.n, cfg.seed)?;
    let rows = sample
        .locations()
        .iter()
        .zip(sample.values())
        .map(|(p, v)| vec![p[0].to_string(), p[1].to_string(), v.to_string()])
        .collect();
    let path = cfg.out.join("synthetic.csv");
    write_atomic(&path, &table_csv(&["x", "y", "value"], rows))?;
    log::info!("wrote {} locations to {}", cfg.n, path.display());
    Ok(())
}
