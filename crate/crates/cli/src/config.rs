//! TOML configuration files and resolution of effective run settings.
//!
//! Precedence is command-line flag, then config file, then built-in default.
//! The resolved structs are what gets echoed into the output metadata; the
//! output directory and the thread count are left out of that echo because
//! neither affects the results.

use std::fs;
use std::path::{Path, PathBuf};

use georisk_core::bootstrap::{PipelineConfig, TrendBandwidth};
use georisk_core::simulation::{Design, Scale, Scenario, StudyBandwidth};
use georisk_core::BandwidthMatrix;
use serde::{Deserialize, Serialize};

use crate::args::{BandwidthRule, DesignArg, FitArgs, MapMode, RiskmapArgs, ScaleArg, ScenarioKind, Shared, SimulateArgs, SynthArgs};
use crate::error::{CliError, Result};
use crate::io::Transform;

pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_GRID: [usize; 2] = [50, 50];
pub const DEFAULT_SYNTH_COUNT: usize = 1053;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub input: Option<PathBuf>,
    pub transform: Option<Transform>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    #[serde(default)]
    pub pipeline: PipelineSection,
    #[serde(default)]
    pub riskmap: RiskmapSection,
    #[serde(default)]
    pub simulate: SimulateSection,
    #[serde(default)]
    pub fit: FitSection,
    #[serde(default, rename = "synth-data")]
    pub synth: SynthSection,
}

/// Estimation overrides shared by `riskmap`, `fit` and `simulate`.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineSection {
    /// Fixed diagonal trend bandwidth `[h1, h2]`; skips the CV/CGCV search.
    pub trend_bandwidth: Option<[f64; 2]>,
    pub variogram_bandwidth: Option<f64>,
    pub outer_iterations: Option<usize>,
    pub bandwidth_candidates: Option<usize>,
    pub lag_count: Option<usize>,
    pub lag_fraction: Option<f64>,
    pub correction_iterations: Option<usize>,
    pub correction_tolerance: Option<f64>,
    pub model_nodes: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RiskmapSection {
    pub thresholds: Option<Vec<f64>>,
    pub replicates: Option<usize>,
    pub grid: Option<[usize; 2]>,
    pub mode: Option<MapMode>,
    pub svg: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateSection {
    pub scenario: Option<ScenarioKind>,
    pub scale: Option<ScaleArg>,
    pub n: Option<usize>,
    #[serde(rename = "N")]
    pub replicates: Option<usize>,
    #[serde(rename = "B")]
    pub bootstrap: Option<usize>,
    pub range: Option<f64>,
    pub sill: Option<f64>,
    pub nugget_frac: Option<f64>,
    pub design: Option<DesignArg>,
    pub thresholds: Option<Vec<f64>>,
    pub grid: Option<usize>,
    pub bandwidth: Option<BandwidthRule>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSection {
    pub grid: Option<[usize; 2]>,
    pub svg: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSection {
    pub n: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(CliError::io(path))?;
        Self::parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }
}

/// Settings common to every command after merging.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Common {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    pub transform: Transform,
    pub seed: u64,
    #[serde(skip)]
    pub out: PathBuf,
    #[serde(skip)]
    pub threads: Option<usize>,
}

fn load_file(shared: &Shared) -> Result<FileConfig> {
    match &shared.config {
        Some(p) => FileConfig::load(p),
        None => Ok(FileConfig::default()),
    }
}

fn common(shared: &Shared, file: &FileConfig) -> Result<Common> {
    let threads = shared.threads.or(file.threads);
    if threads == Some(0) {
        return Err(CliError::Config("--threads must be at least 1".into()));
    }
    Ok(Common {
        input: shared.input.clone().or_else(|| file.input.clone()),
        transform: shared.transform.or(file.transform).unwrap_or_default(),
        seed: shared.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
        out: shared.out.clone().or_else(|| file.out.clone()).unwrap_or_else(|| PathBuf::from(".")),
        threads,
    })
}

fn require_input(c: &Common) -> Result<PathBuf> {
    c.input.clone().ok_or_else(|| CliError::Config("an input file is required (--input or `input` in the config)".into()))
}

fn positive(name: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(CliError::Config(format!("{name} must be positive and finite, got {v}")))
    }
}

fn check_grid(g: [usize; 2]) -> Result<[usize; 2]> {
    if g[0] < 2 || g[1] < 2 {
        return Err(CliError::Config(format!("grid needs at least 2 nodes per axis, got {}x{}", g[0], g[1])));
    }
    Ok(g)
}

pub fn pipeline_config(p: &PipelineSection) -> Result<PipelineConfig> {
    let mut cfg = PipelineConfig::default();
    let (mut max_outer, mut per_axis) = match cfg.trend {
        TrendBandwidth::Iterative { max_outer, per_axis } => (max_outer, per_axis),
        TrendBandwidth::Fixed(_) => unreachable!(),
    };
    if let Some(v) = p.outer_iterations {
        if v == 0 {
            return Err(CliError::Config("outer_iterations must be at least 1".into()));
        }
        max_outer = v;
    }
    if let Some(v) = p.bandwidth_candidates {
        if v < 2 {
            return Err(CliError::Config("bandwidth_candidates must be at least 2".into()));
        }
        per_axis = v;
    }
    cfg.trend = match p.trend_bandwidth {
        Some([h1, h2]) => TrendBandwidth::Fixed(
            BandwidthMatrix::diagonal(positive("trend_bandwidth", h1)?, positive("trend_bandwidth", h2)?)
                .map_err(|e| CliError::Config(e.to_string()))?,
        ),
        None => TrendBandwidth::Iterative { max_outer, per_axis },
    };
    if let Some(g) = p.variogram_bandwidth {
        cfg.variogram_bandwidth = Some(positive("variogram_bandwidth", g)?);
    }
    if let Some(k) = p.lag_count {
        if k < 2 {
            return Err(CliError::Config("lag_count must be at least 2".into()));
        }
        cfg.lag_count = k;
    }
    if let Some(f) = p.lag_fraction {
        if !(f > 0.0 && f <= 1.0) {
            return Err(CliError::Config(format!("lag_fraction must lie in (0, 1], got {f}")));
        }
        cfg.lag_fraction = f;
    }
    if let Some(m) = p.correction_iterations {
        cfg.correction.max_iter = m;
    }
    if let Some(t) = p.correction_tolerance {
        cfg.correction.tol = positive("correction_tolerance", t)?;
    }
    if let Some(n) = p.model_nodes {
        if n == 0 {
            return Err(CliError::Config("model_nodes must be at least 1".into()));
        }
        cfg.nodes = Some(n);
    }
    Ok(cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RiskmapConfig {
    #[serde(flatten)]
    pub common: Common,
    pub thresholds: Vec<f64>,
    pub replicates: usize,
    pub grid: [usize; 2],
    pub mode: MapMode,
    pub svg: bool,
    pub pipeline: PipelineConfig,
}

impl RiskmapConfig {
    pub fn resolve(args: &RiskmapArgs) -> Result<Self> {
        let file = load_file(&args.shared)?;
        let common = common(&args.shared, &file)?;
        require_input(&common)?;
        let s = &file.riskmap;
        let thresholds = args.thresholds.clone().or_else(|| s.thresholds.clone()).unwrap_or_else(|| vec![1.0, 2.0]);
        if thresholds.is_empty() || thresholds.iter().any(|c| c.is_nan()) {
            return Err(CliError::Config("thresholds must be a nonempty list of numbers".into()));
        }
        let replicates = args.replicates.or(s.replicates).unwrap_or(1000);
        if replicates == 0 {
            return Err(CliError::Config("--replicates must be at least 1".into()));
        }
        Ok(Self {
            thresholds,
            replicates,
            grid: check_grid(args.grid.or(s.grid).unwrap_or(DEFAULT_GRID))?,
            mode: args.mode.or(s.mode).unwrap_or(MapMode::Corrected),
            svg: args.svg || s.svg.unwrap_or(false),
            pipeline: pipeline_config(&file.pipeline)?,
            common,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitConfig {
    #[serde(flatten)]
    pub common: Common,
    pub grid: [usize; 2],
    pub svg: bool,
    pub pipeline: PipelineConfig,
}

impl FitConfig {
    pub fn resolve(args: &FitArgs) -> Result<Self> {
        let file = load_file(&args.shared)?;
        let common = common(&args.shared, &file)?;
        require_input(&common)?;
        Ok(Self {
            grid: check_grid(args.grid.or(file.fit.grid).unwrap_or(DEFAULT_GRID))?,
            svg: args.svg || file.fit.svg.unwrap_or(false),
            pipeline: pipeline_config(&file.pipeline)?,
            common,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulateConfig {
    pub seed: u64,
    pub scenario: ScenarioKind,
    pub scale: Scale,
    pub scenarios: Vec<Scenario>,
    pub pipeline: PipelineConfig,
    #[serde(skip)]
    pub out: PathBuf,
    #[serde(skip)]
    pub threads: Option<usize>,
}

impl SimulateConfig {
    pub fn resolve(args: &SimulateArgs) -> Result<Self> {
        let file = load_file(&args.shared)?;
        let common = common(&args.shared, &file)?;
        if common.input.is_some() {
            log::warn!("simulate ignores the input file");
        }
        let s = &file.simulate;
        let kind = args.scenario.or(s.scenario).unwrap_or(ScenarioKind::Table1);
        let scale = match args.scale.or(s.scale).unwrap_or(ScaleArg::Desk) {
            ScaleArg::Desk => Scale::Desk,
            ScaleArg::Full => Scale::Full,
        };
        let range = args.range.or(s.range);
        let mut scenarios = match kind {
            ScenarioKind::Table1 => vec![Scenario::table1(scale)],
            ScenarioKind::Table2 => match range {
                Some(r) => vec![Scenario::table2(r, scale)],
                None => [0.25, 0.5, 0.75].iter().map(|&r| Scenario::table2(r, scale)).collect(),
            },
            ScenarioKind::Table3 => vec![Scenario::table3(scale)],
            ScenarioKind::Custom => {
                let mut sc = Scenario::table1(scale);
                sc.id = "custom".into();
                vec![sc]
            }
        };
        let sill = args.sill.or(s.sill);
        let frac = args.nugget_frac.or(s.nugget_frac);
        for sc in &mut scenarios {
            sc.seed = common.seed;
            if let Some(v) = args.side.or(s.n) {
                sc.side = v;
            }
            if let Some(v) = args.replicates.or(s.replicates) {
                sc.replicates = v;
            }
            if let Some(v) = args.bootstrap.or(s.bootstrap) {
                sc.bootstrap = v;
            }
            if let Some(r) = range {
                sc.range = r;
            }
            if sill.is_some() || frac.is_some() {
                let total = sill.unwrap_or(sc.sill());
                let f = frac.unwrap_or(sc.nugget / sc.sill());
                if !(0.0..=1.0).contains(&f) {
                    return Err(CliError::Config(format!("nugget fraction must lie in [0, 1], got {f}")));
                }
                sc.nugget = f * total;
                sc.partial_sill = total - sc.nugget;
            }
            if let Some(d) = args.design.or(s.design) {
                sc.design = match d {
                    DesignArg::Regular => Design::Regular,
                    DesignArg::Uniform => Design::Uniform,
                };
            }
            if let Some(t) = args.thresholds.clone().or_else(|| s.thresholds.clone()) {
                sc.thresholds = t;
            }
            if let Some(g) = args.grid.or(s.grid) {
                sc.grid_side = g;
            }
            if let Some(b) = args.bandwidth.or(s.bandwidth) {
                sc.bandwidth = match b {
                    BandwidthRule::Mase => StudyBandwidth::Mase,
                    BandwidthRule::Cgcv => StudyBandwidth::Cgcv,
                };
            }
            sc.validate().map_err(|e| CliError::Config(e.to_string()))?;
        }
        Ok(Self {
            seed: common.seed,
            scenario: kind,
            scale,
            scenarios,
            pipeline: pipeline_config(&file.pipeline)?,
            out: common.out,
            threads: common.threads,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SynthConfig {
    pub seed: u64,
    pub n: usize,
    #[serde(skip)]
    pub out: PathBuf,
    #[serde(skip)]
    pub threads: Option<usize>,
}

impl SynthConfig {
    pub fn resolve(args: &SynthArgs) -> Result<Self> {
        let file = load_file(&args.shared)?;
        let common = common(&args.shared, &file)?;
        let n = args.count.or(file.synth.n).unwrap_or(DEFAULT_SYNTH_COUNT);
        if n < 10 {
            return Err(CliError::Config(format!("synth-data needs at least 10 locations, got {n}")));
        }
        Ok(Self { seed: common.seed, n, out: common.out, threads: common.threads })
    }
}
