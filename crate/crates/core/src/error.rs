use alloc::string::String;
use alloc::vec::Vec;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("locations {first} and {second} coincide")]
    DuplicateLocation { first: usize, second: usize },

    #[error("degenerate bounds on axis {axis}: min {min} is not below max {max}")]
    DegenerateBounds { axis: usize, min: f64, max: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error("matrix is not positive definite: factorization failed at pivot {pivot} (ridge {ridge:e})")]
    NotPositiveDefinite { pivot: usize, ridge: f64 },

    #[error("nnls did not converge after {iterations} iterations (residual norm {residual:e})")]
    NnlsNoConvergence { iterations: usize, residual: f64 },

    #[error("bandwidth too small at location {location}: {neighbors} points with nonzero weight, {required} required")]
    BandwidthTooSmall { location: usize, neighbors: usize, required: usize },

    #[error("local design is singular at {} target(s)", .targets.len())]
    SingularTargets { targets: Vec<usize> },

    #[error("bandwidth too small for the error dependence: tr(S R)/n = {ratio}")]
    DegenerateBandwidth { ratio: f64 },

    #[error("no admissible bandwidth in the search grid; smallest admissible diagonal found by doubling: {smallest_admissible:?}")]
    NoAdmissibleBandwidth { smallest_admissible: Option<[f64; 2]> },

    #[error("variogram bandwidth too small at lag {lag} (index {index}): {pairs} pairs with nonzero weight, {required} required")]
    TooFewPairs { index: usize, lag: f64, pairs: f64, required: usize },

    #[error("cross-validation score is degenerate: all {skipped} pairs skipped")]
    DegenerateScore { skipped: usize },

    #[error("nonpositive diagonal entry {value} at index {index}")]
    NonPositiveDiagonal { index: usize, value: f64 },

    #[error("all grid nodes are masked")]
    AllMasked,

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: alloc::boxed::Box<Error>,
    },
}

impl Error {
    pub(crate) fn at_stage(self, stage: &'static str) -> Error {
        Error::Stage { stage, source: alloc::boxed::Box::new(self) }
    }

    /// Innermost error, stripping stage labels.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}

pub(crate) trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T>;
}

impl<T> StageExt<T> for Result<T> {
    fn stage(self, stage: &'static str) -> Result<T> {
        self.map_err(|e| e.at_stage(stage))
    }
}
