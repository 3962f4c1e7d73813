//! Semivariogram estimation from residuals, bias correction and valid model fitting.

mod bias;
mod empirical;
mod model;

pub use bias::{bias_corrected_variogram, bias_matrix, pseudo_covariances, BiasMatrix, CorrectedVariogram, CorrectionOptions};
pub use empirical::{
    cv_relative_error, default_bandwidth_candidates, empirical_variogram, select_variogram_bandwidth,
    variogram_from_pair_values, EmpiricalVariogram, LagGrid, PairSet, VariogramBandwidth, VariogramOptions,
};
pub use model::{
    correlation_matrix, covariance_matrix, default_node_count, evaluate_model, fit_shapiro_botha, node_frequencies,
    KernelDimension, Variogram, VariogramModel,
};
