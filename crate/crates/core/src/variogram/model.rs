//! Shapiro-Botha semivariogram models and covariance assembly.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use super::empirical::EmpiricalVariogram;
use crate::numerics::linalg::Matrix;
use crate::numerics::{bessel_j0, nnls};
use crate::{Error, Result};

/// Semivariogram with `gamma(0) = 0` and a finite sill.
pub trait Variogram {
    fn semivariance(&self, u: f64) -> f64;
    fn sill(&self) -> f64;

    fn covariance(&self, u: f64) -> f64 {
        self.sill() - self.semivariance(u)
    }
}

/// Spectral kernel `kappa` of the Shapiro-Botha mixture, named by the
/// dimension in which it is valid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum KernelDimension {
    /// `J0(x)`.
    Two,
    /// `sin(x) / x`.
    Three,
    /// `exp(-x^2)`, valid in every dimension.
    #[default]
    Infinite,
}

impl KernelDimension {
    pub fn kappa(self, x: f64) -> f64 {
        match self {
            KernelDimension::Two => bessel_j0(x),
            KernelDimension::Three => {
                if x.abs() < 1e-8 {
                    1.0 - x * x / 6.0
                } else {
                    libm::sin(x) / x
                }
            }
            KernelDimension::Infinite => libm::exp(-x * x),
        }
    }
}

/// `gamma(u) = nugget + sum_k b_k (1 - kappa(t_k u))` for `u > 0`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct VariogramModel {
    pub nugget: f64,
    pub node_freqs: Vec<f64>,
    pub node_weights: Vec<f64>,
    pub dimension: KernelDimension,
}

impl VariogramModel {
    pub fn pure_nugget(nugget: f64) -> Self {
        Self { nugget, node_freqs: Vec::new(), node_weights: Vec::new(), dimension: KernelDimension::Infinite }
    }

    pub fn new(nugget: f64, node_freqs: Vec<f64>, node_weights: Vec<f64>, dimension: KernelDimension) -> Result<Self> {
        if node_freqs.len() != node_weights.len() {
            return Err(Error::DimensionMismatch("one weight per node frequency".into()));
        }
        if !(nugget >= 0.0) || node_weights.iter().any(|b| !(*b >= 0.0)) || node_freqs.iter().any(|t| !(*t > 0.0)) {
            return Err(Error::InvalidInput("nugget and weights must be nonnegative, frequencies positive".into()));
        }
        Ok(Self { nugget, node_freqs, node_weights, dimension })
    }
}

impl Variogram for VariogramModel {
    fn semivariance(&self, u: f64) -> f64 {
        if u == 0.0 {
            return 0.0;
        }
        let u = u.abs();
        self.nugget
            + self
                .node_freqs
                .iter()
                .zip(&self.node_weights)
                .map(|(t, b)| b * (1.0 - self.dimension.kappa(t * u)))
                .sum::<f64>()
    }

    fn sill(&self) -> f64 {
        self.nugget + self.node_weights.iter().sum::<f64>()
    }
}

pub fn evaluate_model(model: &VariogramModel, u: f64) -> f64 {
    model.semivariance(u)
}

/// Default node count `min(2 * lags, 50)`.
pub fn default_node_count(lags: usize) -> usize {
    (2 * lags).min(50)
}

/// Node frequencies `t_k = k pi / u_max`, `k = 1..=count`.
pub fn node_frequencies(u_max: f64, count: usize) -> Vec<f64> {
    (1..=count).map(|k| k as f64 * PI / u_max).collect()
}

/// Weighted NNLS fit of nugget and node weights to the pilot estimates,
/// weighted by the pilot pair counts.
pub fn fit_shapiro_botha(
    pilot: &EmpiricalVariogram,
    dimension: KernelDimension,
    n_nodes: Option<usize>,
) -> Result<VariogramModel> {
    let m = pilot.lags.len();
    if m < 2 {
        return Err(Error::InvalidInput("Shapiro-Botha fit needs at least two lags".into()));
    }
    let k = n_nodes.unwrap_or_else(|| default_node_count(m));
    if k == 0 {
        return Err(Error::InvalidInput("at least one Shapiro-Botha node required".into()));
    }
    let u_max = pilot.lags[m - 1];
    let freqs = node_frequencies(u_max, k);
    let a = Matrix::from_fn(m, k + 1, |i, j| {
        if j == 0 {
            1.0
        } else {
            1.0 - dimension.kappa(freqs[j - 1] * pilot.lags[i])
        }
    });
    let target: Vec<f64> = pilot.estimates.iter().map(|v| v.max(0.0)).collect();
    let weights: Vec<f64> = pilot.pair_counts.iter().map(|c| c.max(f64::MIN_POSITIVE)).collect();
    let sol = nnls(&a, &target, Some(&weights))?;
    VariogramModel::new(sol.x[0], freqs, sol.x[1..].to_vec(), dimension)
}

/// `Sigma[i][j] = sill - gamma(d_ij)`, with `sill` on the diagonal.
pub fn covariance_matrix<V: Variogram + ?Sized>(model: &V, distances: &Matrix) -> Matrix {
    let n = distances.rows();
    let sill = model.sill();
    let mut c = Matrix::zeros(n, n);
    for i in 0..n {
        c[(i, i)] = sill;
        for j in i + 1..n {
            let v = sill - model.semivariance(distances[(i, j)]);
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    c
}

pub fn correlation_matrix(sigma: &Matrix) -> Result<Matrix> {
    if !sigma.is_square() {
        return Err(Error::DimensionMismatch("covariance matrix must be square".into()));
    }
    let n = sigma.rows();
    let mut sd = vec![0.0; n];
    for i in 0..n {
        let v = sigma[(i, i)];
        if !(v > 0.0) {
            return Err(Error::NonPositiveDiagonal { index: i, value: v });
        }
        sd[i] = libm::sqrt(v);
    }
    Ok(Matrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { sigma[(i, j)] / (sd[i] * sd[j]) }))
}
