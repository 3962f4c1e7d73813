//! Simple kriging of zero-mean residual fields.

use alloc::vec;
use alloc::vec::Vec;

use crate::geometry::{distance, pairwise_distances, Point, COINCIDENCE_TOL};
use crate::maybe_rayon::*;
use crate::numerics::linalg::{cholesky, dot, solve_lower, solve_upper_transpose, Cholesky, Matrix, RidgePolicy};
use crate::variogram::{covariance_matrix, Variogram};
use crate::{Error, Result};

/// Data covariance factor for a fixed set of locations and covariance model.
#[derive(Debug, Clone)]
pub struct KrigingSystem<V> {
    locations: Vec<Point>,
    model: V,
    factor: Cholesky,
}

impl<V: Variogram + Sync> KrigingSystem<V> {
    pub fn new(locations: &[Point], model: V) -> Result<Self> {
        if locations.is_empty() {
            return Err(Error::InvalidInput("kriging needs at least one data location".into()));
        }
        let sigma = covariance_matrix(&model, &pairwise_distances(locations));
        let factor = cholesky(&sigma, RidgePolicy::Auto)?;
        if factor.ridge() > 0.0 {
            log::debug!("kriging covariance factorized with ridge {:e}", factor.ridge());
        }
        Ok(Self { locations: locations.to_vec(), model, factor })
    }

    pub fn model(&self) -> &V {
        &self.model
    }

    pub fn factor(&self) -> &Cholesky {
        &self.factor
    }

    pub fn locations(&self) -> &[Point] {
        &self.locations
    }

    pub fn len(&self) -> usize {
        self.locations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.locations.is_empty()
    }

    fn coincident(&self, target: Point) -> Option<usize> {
        self.locations.iter().position(|p| distance(p, &target) <= COINCIDENCE_TOL)
    }

    fn target_covariances(&self, target: Point) -> Vec<f64> {
        let sill = self.model.sill();
        self.locations.iter().map(|p| sill - self.model.semivariance(distance(p, &target))).collect()
    }

    /// Kriging weights `Sigma^{-1} c0` at `target`.
    pub fn weights(&self, target: Point) -> Vec<f64> {
        if let Some(i) = self.coincident(target) {
            let mut w = vec![0.0; self.len()];
            w[i] = 1.0;
            return w;
        }
        self.factor.solve(&self.target_covariances(target))
    }

    /// `sill - c0^T Sigma^{-1} c0`.
    pub fn variance(&self, target: Point) -> f64 {
        if self.coincident(target).is_some() {
            return 0.0;
        }
        let c0 = self.target_covariances(target);
        let z = solve_lower(&self.factor, &c0);
        (self.model.sill() - dot(&z, &z)).max(0.0)
    }

    /// Weight matrix with one row per target.
    pub fn weight_matrix(&self, targets: &[Point]) -> Matrix {
        let rows: Vec<Vec<f64>> = range(targets.len()).map(|t| self.weights(targets[t])).collect();
        let mut m = Matrix::zeros(targets.len(), self.len());
        for (t, r) in rows.into_iter().enumerate() {
            m.row_mut(t).copy_from_slice(&r);
        }
        m
    }

    /// Predictions `c0^T Sigma^{-1} r` at every target.
    pub fn predict(&self, residuals: &[f64], targets: &[Point]) -> Result<Vec<f64>> {
        if residuals.len() != self.len() {
            return Err(Error::DimensionMismatch(alloc::format!(
                "{} residuals for {} data locations",
                residuals.len(),
                self.len()
            )));
        }
        let z = solve_lower(&self.factor, residuals);
        let alpha = solve_upper_transpose(&self.factor, &z);
        Ok(range(targets.len())
            .map(|t| match self.coincident(targets[t]) {
                Some(i) => residuals[i],
                None => dot(&self.target_covariances(targets[t]), &alpha),
            })
            .collect())
    }
}

pub fn build_system<V: Variogram + Sync>(locations: &[Point], model: V) -> Result<KrigingSystem<V>> {
    KrigingSystem::new(locations, model)
}

pub fn sk_predict<V: Variogram + Sync>(system: &KrigingSystem<V>, residuals: &[f64], targets: &[Point]) -> Result<Vec<f64>> {
    system.predict(residuals, targets)
}
