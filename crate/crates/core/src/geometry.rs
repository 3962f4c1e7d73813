//! Point sets, prediction grids, distances and bandwidth matrices.

use alloc::format;
use alloc::vec::Vec;

use crate::numerics::linalg::Matrix;
use crate::{Error, Result};

/// A location in the plane.
pub type Point = [f64; 2];

/// Locations closer than this are considered identical.
pub const COINCIDENCE_TOL: f64 = 1e-12;

#[inline]
pub fn distance(a: &Point, b: &Point) -> f64 {
    libm::hypot(a[0] - b[0], a[1] - b[1])
}

/// Observed values at distinct planar locations.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SpatialSample {
    locations: Vec<Point>,
    values: Vec<f64>,
}

impl SpatialSample {
    pub fn new(locations: Vec<Point>, values: Vec<f64>) -> Result<Self> {
        if locations.is_empty() {
            return Err(Error::InvalidInput("sample has no locations".into()));
        }
        if locations.len() != values.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} locations but {} values",
                locations.len(),
                values.len()
            )));
        }
        for (i, (p, v)) in locations.iter().zip(&values).enumerate() {
            if !(p[0].is_finite() && p[1].is_finite() && v.is_finite()) {
                return Err(Error::InvalidInput(format!("non-finite entry at index {i}")));
            }
        }
        if let Some((first, second)) = find_duplicate(&locations) {
            return Err(Error::DuplicateLocation { first, second });
        }
        Ok(Self { locations, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn locations(&self) -> &[Point] {
        &self.locations
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Same locations, new responses.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        if values.len() != self.len() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} values, got {}",
                self.len(),
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite value at index {i}")));
        }
        Ok(Self { locations: self.locations.clone(), values })
    }

    /// Axis-aligned bounding box as `[(min_x, max_x), (min_y, max_y)]`.
    pub fn bounds(&self) -> [(f64, f64); 2] {
        let mut b = [(f64::INFINITY, f64::NEG_INFINITY); 2];
        for p in &self.locations {
            for axis in 0..2 {
                b[axis].0 = b[axis].0.min(p[axis]);
                b[axis].1 = b[axis].1.max(p[axis]);
            }
        }
        b
    }
}

/// Returns the first pair of indices (in scan order, by x) closer than [`COINCIDENCE_TOL`].
pub fn find_duplicate(locations: &[Point]) -> Option<(usize, usize)> {
    let mut order: Vec<usize> = (0..locations.len()).collect();
    order.sort_by(|&a, &b| locations[a][0].total_cmp(&locations[b][0]).then(a.cmp(&b)));
    let mut best: Option<(usize, usize)> = None;
    for (k, &i) in order.iter().enumerate() {
        for &j in &order[k + 1..] {
            if locations[j][0] - locations[i][0] > COINCIDENCE_TOL {
                break;
            }
            if distance(&locations[i], &locations[j]) <= COINCIDENCE_TOL {
                let pair = (i.min(j), i.max(j));
                if best.map_or(true, |b| pair < b) {
                    best = Some(pair);
                }
            }
        }
    }
    best
}

/// Symmetric `n x n` matrix of Euclidean distances.
pub fn pairwise_distances(locations: &[Point]) -> Matrix {
    let n = locations.len();
    let mut d = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let v = distance(&locations[i], &locations[j]);
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    d
}

/// Median over points of the distance to the nearest other point.
pub fn median_nearest_neighbor(locations: &[Point]) -> f64 {
    if locations.len() < 2 {
        return 0.0;
    }
    let mut nn: Vec<f64> = locations
        .iter()
        .enumerate()
        .map(|(i, p)| {
            locations
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, q)| distance(p, q))
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    crate::numerics::median(&mut nn)
}

/// Regular lattice of prediction nodes, iterated row-major (x fastest).
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RegularGrid {
    origin: Point,
    end: Point,
    spacing: [f64; 2],
    dims: [usize; 2],
}

impl RegularGrid {
    /// Grid whose first node sits at the lower corner and last node at the upper corner.
    pub fn new(bounds: [(f64, f64); 2], dims: [usize; 2]) -> Result<Self> {
        let mut spacing = [0.0; 2];
        for axis in 0..2 {
            let (lo, hi) = bounds[axis];
            if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
                return Err(Error::DegenerateBounds { axis, min: lo, max: hi });
            }
            if dims[axis] == 0 {
                return Err(Error::InvalidInput(format!("grid dimension {axis} is zero")));
            }
            spacing[axis] = if dims[axis] == 1 { hi - lo } else { (hi - lo) / (dims[axis] - 1) as f64 };
        }
        Ok(Self {
            origin: [bounds[0].0, bounds[1].0],
            end: [bounds[0].1, bounds[1].1],
            spacing,
            dims,
        })
    }

    pub fn len(&self) -> usize {
        self.dims[0] * self.dims[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dims(&self) -> [usize; 2] {
        self.dims
    }

    pub fn spacing(&self) -> [f64; 2] {
        self.spacing
    }

    pub fn origin(&self) -> Point {
        self.origin
    }

    fn coordinate(&self, axis: usize, i: usize) -> f64 {
        if self.dims[axis] > 1 && i == self.dims[axis] - 1 {
            self.end[axis]
        } else {
            self.origin[axis] + i as f64 * self.spacing[axis]
        }
    }

    /// Node at column `i` (x index) and row `j` (y index).
    pub fn node(&self, i: usize, j: usize) -> Point {
        [self.coordinate(0, i), self.coordinate(1, j)]
    }

    /// All nodes in row-major order.
    pub fn nodes(&self) -> Vec<Point> {
        let mut out = Vec::with_capacity(self.len());
        for j in 0..self.dims[1] {
            for i in 0..self.dims[0] {
                out.push(self.node(i, j));
            }
        }
        out
    }
}

/// Convenience wrapper for [`RegularGrid::new`].
pub fn make_regular_grid(bounds: [(f64, f64); 2], dims: [usize; 2]) -> Result<RegularGrid> {
    RegularGrid::new(bounds, dims)
}

/// Symmetric positive-definite 2x2 smoothing matrix `H`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BandwidthMatrix {
    entries: [[f64; 2]; 2],
}

impl BandwidthMatrix {
    pub fn diagonal(h1: f64, h2: f64) -> Result<Self> {
        Self::new([[h1, 0.0], [0.0, h2]])
    }

    pub fn isotropic(h: f64) -> Result<Self> {
        Self::diagonal(h, h)
    }

    /// Full symmetric matrix. Rejects asymmetric or non positive definite input.
    pub fn new(entries: [[f64; 2]; 2]) -> Result<Self> {
        let [[a, b], [c, d]] = entries;
        if ![a, b, c, d].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("non-finite bandwidth entry".into()));
        }
        let scale = a.abs().max(d.abs()).max(b.abs());
        if (b - c).abs() > 1e-12 * scale {
            return Err(Error::NotSymmetric { asymmetry: (b - c).abs() });
        }
        if a <= 0.0 || a * d - b * b <= 0.0 {
            return Err(Error::InvalidInput(format!("bandwidth {entries:?} is not positive definite")));
        }
        Ok(Self { entries: [[a, b], [b, d]] })
    }

    pub fn entries(&self) -> [[f64; 2]; 2] {
        self.entries
    }

    pub fn determinant(&self) -> f64 {
        let [[a, b], [_, d]] = self.entries;
        a * d - b * b
    }

    pub fn is_diagonal(&self) -> bool {
        self.entries[0][1] == 0.0
    }

    pub fn diag(&self) -> [f64; 2] {
        [self.entries[0][0], self.entries[1][1]]
    }

    /// `H^{-1} u`.
    #[inline]
    pub fn inverse_apply(&self, u: [f64; 2]) -> [f64; 2] {
        let [[a, b], [_, d]] = self.entries;
        if b == 0.0 {
            return [u[0] / a, u[1] / d];
        }
        let det = a * d - b * b;
        [(d * u[0] - b * u[1]) / det, (a * u[1] - b * u[0]) / det]
    }

    /// `s * H`.
    pub fn scaled(&self, s: f64) -> Result<Self> {
        let [[a, b], [_, d]] = self.entries;
        Self::new([[a * s, b * s], [b * s, d * s]])
    }
}
