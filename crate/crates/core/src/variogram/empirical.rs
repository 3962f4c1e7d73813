//! Isotropic local linear semivariogram estimation on pair distances.

use alloc::vec;
use alloc::vec::Vec;

use crate::geometry::{pairwise_distances, Point};
use crate::numerics::linalg::Matrix;
use crate::numerics::{linspace, logspace, Kernel};
use crate::{Error, Result};

/// Pair distances closer than this (relative) share a node.
const GROUP_TOL: f64 = 1e-10;
/// Above this many distinct distances the pairs are linearly binned.
const EXACT_NODE_LIMIT: usize = 2048;
const BINS: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct VariogramOptions {
    pub kernel: Kernel,
    /// Pairs with nonzero kernel weight required at every lag.
    pub min_pairs: usize,
}

impl Default for VariogramOptions {
    fn default() -> Self {
        Self { kernel: Kernel::Triweight, min_pairs: 5 }
    }
}

/// Increasing grid of positive lag distances.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LagGrid {
    lags: Vec<f64>,
}

impl LagGrid {
    pub fn new(lags: Vec<f64>) -> Result<Self> {
        if lags.is_empty() {
            return Err(Error::InvalidInput("empty lag grid".into()));
        }
        if !(lags[0] > 0.0) || lags.windows(2).any(|w| !(w[1] > w[0])) || !lags.iter().all(|l| l.is_finite()) {
            return Err(Error::InvalidInput("lags must be positive, finite and strictly increasing".into()));
        }
        Ok(Self { lags })
    }

    /// `count` equally spaced lags from `u_max / 50` to `u_max = fraction * max_distance`.
    pub fn regular(max_distance: f64, fraction: f64, count: usize) -> Result<Self> {
        let u_max = fraction * max_distance;
        if !(u_max > 0.0) || count == 0 {
            return Err(Error::InvalidInput(alloc::format!("invalid lag range up to {u_max}")));
        }
        if count == 1 {
            return Self::new(vec![u_max]);
        }
        Self::new(linspace(u_max / 50.0, u_max, count))
    }

    /// 25 lags up to 55% of the largest pair distance.
    pub fn default_for(max_distance: f64) -> Result<Self> {
        Self::regular(max_distance, 0.55, 25)
    }

    pub fn lags(&self) -> &[f64] {
        &self.lags
    }

    pub fn len(&self) -> usize {
        self.lags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lags.is_empty()
    }

    pub fn max_lag(&self) -> f64 {
        *self.lags.last().unwrap()
    }
}

/// Semivariogram estimates on a lag grid.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EmpiricalVariogram {
    pub lags: Vec<f64>,
    pub estimates: Vec<f64>,
    /// Pairs inside the kernel window at each lag (fractional when binned).
    pub pair_counts: Vec<f64>,
    pub bandwidth: f64,
}

impl EmpiricalVariogram {
    /// Largest estimate.
    pub fn max_estimate(&self) -> f64 {
        self.estimates.iter().copied().fold(0.0, f64::max)
    }

    /// Piecewise linear interpolation, constant outside the lag range.
    pub fn interpolate(&self, u: f64) -> f64 {
        let (l, e) = (&self.lags, &self.estimates);
        if u <= l[0] {
            return e[0];
        }
        let last = l.len() - 1;
        if u >= l[last] {
            return e[last];
        }
        let k = l.partition_point(|&x| x <= u);
        let t = (u - l[k - 1]) / (l[k] - l[k - 1]);
        e[k - 1] + t * (e[k] - e[k - 1])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Assignment {
    node: u32,
    /// Share of the pair on `node`; the rest goes to `node + 1`.
    share: f64,
}

/// All pairs `i < j` sorted by distance and collapsed onto distance nodes.
///
/// Pairs at equal distance (regular designs) share an exact node. When the
/// number of distinct distances is large the pairs are linearly binned onto a
/// fine regular grid of nodes instead.
#[derive(Debug, Clone, PartialEq)]
pub struct PairSet {
    n: usize,
    pairs: Vec<(u32, u32)>,
    distances: Vec<f64>,
    assignments: Vec<Assignment>,
    nodes: Vec<f64>,
    node_weights: Vec<f64>,
    binned: bool,
    max_distance: f64,
}

impl PairSet {
    pub fn from_locations(locations: &[Point]) -> Result<Self> {
        Self::from_distances(&pairwise_distances(locations))
    }

    pub fn from_distances(distances: &Matrix) -> Result<Self> {
        let n = distances.rows();
        if !distances.is_square() {
            return Err(Error::DimensionMismatch("distance matrix must be square".into()));
        }
        if n < 2 {
            return Err(Error::InvalidInput("variogram estimation needs at least two points".into()));
        }
        let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
        for i in 0..n {
            for j in i + 1..n {
                pairs.push((i as u32, j as u32));
            }
        }
        let d = |p: &(u32, u32)| distances[(p.0 as usize, p.1 as usize)];
        if pairs.iter().any(|p| !(d(p) >= 0.0) || !d(p).is_finite()) {
            return Err(Error::InvalidInput("pair distances must be finite and nonnegative".into()));
        }
        pairs.sort_by(|a, b| d(a).total_cmp(&d(b)).then(a.cmp(b)));
        let dists: Vec<f64> = pairs.iter().map(d).collect();
        let max_distance = *dists.last().unwrap();

        let mut nodes = Vec::new();
        let mut assignments = Vec::with_capacity(dists.len());
        let mut start = f64::NEG_INFINITY;
        for &x in &dists {
            if x - start > GROUP_TOL * x.max(1.0) {
                start = x;
                nodes.push(x);
            }
            assignments.push(Assignment { node: (nodes.len() - 1) as u32, share: 1.0 });
        }
        let binned = nodes.len() > EXACT_NODE_LIMIT;
        if binned {
            let step = max_distance / BINS as f64;
            nodes = (0..=BINS).map(|k| k as f64 * step).collect();
            for (a, &x) in assignments.iter_mut().zip(&dists) {
                let pos = (x / step).min(BINS as f64);
                let k = (libm::floor(pos) as usize).min(BINS - 1);
                *a = Assignment { node: k as u32, share: 1.0 - (pos - k as f64) };
            }
        }
        let mut node_weights = vec![0.0; nodes.len()];
        for a in &assignments {
            node_weights[a.node as usize] += a.share;
            if a.share < 1.0 {
                node_weights[a.node as usize + 1] += 1.0 - a.share;
            }
        }
        Ok(Self { n, pairs, distances: dists, assignments, nodes, node_weights, binned, max_distance })
    }

    /// Number of points.
    pub fn points(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[(u32, u32)] {
        &self.pairs
    }

    pub fn distances(&self) -> &[f64] {
        &self.distances
    }

    pub fn max_distance(&self) -> f64 {
        self.max_distance
    }

    pub fn is_binned(&self) -> bool {
        self.binned
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    /// Squared differences `(e_i - e_j)^2` in pair order.
    pub fn squared_differences(&self, residuals: &[f64]) -> Result<Vec<f64>> {
        if residuals.len() != self.n {
            return Err(Error::DimensionMismatch(alloc::format!(
                "{} residuals for {} points",
                residuals.len(),
                self.n
            )));
        }
        Ok(self
            .pairs
            .iter()
            .map(|&(i, j)| {
                let d = residuals[i as usize] - residuals[j as usize];
                d * d
            })
            .collect())
    }

    /// `b_ii + b_jj - 2 b_ij` in pair order.
    pub fn bias_terms(&self, bias: &Matrix) -> Result<Vec<f64>> {
        if bias.rows() != self.n || bias.cols() != self.n {
            return Err(Error::DimensionMismatch("bias matrix does not match the pair set".into()));
        }
        Ok(self
            .pairs
            .iter()
            .map(|&(i, j)| {
                let (i, j) = (i as usize, j as usize);
                bias[(i, i)] + bias[(j, j)] - 2.0 * bias[(i, j)]
            })
            .collect())
    }

    fn node_sums(&self, values: &[f64]) -> Vec<f64> {
        let mut sums = vec![0.0; self.nodes.len()];
        for (a, v) in self.assignments.iter().zip(values) {
            sums[a.node as usize] += a.share * v;
            if a.share < 1.0 {
                sums[a.node as usize + 1] += (1.0 - a.share) * v;
            }
        }
        sums
    }

    fn window_sums(&self, sums: &[f64], u: f64, g: f64, kernel: Kernel) -> WindowSums {
        let lo = self.nodes.partition_point(|&x| x <= u - g);
        let hi = self.nodes.partition_point(|&x| x < u + g);
        let mut w = WindowSums::default();
        for k in lo..hi {
            let delta = self.nodes[k] - u;
            let kw = kernel.univariate(delta / g);
            if kw == 0.0 {
                continue;
            }
            let a = kw * self.node_weights[k];
            w.s0 += a;
            w.s1 += a * delta;
            w.s2 += a * delta * delta;
            w.t0 += kw * sums[k];
            w.t1 += kw * sums[k] * delta;
            w.count += self.node_weights[k];
        }
        w
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct WindowSums {
    s0: f64,
    s1: f64,
    s2: f64,
    t0: f64,
    t1: f64,
    count: f64,
}

impl WindowSums {
    /// Intercept of the weighted linear fit, local constant when the slope is not identified.
    fn intercept(&self) -> Option<f64> {
        if !(self.s0 > 0.0) {
            return None;
        }
        let det = self.s0 * self.s2 - self.s1 * self.s1;
        if det > 1e-10 * self.s0 * self.s2 {
            Some((self.s2 * self.t0 - self.s1 * self.t1) / det)
        } else {
            Some(self.t0 / self.s0)
        }
    }
}

fn check_bandwidth(g: f64) -> Result<()> {
    if !(g > 0.0) || !g.is_finite() {
        return Err(Error::InvalidInput(alloc::format!("variogram bandwidth must be positive, got {g}")));
    }
    Ok(())
}

/// Local linear estimate from arbitrary per-pair values (in pair order).
///
/// The fit estimates the mean of the values, so squared differences give
/// `2 gamma`; the stored estimate is half the intercept, clamped at zero.
pub fn variogram_from_pair_values(
    pairs: &PairSet,
    values: &[f64],
    lags: &LagGrid,
    g: f64,
    opts: &VariogramOptions,
) -> Result<EmpiricalVariogram> {
    check_bandwidth(g)?;
    if values.len() != pairs.len() {
        return Err(Error::DimensionMismatch("one value per pair expected".into()));
    }
    let sums = pairs.node_sums(values);
    let mut estimates = Vec::with_capacity(lags.len());
    let mut counts = Vec::with_capacity(lags.len());
    for (k, &u) in lags.lags().iter().enumerate() {
        let w = pairs.window_sums(&sums, u, g, opts.kernel);
        let required = opts.min_pairs.max(1);
        if w.count + 1e-9 < required as f64 {
            return Err(Error::TooFewPairs { index: k, lag: u, pairs: w.count, required });
        }
        let alpha = w.intercept().ok_or(Error::TooFewPairs { index: k, lag: u, pairs: w.count, required })?;
        estimates.push((0.5 * alpha).max(0.0));
        counts.push(w.count);
    }
    Ok(EmpiricalVariogram { lags: lags.lags().to_vec(), estimates, pair_counts: counts, bandwidth: g })
}

/// Local linear semivariogram of `residuals`, optionally with the squared
/// differences reduced by `b_ii + b_jj - 2 b_ij` from a bias matrix.
pub fn empirical_variogram(
    residuals: &[f64],
    pairs: &PairSet,
    lags: &LagGrid,
    g: f64,
    bias: Option<&Matrix>,
    opts: &VariogramOptions,
) -> Result<EmpiricalVariogram> {
    let mut values = pairs.squared_differences(residuals)?;
    if let Some(b) = bias {
        for (v, t) in values.iter_mut().zip(pairs.bias_terms(b)?) {
            *v -= t;
        }
    }
    variogram_from_pair_values(pairs, &values, lags, g, opts)
}

/// Leave-one-pair-out relative squared error of the semivariogram fit.
///
/// Only pairs up to the last lag are scored; pairs whose left-out estimate is
/// not above `1e-12` are skipped.
pub fn cv_relative_error(
    residuals: &[f64],
    pairs: &PairSet,
    lags: &LagGrid,
    g: f64,
    opts: &VariogramOptions,
) -> Result<f64> {
    check_bandwidth(g)?;
    let values = pairs.squared_differences(residuals)?;
    let sums = pairs.node_sums(&values);
    let max_lag = lags.max_lag();
    let k0 = opts.kernel.univariate(0.0);
    let mut cached: Option<(u32, WindowSums)> = None;
    let mut total = 0.0;
    let mut scored = 0usize;
    for (p, (&d, &v)) in pairs.distances.iter().zip(&values).enumerate() {
        if d > max_lag {
            break;
        }
        let a = pairs.assignments[p];
        let mut w = if pairs.binned {
            pairs.window_sums(&sums, d, g, opts.kernel)
        } else {
            match cached {
                Some((node, w)) if node == a.node => w,
                _ => {
                    let w = pairs.window_sums(&sums, pairs.nodes[a.node as usize], g, opts.kernel);
                    cached = Some((a.node, w));
                    w
                }
            }
        };
        let u = if pairs.binned { d } else { pairs.nodes[a.node as usize] };
        remove_pair(&mut w, pairs, a, v, u, g, opts.kernel, k0);
        let Some(alpha) = w.intercept() else { continue };
        let gamma = 0.5 * alpha;
        if !(gamma > 1e-12) {
            continue;
        }
        let r = (0.5 * v - gamma) / gamma;
        total += r * r;
        scored += 1;
    }
    if scored == 0 {
        let skipped = pairs.distances.partition_point(|&d| d <= max_lag);
        return Err(Error::DegenerateScore { skipped });
    }
    Ok(total)
}

#[allow(clippy::too_many_arguments)]
fn remove_pair(w: &mut WindowSums, pairs: &PairSet, a: Assignment, v: f64, u: f64, g: f64, kernel: Kernel, k0: f64) {
    let mut take = |node: usize, share: f64| {
        let delta = pairs.nodes[node] - u;
        let kw = if pairs.binned { kernel.univariate(delta / g) } else { k0 };
        let delta = if pairs.binned { delta } else { 0.0 };
        let s = kw * share;
        w.s0 -= s;
        w.s1 -= s * delta;
        w.s2 -= s * delta * delta;
        w.t0 -= s * v;
        w.t1 -= s * v * delta;
        if kw != 0.0 {
            w.count -= share;
        }
    };
    take(a.node as usize, a.share);
    if a.share < 1.0 {
        take(a.node as usize + 1, 1.0 - a.share);
    }
}

/// Candidate variogram bandwidths: 10 log-spaced values in `[u_max / 25, u_max]`.
pub fn default_bandwidth_candidates(lags: &LagGrid) -> Vec<f64> {
    let u_max = lags.max_lag();
    logspace(u_max / 25.0, u_max, 10)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariogramBandwidth {
    pub bandwidth: f64,
    pub score: f64,
    pub scores: Vec<Option<f64>>,
}

/// Minimizes [`cv_relative_error`] over admissible candidates; ties go to the larger bandwidth.
pub fn select_variogram_bandwidth(
    residuals: &[f64],
    pairs: &PairSet,
    lags: &LagGrid,
    candidates: &[f64],
    opts: &VariogramOptions,
) -> Result<VariogramBandwidth> {
    if candidates.is_empty() {
        return Err(Error::InvalidInput("no variogram bandwidth candidates".into()));
    }
    let values = pairs.squared_differences(residuals)?;
    let mut scores = Vec::with_capacity(candidates.len());
    let mut best: Option<(f64, f64)> = None;
    let mut last_err = None;
    let mut flat = None;
    for &g in candidates {
        let admissible = variogram_from_pair_values(pairs, &values, lags, g, opts);
        if admissible.is_ok() {
            flat = Some(g);
        }
        let score = admissible.and_then(|_| cv_relative_error(residuals, pairs, lags, g, opts));
        match score {
            Ok(s) if s.is_finite() => {
                scores.push(Some(s));
                best = match best {
                    Some((bg, bs)) if !(s < bs || (s == bs && g > bg)) => Some((bg, bs)),
                    _ => Some((g, s)),
                };
            }
            Ok(_) => scores.push(None),
            Err(e) => {
                scores.push(None);
                last_err = Some(e);
            }
        }
    }
    match (best, last_err, flat) {
        (Some((bandwidth, score)), _, _) => Ok(VariogramBandwidth { bandwidth, score, scores }),
        // residuals numerically zero: every admissible bandwidth gives the same zero estimate
        (None, Some(Error::DegenerateScore { .. }), Some(g)) if values.iter().all(|v| *v <= 1e-24) => {
            Ok(VariogramBandwidth { bandwidth: g, score: 0.0, scores })
        }
        (None, e, _) => Err(e.unwrap_or(Error::DegenerateScore { skipped: pairs.len() })),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::make_regular_grid;

    fn line(n: usize) -> Vec<Point> {
        (0..n).map(|i| [i as f64, 0.0]).collect()
    }

    #[test]
    fn default_lag_grid() {
        let g = LagGrid::default_for(2.0).unwrap();
        assert_eq!(g.len(), 25);
        assert!((g.lags()[0] - 1.1 / 50.0).abs() < 1e-15);
        assert_eq!(g.max_lag(), 1.1);
        assert!(LagGrid::new(vec![0.2, 0.1]).is_err());
    }

    #[test]
    fn two_points_give_half_squared_difference() {
        let pairs = PairSet::from_locations(&[[0.0, 0.0], [0.3, 0.4]]).unwrap();
        let lags = LagGrid::new(vec![0.5]).unwrap();
        let opts = VariogramOptions { min_pairs: 1, ..Default::default() };
        let v = empirical_variogram(&[1.0, -0.5], &pairs, &lags, 0.2, None, &opts).unwrap();
        assert!((v.estimates[0] - 1.125).abs() < 1e-14);
        assert_eq!(v.pair_counts[0], 1.0);
    }

    #[test]
    fn regular_grid_groups_equal_distances() {
        let locs = make_regular_grid([(0.0, 1.0), (0.0, 1.0)], [10, 10]).unwrap().nodes();
        let pairs = PairSet::from_locations(&locs).unwrap();
        assert_eq!(pairs.len(), 4950);
        assert!(!pairs.is_binned());
        // distinct dx^2 + dy^2 with 0 <= dx <= dy <= 9, excluding 0, minus coincidences like 3-4-5
        assert!(pairs.node_count() < 55);
        assert!((pairs.max_distance() - core::f64::consts::SQRT_2).abs() < 1e-15);
    }

    #[test]
    fn too_few_pairs_names_the_lag() {
        let pairs = PairSet::from_locations(&line(4)).unwrap();
        let lags = LagGrid::new(vec![1.0, 2.9]).unwrap();
        let err = empirical_variogram(&[0.0, 1.0, 0.0, 1.0], &pairs, &lags, 0.5, None, &VariogramOptions::default())
            .unwrap_err();
        assert!(matches!(err, Error::TooFewPairs { index: 0, required: 5, .. }), "{err:?}");
    }

    #[test]
    fn linear_pair_values_reproduced() {
        // values 2 (a + b d) are fitted exactly, so the estimate is a + b u
        let locs: Vec<Point> = (0..12).map(|i| [libm::sin(i as f64 * 1.7) * 3.0, libm::cos(i as f64 * 0.9) * 2.0]).collect();
        let pairs = PairSet::from_locations(&locs).unwrap();
        let values: Vec<f64> = pairs.distances().iter().map(|d| 2.0 * (0.3 + 0.1 * d)).collect();
        let lags = LagGrid::new(vec![1.0, 2.0, 3.0]).unwrap();
        let v = variogram_from_pair_values(&pairs, &values, &lags, 1.5, &VariogramOptions::default()).unwrap();
        for (u, e) in v.lags.iter().zip(&v.estimates) {
            assert!((e - (0.3 + 0.1 * u)).abs() < 1e-12);
        }
    }

    #[test]
    fn brute_force_local_linear() {
        let locs: Vec<Point> = (0..15).map(|i| [(i as f64 * 0.37) % 1.0, (i as f64 * 0.61) % 1.0]).collect();
        let res: Vec<f64> = (0..15).map(|i| libm::sin(i as f64)).collect();
        let pairs = PairSet::from_locations(&locs).unwrap();
        let lags = LagGrid::new(vec![0.2, 0.4, 0.6]).unwrap();
        let g = 0.3;
        let v = empirical_variogram(&res, &pairs, &lags, g, None, &VariogramOptions::default()).unwrap();
        for (k, &u) in lags.lags().iter().enumerate() {
            let (mut s0, mut s1, mut s2, mut t0, mut t1) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for i in 0..15 {
                for j in i + 1..15 {
                    let d = libm::hypot(locs[i][0] - locs[j][0], locs[i][1] - locs[j][1]) - u;
                    let w = Kernel::Triweight.univariate(d / g);
                    let y = (res[i] - res[j]).powi(2);
                    s0 += w;
                    s1 += w * d;
                    s2 += w * d * d;
                    t0 += w * y;
                    t1 += w * y * d;
                }
            }
            let alpha = (s2 * t0 - s1 * t1) / (s0 * s2 - s1 * s1);
            assert!((v.estimates[k] - (0.5 * alpha).max(0.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn binned_matches_exact_closely() {
        // 80 scattered points give more than EXACT_NODE_LIMIT distinct distances
        let mut state = 7u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        let locs: Vec<Point> = (0..80).map(|_| [next(), next()]).collect();
        let pairs = PairSet::from_locations(&locs).unwrap();
        assert!(pairs.is_binned());
        let values: Vec<f64> = pairs.distances().iter().map(|d| 2.0 * (1.0 - libm::exp(-3.0 * d))).collect();
        let lags = LagGrid::default_for(pairs.max_distance()).unwrap();
        let v = variogram_from_pair_values(&pairs, &values, &lags, 0.15, &VariogramOptions::default()).unwrap();
        for (u, e) in v.lags.iter().zip(&v.estimates) {
            assert!((e - (1.0 - libm::exp(-3.0 * u))).abs() < 0.02, "{u}: {e}");
        }
    }

    #[test]
    fn interpolation_is_constant_outside() {
        let v = EmpiricalVariogram {
            lags: vec![1.0, 2.0, 3.0],
            estimates: vec![0.1, 0.3, 0.4],
            pair_counts: vec![5.0; 3],
            bandwidth: 1.0,
        };
        assert_eq!(v.interpolate(0.2), 0.1);
        assert_eq!(v.interpolate(7.0), 0.4);
        assert!((v.interpolate(1.5) - 0.2).abs() < 1e-15);
        assert_eq!(v.interpolate(2.0), 0.3);
    }

    #[test]
    fn cv_zero_for_two_identical_pairs() {
        // two pairs at the same distance with the same squared difference
        let locs = [[0.0, 0.0], [1.0, 0.0], [10.0, 0.0], [11.0, 0.0]];
        let pairs = PairSet::from_locations(&locs).unwrap();
        let lags = LagGrid::new(vec![1.0]).unwrap();
        let opts = VariogramOptions { min_pairs: 1, ..Default::default() };
        let s = cv_relative_error(&[0.0, 1.0, 5.0, 6.0], &pairs, &lags, 0.5, &opts).unwrap();
        assert_eq!(s, 0.0);
    }

    #[test]
    fn cv_degenerate_for_constant_residuals() {
        let locs = make_regular_grid([(0.0, 1.0), (0.0, 1.0)], [5, 5]).unwrap().nodes();
        let pairs = PairSet::from_locations(&locs).unwrap();
        let lags = LagGrid::default_for(pairs.max_distance()).unwrap();
        let err = cv_relative_error(&[0.7; 25], &pairs, &lags, 0.4, &VariogramOptions::default()).unwrap_err();
        assert!(matches!(err, Error::DegenerateScore { .. }));
        let cands = default_bandwidth_candidates(&lags);
        let sel = select_variogram_bandwidth(&[0.7; 25], &pairs, &lags, &cands, &VariogramOptions::default()).unwrap();
        assert_eq!(sel.bandwidth, *cands.last().unwrap());
    }

    // Direct leave-one-pair-out refits.
    fn brute_cv(locs: &[Point], res: &[f64], max_lag: f64, g: f64) -> f64 {
        let n = locs.len();
        let mut list = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                let d = libm::hypot(locs[i][0] - locs[j][0], locs[i][1] - locs[j][1]);
                list.push((d, (res[i] - res[j]).powi(2)));
            }
        }
        let mut total = 0.0;
        for (p, &(dp, vp)) in list.iter().enumerate() {
            if dp > max_lag {
                continue;
            }
            let (mut s0, mut s1, mut s2, mut t0, mut t1) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for (q, &(d, y)) in list.iter().enumerate() {
                if q == p {
                    continue;
                }
                let d = d - dp;
                let w = Kernel::Triweight.univariate(d / g);
                s0 += w;
                s1 += w * d;
                s2 += w * d * d;
                t0 += w * y;
                t1 += w * y * d;
            }
            let det = s0 * s2 - s1 * s1;
            let alpha = if det > 1e-10 * s0 * s2 { (s2 * t0 - s1 * t1) / det } else { t0 / s0 };
            let gamma = 0.5 * alpha;
            if gamma > 1e-12 {
                total += ((0.5 * vp - gamma) / gamma).powi(2);
            }
        }
        total
    }

    #[test]
    fn cv_matches_brute_force_on_grid() {
        let locs = make_regular_grid([(0.0, 1.0), (0.0, 1.0)], [6, 6]).unwrap().nodes();
        let res: Vec<f64> = (0..36).map(|i| libm::sin(i as f64 * 2.3) + 0.1 * i as f64 / 36.0).collect();
        let pairs = PairSet::from_locations(&locs).unwrap();
        let lags = LagGrid::default_for(pairs.max_distance()).unwrap();
        for g in [0.2, 0.5] {
            let fast = cv_relative_error(&res, &pairs, &lags, g, &VariogramOptions::default()).unwrap();
            let slow = brute_cv(&locs, &res, lags.max_lag(), g);
            assert!((fast - slow).abs() < 1e-9 * slow, "{fast} vs {slow}");
        }
    }

    #[test]
    fn selection_prefers_admissible_bandwidth() {
        let locs = make_regular_grid([(0.0, 1.0), (0.0, 1.0)], [8, 8]).unwrap().nodes();
        let res: Vec<f64> = locs.iter().map(|p| libm::sin(6.0 * p[0]) * libm::cos(5.0 * p[1])).collect();
        let pairs = PairSet::from_locations(&locs).unwrap();
        let lags = LagGrid::default_for(pairs.max_distance()).unwrap();
        let cands = default_bandwidth_candidates(&lags);
        assert_eq!(cands.len(), 10);
        let sel = select_variogram_bandwidth(&res, &pairs, &lags, &cands, &VariogramOptions::default()).unwrap();
        let k = cands.iter().position(|c| *c == sel.bandwidth).unwrap();
        assert_eq!(sel.scores[k], Some(sel.score));
        assert!(sel.scores.iter().flatten().all(|s| *s >= sel.score));
    }
}
