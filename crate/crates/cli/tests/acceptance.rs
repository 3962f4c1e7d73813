//! Acceptance suite: one line per criterion.
//!
//! Runs with `cargo test --test acceptance`. The full-scale table1 run is
//! skipped unless `ACCEPTANCE_FULL=1`. Failing criteria are reported on their
//! own line; the process exits nonzero for them only when `ACCEPTANCE_STRICT=1`.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::Instant;

use georisk_core::bootstrap::{fit_pipeline_cached, Mode, PipelineConfig, TrendBandwidth, Truth};
use georisk_core::geometry::{distance, pairwise_distances};
use georisk_core::kriging::KrigingSystem;
use georisk_core::numerics::{bessel_j0, cholesky, logspace, nnls, normal_cdf, solve_lower, Matrix, RidgePolicy};
use georisk_core::rng::{stream, Domain, Rng};
use georisk_core::simulation::{
    run_scenario, simulate_field, true_risk, true_trend, ExponentialVariogram, Scale, Scenario, ScenarioResult,
};
use georisk_core::trend::{
    cgcv_score, fit_trend, gcv_score, predict_trend, select_bandwidth, smoother_matrix, BandwidthGrid, Criterion,
    SmootherOptions, TargetSmoother,
};
use georisk_core::variogram::{bias_matrix, covariance_matrix, Variogram};
use georisk_core::{BandwidthMatrix, Point, SpatialSample};

struct Outcome {
    pass: Option<bool>,
    detail: String,
}

fn pass_if(pass: bool, detail: String) -> Outcome {
    Outcome { pass: Some(pass), detail }
}

fn skip(detail: &str) -> Outcome {
    Outcome { pass: None, detail: detail.into() }
}

fn random_sample(n: usize, rng: &mut impl Rng, f: impl Fn(Point) -> f64) -> SpatialSample {
    let locs: Vec<Point> = (0..n).map(|_| [rng.random::<f64>(), rng.random::<f64>()]).collect();
    let vals = locs.iter().map(|p| f(*p)).collect();
    SpatialSample::new(locs, vals).unwrap()
}

// ---------------------------------------------------------------- plain oracles

/// Gauss-Jordan inverse with partial pivoting.
fn invert(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let mut m: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = r.clone();
            row.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            row
        })
        .collect();
    for c in 0..n {
        let p = (c..n).max_by(|&x, &y| m[x][c].abs().total_cmp(&m[y][c].abs())).unwrap();
        m.swap(c, p);
        let d = m[c][c];
        for v in m[c].iter_mut() {
            *v /= d;
        }
        for r in 0..n {
            if r != c {
                let f = m[r][c];
                if f != 0.0 {
                    for k in 0..2 * n {
                        m[r][k] -= f * m[c][k];
                    }
                }
            }
        }
    }
    m.into_iter().map(|r| r[n..].to_vec()).collect()
}

/// Weighted least squares weight row at `x`: `e1' (X'WX)^-1 X'W`.
fn wls_row(s: &SpatialSample, x: Point, h: [f64; 2]) -> Vec<f64> {
    let tri = |u: f64| if u.abs() < 1.0 { 35.0 / 32.0 * (1.0 - u * u).powi(3) } else { 0.0 };
    let rows: Vec<[f64; 3]> = s.locations().iter().map(|p| [1.0, p[0] - x[0], p[1] - x[1]]).collect();
    let w: Vec<f64> =
        s.locations().iter().map(|p| tri((p[0] - x[0]) / h[0]) * tri((p[1] - x[1]) / h[1]) / (h[0] * h[1])).collect();
    let mut xtwx = vec![vec![0.0; 3]; 3];
    for (r, wi) in rows.iter().zip(&w) {
        for a in 0..3 {
            for b in 0..3 {
                xtwx[a][b] += wi * r[a] * r[b];
            }
        }
    }
    let inv = invert(&xtwx);
    rows.iter().zip(&w).map(|(r, wi)| wi * (0..3).map(|k| inv[0][k] * r[k]).sum::<f64>()).collect()
}

fn to_rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| m.row(i).to_vec()).collect()
}

fn rand_matrix(n: usize, rng: &mut impl Rng) -> Matrix {
    Matrix::from_fn(n, n, |_, _| rng.random::<f64>() - 0.5)
}

fn rand_spd(n: usize, rng: &mut impl Rng) -> Matrix {
    let a = rand_matrix(n, rng);
    a.matmul_transpose(&a).add(&Matrix::identity(n).scale(0.1))
}

#[derive(Clone, Copy)]
struct Dd(f64, f64);

fn two_sum(a: f64, b: f64) -> Dd {
    let s = a + b;
    Dd(s, b - (s - a))
}

impl Dd {
    fn add(self, o: Dd) -> Dd {
        let s = self.0 + o.0;
        let bb = s - self.0;
        let e = (self.0 - (s - bb)) + (o.0 - bb);
        two_sum(s, e + self.1 + o.1)
    }

    fn mul(self, o: Dd) -> Dd {
        let p = self.0 * o.0;
        let e = self.0.mul_add(o.0, -p);
        two_sum(p, e + self.0 * o.1 + self.1 * o.0)
    }

    fn div(self, d: f64) -> Dd {
        let q = self.0 / d;
        let p = q * d;
        let e = q.mul_add(d, -p);
        two_sum(q, (self.0 - p - e + self.1) / d)
    }
}

fn j0_series(x: f64) -> f64 {
    let xx = Dd(x * x, x.mul_add(x, -(x * x)));
    let q = Dd(-xx.0 / 4.0, -xx.1 / 4.0);
    let mut term = Dd(1.0, 0.0);
    let mut sum = term;
    for k in 1..400 {
        term = term.mul(q).div((k * k) as f64);
        sum = sum.add(term);
        if term.0.abs() < 1e-40 {
            break;
        }
    }
    sum.0 + sum.1
}

fn phi_series(z: f64) -> f64 {
    let x = z / std::f64::consts::SQRT_2;
    let t = 2.0 * x * x;
    let (mut term, mut sum) = (1.0, 1.0);
    for n in 1..2000 {
        term *= t / (2 * n + 1) as f64;
        sum += term;
        if term < 1e-18 * sum {
            break;
        }
    }
    0.5 * (1.0 + std::f64::consts::FRAC_2_SQRT_PI * x * (-x * x).exp() * sum)
}

// ---------------------------------------------------------------- criteria

fn ordering(res: &ScenarioResult) -> (f64, f64, f64) {
    let m = |mode| res.row(mode, 2.5).unwrap().mean_se;
    (m(Mode::Theoretical), m(Mode::Residual), m(Mode::Corrected))
}

fn c1(res: &ScenarioResult) -> Outcome {
    let (t, r, c) = ordering(res);
    let order = t <= c && c < r;
    let bracket = (1.0e-2..=5.5e-2).contains(&c);
    pass_if(
        order && bracket && res.valid,
        format!(
            "mean SE theoretical {t:.3e}, residual {r:.3e}, corrected {c:.3e}; theoretical <= corrected: {}, corrected < residual: {}, corrected in [1.0e-2, 5.5e-2]: {bracket}, failures {}",
            t <= c,
            c < r,
            res.failures
        ),
    )
}

fn c2() -> Outcome {
    if std::env::var("ACCEPTANCE_FULL").as_deref() != Ok("1") {
        return skip("long run; set ACCEPTANCE_FULL=1");
    }
    let sc = Scenario::table1(Scale::Full);
    let res = run_scenario(&sc, &[Mode::Residual, Mode::Corrected], &PipelineConfig::default()).unwrap();
    let r = res.row(Mode::Residual, 2.5).unwrap().mean_se;
    let c = res.row(Mode::Corrected, 2.5).unwrap().mean_se;
    let ratio = r / c;
    pass_if(
        (c - 2.20e-2).abs() <= 0.5e-2 && (1.4..=2.2).contains(&ratio) && res.valid,
        format!("corrected mean SE {c:.3e} (target 2.20e-2 +- 0.5e-2), residual/corrected {ratio:.3} (target [1.4, 2.2])"),
    )
}

fn c3() -> Outcome {
    let mut means = Vec::new();
    for r in [0.25, 0.5, 0.75] {
        let sc = Scenario::table2(r, Scale::Desk);
        let res = run_scenario(&sc, &[Mode::Corrected], &PipelineConfig::default()).unwrap();
        if !res.valid {
            return pass_if(false, format!("r = {r}: {} failed replicates", res.failures));
        }
        means.push(res.row(Mode::Corrected, 2.5).unwrap().mean_se);
    }
    pass_if(
        means.windows(2).all(|w| w[0] <= w[1]),
        format!("corrected mean SE at r = 0.25, 0.5, 0.75: {:.3e}, {:.3e}, {:.3e}", means[0], means[1], means[2]),
    )
}

/// Oracle value of the theoretical-mode statistic, computed once by
/// [`c4_oracle`] and frozen here.
const C4_ORACLE: f64 = 7.423_328_094_534_710_5e-2;
const C4_REPLICATES: usize = 1000;
const C4_ORACLE_SEED: u64 = 20_240_501;

struct C4Setup {
    scenario: Scenario,
    sample: SpatialSample,
    nodes: Vec<Point>,
    truth_map: Vec<f64>,
    bandwidth: BandwidthMatrix,
}

fn c4_setup() -> C4Setup {
    let mut scenario = Scenario::table1(Scale::Full);
    scenario.replicates = 1;
    scenario.bootstrap = C4_REPLICATES;
    let sample = simulate_field(&scenario, 0).unwrap();
    let nodes = scenario.prediction_grid().unwrap().nodes();
    let truth_map = nodes.iter().map(|p| true_risk(*p, 2.5, &scenario)).collect();
    let m: Vec<f64> = sample.locations().iter().map(|p| true_trend(*p)).collect();
    let sigma = covariance_matrix(&scenario.model(), &pairwise_distances(sample.locations()));
    let grid = BandwidthGrid::default_for(&sample).unwrap();
    let bandwidth = select_bandwidth(
        &sample,
        Criterion::Mase { true_trend: &m, covariance: &sigma },
        &grid,
        &SmootherOptions::default(),
    )
    .unwrap()
    .bandwidth;
    C4Setup { scenario, sample, nodes, truth_map, bandwidth }
}

fn mean_abs_error(truth: &[f64], est: &[Option<f64>]) -> f64 {
    let v: Vec<f64> = truth.iter().zip(est).filter_map(|(t, e)| e.map(|e| (e - t).abs())).collect();
    v.iter().sum::<f64>() / v.len() as f64
}

/// Brute-force theoretical bootstrap: explicit resampling, trend refit and kriging per replicate.
fn c4_oracle(s: &C4Setup) -> f64 {
    let opts = SmootherOptions::default();
    let fit = fit_trend(&s.sample, &s.bandwidth, &opts).unwrap();
    let n = s.sample.len();
    let model = s.scenario.model();
    let l = cholesky(&covariance_matrix(&model, &pairwise_distances(s.sample.locations())), RidgePolicy::Auto).unwrap();
    let mut e = solve_lower(&l, &fit.residuals);
    let mean = e.iter().sum::<f64>() / n as f64;
    e.iter_mut().for_each(|v| *v -= mean);
    let ts = TargetSmoother::new(&s.sample, &s.bandwidth, &s.nodes, &opts);
    let kriging = KrigingSystem::new(s.sample.locations(), model).unwrap();
    let mut counts = vec![0u32; s.nodes.len()];
    for j in 0..C4_REPLICATES {
        let mut rng = stream(C4_ORACLE_SEED, Domain::Synthetic, j as u64);
        let draw: Vec<f64> = (0..n).map(|_| e[rng.random_range(0..n)]).collect();
        let y: Vec<f64> = fit.fitted.iter().zip(l.mul_lower(&draw)).map(|(m, v)| m + v).collect();
        let refit = fit.smoother.apply(&y);
        let resid: Vec<f64> = y.iter().zip(&refit).map(|(a, b)| a - b).collect();
        let sk = kriging.predict(&resid, &s.nodes).unwrap();
        for ((c, m), k) in counts.iter_mut().zip(ts.apply(&y)).zip(sk) {
            if let Some(m) = m {
                if m + k >= 2.5 {
                    *c += 1;
                }
            }
        }
    }
    let est: Vec<Option<f64>> = counts
        .iter()
        .zip(ts.valid())
        .map(|(&c, &v)| v.then(|| c as f64 / C4_REPLICATES as f64))
        .collect();
    mean_abs_error(&s.truth_map, &est)
}

fn c4() -> Outcome {
    let s = c4_setup();
    let opts = SmootherOptions::default();
    let smoother = smoother_matrix(&s.sample, &s.bandwidth, &opts).unwrap();
    let cfg = PipelineConfig { trend: TrendBandwidth::Fixed(s.bandwidth), ..Default::default() };
    let fit = fit_pipeline_cached(&s.sample, &cfg, Some(&smoother)).unwrap();
    let ts = TargetSmoother::new(&s.sample, &s.bandwidth, &s.nodes, &opts);
    let truth = Truth::new(s.sample.locations(), &s.scenario.model(), smoother.matrix(), &ts, &s.nodes).unwrap();
    let maps = fit.risk_maps(Mode::Theoretical, &s.nodes, &[2.5], C4_REPLICATES, 1, Some(&truth)).unwrap();
    let stat = mean_abs_error(&s.truth_map, &maps[0].probabilities);
    let oracle = c4_oracle(&s);
    let frozen_ok = (oracle - C4_ORACLE).abs() <= 1e-12;
    pass_if(
        stat <= 1.25 * C4_ORACLE && frozen_ok,
        format!(
            "mean |r_hat - r| = {stat:.5} vs gate 1.25 x {C4_ORACLE:.5} = {:.5}; oracle rerun {oracle:.6} (frozen match: {frozen_ok})",
            1.25 * C4_ORACLE
        ),
    )
}

fn c5(res: &ScenarioResult) -> Outcome {
    let recs = &res.records;
    let above = recs.iter().filter(|r| r.corrected_sill > r.residual_sill).count();
    let k = recs.len() as f64;
    let mc = recs.iter().map(|r| r.corrected_sill).sum::<f64>() / k;
    let mr = recs.iter().map(|r| r.residual_sill).sum::<f64>() / k;
    let sill = res.scenario.sill();
    pass_if(
        above as f64 >= 0.9 * k && (mc - sill).abs() < (mr - sill).abs(),
        format!("corrected > uncorrected in {above} of {}; mean sill corrected {mc:.4}, uncorrected {mr:.4}, true {sill}", recs.len()),
    )
}

fn c6() -> Outcome {
    let mut rng = stream(606, Domain::Synthetic, 0);
    let opts = SmootherOptions::default();
    let mut smoother_err: f64 = 0.0;
    let mut done = 0;
    while done < 100 {
        let n = rng.random_range(20..=50);
        let s = random_sample(n, &mut rng, |p| (3.0 * p[0]).sin() + p[1] * p[1]);
        let h = [0.35 + 0.5 * rng.random::<f64>(), 0.35 + 0.5 * rng.random::<f64>()];
        let Ok(sm) = smoother_matrix(&s, &BandwidthMatrix::diagonal(h[0], h[1]).unwrap(), &opts) else { continue };
        for i in 0..n {
            let row = wls_row(&s, s.locations()[i], h);
            for (a, b) in sm.matrix().row(i).iter().zip(&row) {
                smoother_err = smoother_err.max((a - b).abs());
            }
        }
        done += 1;
    }

    let mut bias_err: f64 = 0.0;
    for n in [4, 9, 16] {
        let (s, sigma) = (rand_matrix(n, &mut rng), rand_spd(n, &mut rng));
        let b = bias_matrix(&s, &sigma).unwrap().matrix;
        for i in 0..n {
            for j in 0..n {
                let mut expect = 0.0;
                for k in 0..n {
                    for l in 0..n {
                        expect += s[(i, k)] * sigma[(k, l)] * s[(j, l)];
                    }
                    expect -= sigma[(i, k)] * s[(j, k)] + s[(i, k)] * sigma[(k, j)];
                }
                bias_err = bias_err.max((b[(i, j)] - expect).abs());
            }
        }
    }

    let mut sk_err: f64 = 0.0;
    let model = ExponentialVariogram { nugget: 0.02, partial_sill: 0.1, range: 0.6 };
    for n in [10, 25, 40] {
        let s = random_sample(n, &mut rng, |_| 0.0);
        let sigma = covariance_matrix(&model, &pairwise_distances(s.locations()));
        let inv = invert(&to_rows(&sigma));
        let r: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
        let targets: Vec<Point> = (0..5).map(|_| [rng.random::<f64>(), rng.random::<f64>()]).collect();
        let sys = KrigingSystem::new(s.locations(), model).unwrap();
        let got = sys.predict(&r, &targets).unwrap();
        for (t, g) in targets.iter().zip(got) {
            let c0: Vec<f64> = s.locations().iter().map(|p| model.covariance(distance(p, t))).collect();
            let expect: f64 = (0..n).map(|i| c0[i] * (0..n).map(|j| inv[i][j] * r[j]).sum::<f64>()).sum();
            sk_err = sk_err.max((g - expect).abs());
        }
    }

    let mut nnls_err: f64 = 0.0;
    let mut interior = 0;
    while interior < 50 {
        let a = Matrix::from_fn(12, 4, |i, j| rng.random::<f64>() - 0.5 + if i % 4 == j { 2.0 } else { 0.0 });
        let x: Vec<f64> = (0..4).map(|_| 0.5 + rng.random::<f64>()).collect();
        let b: Vec<f64> = a.mul_vec(&x).into_iter().map(|v| v + 0.05 * (rng.random::<f64>() - 0.5)).collect();
        let at = a.transpose();
        let ata = to_rows(&at.matmul(&a));
        let atb = at.mul_vec(&b);
        let inv = invert(&ata);
        let oracle: Vec<f64> = (0..4).map(|i| (0..4).map(|j| inv[i][j] * atb[j]).sum()).collect();
        if oracle.iter().any(|v| *v <= 1e-6) {
            continue;
        }
        let sol = nnls(&a, &b, None).unwrap();
        for (p, q) in sol.x.iter().zip(&oracle) {
            nnls_err = nnls_err.max((p - q).abs());
        }
        interior += 1;
    }
    pass_if(
        smoother_err <= 1e-8 && bias_err <= 1e-12 && sk_err <= 1e-8 && nnls_err <= 1e-8,
        format!(
            "max errors: smoother rows {smoother_err:.1e} (1e-8), bias matrix {bias_err:.1e} (1e-12), kriging {sk_err:.1e} (1e-8), nnls {nnls_err:.1e} (1e-8)"
        ),
    )
}

fn c7() -> Outcome {
    let mut rng = stream(707, Domain::Synthetic, 0);
    let opts = SmootherOptions::default();
    let (mut affine, mut rowsum, mut cgcv) = (0.0f64, 0.0f64, 0.0f64);
    for _ in 0..20 {
        let (a, b, c) = (rng.random::<f64>(), rng.random::<f64>() - 0.5, 2.0 * rng.random::<f64>());
        let s = random_sample(60, &mut rng, |p| a + b * p[0] + c * p[1]);
        let h = BandwidthMatrix::diagonal(0.4 + 0.3 * rng.random::<f64>(), 0.4 + 0.3 * rng.random::<f64>()).unwrap();
        let Ok(fit) = fit_trend(&s, &h, &opts) else { continue };
        for (f, y) in fit.fitted.iter().zip(s.values()) {
            affine = affine.max((f - y).abs());
        }
        let targets: Vec<Point> = (0..10).map(|_| [0.2 + 0.6 * rng.random::<f64>(), 0.2 + 0.6 * rng.random::<f64>()]).collect();
        for (t, v) in targets.iter().zip(predict_trend(&fit, &targets).unwrap()) {
            affine = affine.max((v - (a + b * t[0] + c * t[1])).abs());
        }
        let m = fit.smoother.matrix();
        for i in 0..m.rows() {
            rowsum = rowsum.max((m.row(i).iter().sum::<f64>() - 1.0).abs());
        }
        let noisy = s.with_values(s.values().iter().map(|v| v + 0.1 * (rng.random::<f64>() - 0.5)).collect()).unwrap();
        let g = gcv_score(&noisy, &fit.smoother).unwrap();
        let cg = cgcv_score(&noisy, &fit.smoother, &Matrix::identity(60)).unwrap();
        cgcv = cgcv.max((g - cg).abs());
    }

    let sigma = rand_spd(8, &mut rng);
    let b = bias_matrix(&Matrix::identity(8), &sigma).unwrap().matrix;
    let exact = (0..8).all(|i| (0..8).all(|j| b[(i, j)] == -sigma[(i, j)]));

    let model = ExponentialVariogram { nugget: 0.0, partial_sill: 0.15, range: 0.5 };
    let s = random_sample(30, &mut rng, |_| 0.0);
    let r: Vec<f64> = (0..30).map(|_| rng.random::<f64>() - 0.5).collect();
    let sk = KrigingSystem::new(s.locations(), model).unwrap().predict(&r, s.locations()).unwrap();
    let interp = sk.iter().zip(&r).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);

    let mut eq6: f64 = 0.0;
    for n in [5, 12] {
        let (sm, sigma) = (rand_matrix(n, &mut rng), rand_spd(n, &mut rng));
        let b = bias_matrix(&sm, &sigma).unwrap().matrix;
        let i_s = Matrix::identity(n).sub(&sm);
        let resid = i_s.matmul(&sigma).matmul_transpose(&i_s);
        for i in 0..n {
            for j in 0..n {
                let lhs = resid[(i, i)] + resid[(j, j)] - 2.0 * resid[(i, j)];
                let rhs = sigma[(i, i)] + sigma[(j, j)] - 2.0 * sigma[(i, j)] + b[(i, i)] + b[(j, j)] - 2.0 * b[(i, j)];
                eq6 = eq6.max((lhs - rhs).abs());
            }
        }
    }
    pass_if(
        affine <= 1e-9 && rowsum <= 1e-10 && cgcv <= 1e-12 && exact && interp <= 1e-8 && eq6 <= 1e-10,
        format!(
            "affine {affine:.1e} (1e-9), row sums {rowsum:.1e} (1e-10), CGCV-GCV {cgcv:.1e} (1e-12), S=I gives -Sigma exactly: {exact}, SK interpolation {interp:.1e} (1e-8), pair identity {eq6:.1e} (1e-10)"
        ),
    )
}

fn c8() -> Outcome {
    let j0 = logspace(1e-3, 40.0, 1000).into_iter().map(|x| (bessel_j0(x) - j0_series(x)).abs()).fold(0.0, f64::max);
    let phi = (0..1000)
        .map(|i| -8.0 + 16.0 * i as f64 / 999.0)
        .map(|z| (normal_cdf(z) - phi_series(z)).abs())
        .fold(0.0, f64::max);
    let mut rng = stream(808, Domain::Synthetic, 0);
    let mut chol: f64 = 0.0;
    for n in [1, 3, 10, 35, 80] {
        let a = rand_spd(n, &mut rng);
        let l = cholesky(&a, RidgePolicy::None).unwrap();
        chol = chol.max(l.reconstruct().sub(&a).frobenius_norm() / a.frobenius_norm());
    }
    pass_if(
        j0 <= 1e-10 && phi <= 1e-12 && chol <= 1e-10,
        format!("J0 {j0:.1e} (1e-10), Phi {phi:.1e} (1e-12), Cholesky relative {chol:.1e} (1e-10)"),
    )
}

fn georisk(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_georisk"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("georisk {} exited with {:?}: {}", args[0], out.status.code(), String::from_utf8_lossy(&out.stderr)))
    }
}

fn same_files(a: &Path, b: &Path, names: &[&str]) -> Result<(), String> {
    for n in names {
        let (x, y) = (fs::read(a.join(n)).map_err(|e| format!("{n}: {e}"))?, fs::read(b.join(n)).map_err(|e| e.to_string())?);
        if x != y {
            return Err(format!("{n} differs"));
        }
    }
    Ok(())
}

fn c9(dir: &Path) -> Outcome {
    let run = || -> Result<(), String> {
        let p = |x: &Path| x.to_str().unwrap().to_string();
        let (s1, s2) = (dir.join("sim1"), dir.join("sim2"));
        for (out, t) in [(&s1, "1"), (&s2, "4")] {
            georisk(&["simulate", "--scenario", "table1", "--N", "10", "--out", &p(out), "--threads", t])?;
        }
        same_files(&s1, &s2, &["simulation.csv", "simulation.json"])?;
        let data = dir.join("data");
        georisk(&["synth-data", "--n", "300", "--out", &p(&data)])?;
        let input = p(&data.join("synthetic.csv"));
        let (r1, r2) = (dir.join("rm1"), dir.join("rm2"));
        for (out, t) in [(&r1, "1"), (&r2, "3")] {
            georisk(&[
                "riskmap", "--input", &input, "--transform", "sqrt", "--thresholds", "1.0,2.0", "--replicates", "200",
                "--out", &p(out), "--threads", t, "--svg",
            ])?;
        }
        same_files(&r1, &r2, &["riskmap_c1.csv", "riskmap_c2.csv", "riskmap.json", "riskmap_c1.svg", "riskmap_c2.svg"])
    };
    match run() {
        Ok(()) => pass_if(true, "simulate (threads 1 vs 4) and riskmap (threads 1 vs 3) outputs byte-identical".into()),
        Err(e) => pass_if(false, e),
    }
}

fn c10(dir: &Path, res: &ScenarioResult) -> Outcome {
    let mut notes = Vec::new();
    let mut ok = res.valid;

    // lattice, monotonicity and limits on a fitted desk-scale replicate
    let sc = &res.scenario;
    let sample = simulate_field(sc, 0).unwrap();
    let fit = fit_pipeline_cached(&sample, &PipelineConfig::default(), None).unwrap();
    let nodes = sc.prediction_grid().unwrap().nodes();
    let b = 200;
    let thresholds = [f64::NEG_INFINITY, 2.0, 2.5, 3.0, f64::INFINITY];
    let maps = fit.risk_maps(Mode::Corrected, &nodes, &thresholds, b, 9, None).unwrap();
    let lattice = maps.iter().flat_map(|m| m.probabilities.iter().flatten()).all(|p| {
        let k = p * b as f64;
        (k - k.round()).abs() < 1e-9 && (0.0..=1.0).contains(p)
    });
    let monotone = maps.windows(2).all(|w| {
        w[0].probabilities.iter().zip(&w[1].probabilities).all(|(a, b)| match (a, b) {
            (Some(a), Some(b)) => a >= b,
            (None, None) => true,
            _ => false,
        })
    });
    let limits = maps[0].probabilities.iter().flatten().all(|p| *p == 1.0)
        && maps[4].probabilities.iter().flatten().all(|p| *p == 0.0);
    ok &= lattice && monotone && limits;
    notes.push(format!("lattice k/B: {lattice}, monotone: {monotone}, +-inf limits: {limits}"));

    let e2e = || -> Result<(), String> {
        let p = |x: &Path| x.to_str().unwrap().to_string();
        let data = dir.join("precip");
        georisk(&["synth-data", "--out", &p(&data)])?;
        let input = p(&data.join("synthetic.csv"));
        let rows = fs::read_to_string(data.join("synthetic.csv")).map_err(|e| e.to_string())?.lines().count() - 1;
        if rows != 1053 {
            return Err(format!("synthetic file has {rows} rows"));
        }
        let rm = dir.join("precip-riskmap");
        georisk(&["riskmap", "--input", &input, "--transform", "sqrt", "--thresholds", "1.0,2.0", "--out", &p(&rm), "--svg"])?;
        let fit = dir.join("precip-fit");
        georisk(&["fit", "--input", &input, "--transform", "sqrt", "--out", &p(&fit), "--svg"])?;
        for (d, names) in [
            (&rm, &["riskmap_c1.csv", "riskmap_c2.csv", "riskmap.json", "riskmap_c1.svg", "riskmap_c2.svg", "timings.json"][..]),
            (&fit, &["trend.csv", "kriging.csv", "variogram.csv", "fit.json", "trend.svg", "kriging.svg"][..]),
        ] {
            for n in names {
                if !d.join(n).exists() {
                    return Err(format!("{n} missing"));
                }
            }
        }
        Ok(())
    };
    match e2e() {
        Ok(()) => notes.push("1053-location synthetic run emitted all files".into()),
        Err(e) => {
            ok = false;
            notes.push(e);
        }
    }
    pass_if(ok, notes.join("; "))
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    if args.iter().any(|a| a == "--list") {
        return;
    }
    if args.iter().any(|a| a == "--c4-oracle") {
        println!("{:.17e}", c4_oracle(&c4_setup()));
        return;
    }
    let dir = tempfile::tempdir().expect("temp dir");
    let start = Instant::now();
    let table1 = run_scenario(&Scenario::table1(Scale::Desk), &Mode::ALL, &PipelineConfig::default())
        .expect("desk table1 run");
    println!("desk table1 run finished in {:.1} s", start.elapsed().as_secs_f64());

    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("table1 ordering, desk scale", Box::new(|| c1(&table1))),
        ("table1 point value, full scale", Box::new(c2)),
        ("table2 trend in range, desk scale", Box::new(c3)),
        ("theoretical-mode risk accuracy", Box::new(c4)),
        ("bias-correction direction", Box::new(|| c5(&table1))),
        ("estimator oracle equivalence", Box::new(c6)),
        ("analytic identities", Box::new(c7)),
        ("special functions", Box::new(c8)),
        ("determinism across thread counts", Box::new(|| c9(dir.path()))),
        ("risk-map sanity", Box::new(|| c10(dir.path(), &table1))),
    ];
    let mut failed = 0;
    for (k, (name, f)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let o = f();
        let tag = match o.pass {
            Some(true) => "PASS",
            Some(false) => {
                failed += 1;
                "FAIL"
            }
            None => "SKIP",
        };
        println!("criterion {:>2} {tag} [{:.1} s] {name}: {}", k + 1, t.elapsed().as_secs_f64(), o.detail);
    }
    println!("acceptance: {} of {} criteria failed", failed, criteria.len());
    if failed > 0 && std::env::var("ACCEPTANCE_STRICT").as_deref() == Ok("1") {
        std::process::exit(1);
    }
}
