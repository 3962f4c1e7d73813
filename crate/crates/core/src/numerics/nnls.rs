//! Non-negative least squares by the Lawson-Hanson active-set method.

use alloc::vec;
use alloc::vec::Vec;

use super::linalg::{dot, Matrix};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct NnlsSolution {
    pub x: Vec<f64>,
    /// `||W^{1/2}(A x - b)||`.
    pub residual_norm: f64,
    /// Number of passive-set least squares solves.
    pub iterations: usize,
}

/// Minimizes `||W^{1/2}(A x - b)||^2` subject to `x >= 0`.
///
/// Rows are scaled by the square roots of `weights` when given. The passive
/// set grows one column at a time; a column that is numerically dependent on
/// the current passive set, or that would enter at a nonpositive value, is
/// skipped until the iterate changes.
pub fn nnls(a: &Matrix, b: &[f64], weights: Option<&[f64]>) -> Result<NnlsSolution> {
    let (m, k) = (a.rows(), a.cols());
    if m == 0 || k == 0 {
        return Err(Error::InvalidInput("nnls needs a nonempty system".into()));
    }
    if b.len() != m {
        return Err(Error::DimensionMismatch(alloc::format!("nnls: {m} rows but b has {}", b.len())));
    }
    let mut aw = a.clone();
    let mut bw = b.to_vec();
    if let Some(w) = weights {
        if w.len() != m {
            return Err(Error::DimensionMismatch(alloc::format!("nnls: {m} rows but {} weights", w.len())));
        }
        for i in 0..m {
            if !(w[i] > 0.0) {
                return Err(Error::InvalidInput(alloc::format!("nnls weight {i} is not positive")));
            }
            let s = libm::sqrt(w[i]);
            aw.row_mut(i).iter_mut().for_each(|v| *v *= s);
            bw[i] *= s;
        }
    }
    let cols: Vec<Vec<f64>> = (0..k).map(|j| (0..m).map(|i| aw[(i, j)]).collect()).collect();
    let b_norm = libm::sqrt(dot(&bw, &bw));
    let tol = 1e-13 * aw.frobenius_norm().max(f64::MIN_POSITIVE) * b_norm.max(f64::MIN_POSITIVE);
    let max_iter = 10 * k;

    let mut x = vec![0.0; k];
    let mut passive: Vec<usize> = Vec::new();
    let mut is_passive = vec![false; k];
    let mut excluded = vec![false; k];
    let mut iterations = 0;

    let residual = |x: &[f64]| -> Vec<f64> {
        let mut r = bw.clone();
        for (j, &xj) in x.iter().enumerate() {
            if xj != 0.0 {
                r.iter_mut().zip(&cols[j]).for_each(|(ri, c)| *ri -= xj * c);
            }
        }
        r
    };

    loop {
        let r = residual(&x);
        let mut entering = None;
        let mut best = tol;
        for j in 0..k {
            if is_passive[j] || excluded[j] {
                continue;
            }
            let g = dot(&cols[j], &r);
            if g > best {
                best = g;
                entering = Some(j);
            }
        }
        let Some(t) = entering else { break };
        passive.push(t);
        is_passive[t] = true;

        let mut first = true;
        loop {
            iterations += 1;
            if iterations > max_iter {
                let r = residual(&x);
                return Err(Error::NnlsNoConvergence { iterations: max_iter, residual: libm::sqrt(dot(&r, &r)) });
            }
            let z = passive_least_squares(&cols, &passive, &bw);
            let rejected = match &z {
                None => true,
                Some(z) => first && *z.last().unwrap() <= 0.0,
            };
            if rejected && first {
                passive.pop();
                is_passive[t] = false;
                excluded[t] = true;
                break;
            }
            let z = match z {
                Some(z) => z,
                // Dependence appearing after leaving columns were dropped: keep the current iterate.
                None => break,
            };
            first = false;
            if z.iter().all(|&v| v > 0.0) {
                for (&j, &v) in passive.iter().zip(&z) {
                    x[j] = v;
                }
                excluded.iter_mut().for_each(|e| *e = false);
                break;
            }
            let mut alpha = f64::INFINITY;
            let mut blocking = passive[0];
            for (&j, &zj) in passive.iter().zip(&z) {
                if zj <= 0.0 {
                    let step = x[j] / (x[j] - zj);
                    if step < alpha {
                        alpha = step;
                        blocking = j;
                    }
                }
            }
            for (&j, &zj) in passive.iter().zip(&z) {
                x[j] += alpha * (zj - x[j]);
            }
            x[blocking] = 0.0;
            let mut kept = Vec::with_capacity(passive.len());
            for &j in &passive {
                if x[j] <= 0.0 {
                    x[j] = 0.0;
                    is_passive[j] = false;
                } else {
                    kept.push(j);
                }
            }
            passive = kept;
            excluded.iter_mut().for_each(|e| *e = false);
            if passive.is_empty() {
                break;
            }
        }
    }
    let r = residual(&x);
    Ok(NnlsSolution { x, residual_norm: libm::sqrt(dot(&r, &r)), iterations })
}

/// Unconstrained least squares on the passive columns via Householder QR.
/// Returns `None` when the columns are numerically dependent.
fn passive_least_squares(cols: &[Vec<f64>], passive: &[usize], b: &[f64]) -> Option<Vec<f64>> {
    let m = b.len();
    let p = passive.len();
    if p > m {
        return None;
    }
    let mut q: Vec<Vec<f64>> = passive.iter().map(|&j| cols[j].clone()).collect();
    let mut rhs = b.to_vec();
    let mut rdiag = vec![0.0; p];
    let norms: Vec<f64> = q.iter().map(|c| libm::sqrt(dot(c, c))).collect();
    for j in 0..p {
        let alpha = libm::sqrt(q[j][j..].iter().map(|v| v * v).sum::<f64>());
        if alpha <= 1e-12 * norms[j].max(f64::MIN_POSITIVE) {
            return None;
        }
        let alpha = if q[j][j] > 0.0 { -alpha } else { alpha };
        let mut v: Vec<f64> = q[j][j..].to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        rdiag[j] = alpha;
        if vnorm2 > 0.0 {
            for col in q.iter_mut().skip(j + 1) {
                let s = 2.0 * dot(&v, &col[j..]) / vnorm2;
                col[j..].iter_mut().zip(&v).for_each(|(c, vi)| *c -= s * vi);
            }
            let s = 2.0 * dot(&v, &rhs[j..]) / vnorm2;
            rhs[j..].iter_mut().zip(&v).for_each(|(c, vi)| *c -= s * vi);
        }
    }
    let mut z = vec![0.0; p];
    for i in (0..p).rev() {
        let s: f64 = (i + 1..p).map(|c| q[c][i] * z[c]).sum();
        z[i] = (rhs[i] - s) / rdiag[i];
    }
    Some(z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn gradient(a: &Matrix, b: &[f64], x: &[f64]) -> Vec<f64> {
        // A^T (A x - b)
        let r: Vec<f64> = a.mul_vec(x).iter().zip(b).map(|(ax, bi)| ax - bi).collect();
        (0..a.cols()).map(|j| (0..a.rows()).map(|i| a[(i, j)] * r[i]).sum()).collect()
    }

    #[test]
    fn clamps_negative_coordinate() {
        let s = nnls(&Matrix::identity(2), &[3.0, -1.0], None).unwrap();
        assert!((s.x[0] - 3.0).abs() < 1e-14);
        assert_eq!(s.x[1], 0.0);
    }

    #[test]
    fn zero_rhs() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 7.0]]);
        let s = nnls(&a, &[0.0; 3], None).unwrap();
        assert_eq!(s.x, vec![0.0, 0.0]);
    }

    #[test]
    fn weights_act_like_row_scaling() {
        let a = Matrix::from_rows(&[vec![1.0], vec![1.0]]);
        let s = nnls(&a, &[1.0, 3.0], Some(&[3.0, 1.0])).unwrap();
        assert!((s.x[0] - 1.5).abs() < 1e-14);
        assert!(nnls(&a, &[1.0, 3.0], Some(&[0.0, 1.0])).is_err());
    }

    #[test]
    fn underdetermined_system() {
        let a = Matrix::from_rows(&[vec![1.0, 1.0, 1.0], vec![0.0, 1.0, 2.0]]);
        let b = [1.0, 1.0];
        let s = nnls(&a, &b, None).unwrap();
        assert!(s.residual_norm < 1e-12);
        assert!(s.x.iter().all(|v| *v >= 0.0));
    }

    // Dense normal-equations oracle for systems whose unconstrained solution is interior.
    fn normal_equations(a: &Matrix, b: &[f64]) -> Vec<f64> {
        let na = nalgebra::DMatrix::from_fn(a.rows(), a.cols(), |i, j| a[(i, j)]);
        let nb = nalgebra::DVector::from_column_slice(b);
        let ata = na.transpose() * &na;
        let atb = na.transpose() * nb;
        ata.cholesky().unwrap().solve(&atb).iter().cloned().collect()
    }

    proptest! {
        #[test]
        fn interior_solution_matches_normal_equations(
            entries in proptest::collection::vec(-1.0f64..1.0, 30),
            truth in proptest::collection::vec(0.5f64..2.0, 3),
            noise in proptest::collection::vec(-0.05f64..0.05, 10),
        ) {
            let a = Matrix::from_fn(10, 3, |i, j| entries[i * 3 + j] + if i % 3 == j { 2.0 } else { 0.0 });
            let b: Vec<f64> = a.mul_vec(&truth).iter().zip(&noise).map(|(v, e)| v + e).collect();
            let oracle = normal_equations(&a, &b);
            prop_assume!(oracle.iter().all(|v| *v > 1e-6));
            let s = nnls(&a, &b, None).unwrap();
            for j in 0..3 {
                prop_assert!((s.x[j] - oracle[j]).abs() < 1e-8, "{:?} vs {:?}", s.x, oracle);
            }
        }

        #[test]
        fn kkt_conditions_hold(
            entries in proptest::collection::vec(-1.0f64..1.0, 48),
            b in proptest::collection::vec(-1.0f64..1.0, 8),
        ) {
            let a = Matrix::from_fn(8, 6, |i, j| entries[i * 6 + j]);
            let s = nnls(&a, &b, None).unwrap();
            let g = gradient(&a, &b, &s.x);
            for j in 0..6 {
                prop_assert!(s.x[j] >= 0.0);
                if s.x[j] == 0.0 {
                    prop_assert!(g[j] >= -1e-8, "active gradient {}", g[j]);
                } else {
                    prop_assert!(g[j].abs() <= 1e-8, "free gradient {}", g[j]);
                }
            }
        }

        #[test]
        fn never_below_unconstrained_objective(
            entries in proptest::collection::vec(-1.0f64..1.0, 24),
            b in proptest::collection::vec(-1.0f64..1.0, 8),
        ) {
            let a = Matrix::from_fn(8, 3, |i, j| entries[i * 3 + j] + if i % 3 == j { 1.5 } else { 0.0 });
            let s = nnls(&a, &b, None).unwrap();
            let free = normal_equations(&a, &b);
            let obj = |x: &[f64]| a.mul_vec(x).iter().zip(&b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>();
            prop_assert!(obj(&s.x) >= obj(&free) - 1e-12);
            if free.iter().all(|v| *v >= 1e-8) {
                prop_assert!((obj(&s.x) - obj(&free)).abs() < 1e-10);
            }
        }
    }
}
