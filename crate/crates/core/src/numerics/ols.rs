//! Least squares by Householder QR.
//!
//! Columns are processed left to right. A column whose remaining norm after
//! the previous reflections falls below `RANK_TOL` times the larger of its own
//! norm and the largest pivot so far is linearly dependent on its
//! predecessors. The strict entry point reports it as rank deficiency; the
//! tolerant entry point drops it and keeps going, so the later of two
//! collinear columns is the one removed.

use super::matrix::{dot, Matrix};
use crate::error::{Error, Result};

/// Relative pivot tolerance for rank decisions.
pub const RANK_TOL: f64 = 1e-10;

/// Result of an ordinary least-squares fit.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearFit {
    /// One entry per design column; columns dropped as collinear get 0.
    pub coefficients: Vec<f64>,
    pub residuals: Vec<f64>,
    pub r_squared: f64,
    /// SSR / (n − rank).
    pub residual_variance: f64,
    pub rank: usize,
    /// Design columns removed as linearly dependent (tolerant fits only).
    pub dropped: Vec<usize>,
}

impl LinearFit {
    /// Prediction for a design row laid out like the fitted design.
    pub fn predict(&self, design_row: &[f64]) -> f64 {
        dot(&self.coefficients, design_row)
    }

    /// Prediction for a covariate row when the design was `[1 | X]`.
    pub fn predict_with_intercept(&self, covariates: &[f64]) -> f64 {
        self.coefficients[0] + dot(&self.coefficients[1..], covariates)
    }

    pub fn ssr(&self) -> f64 {
        self.residuals.iter().map(|r| r * r).sum()
    }
}

struct Reflector {
    /// First row the reflector touches.
    offset: usize,
    v: Vec<f64>,
    beta: f64,
}

impl Reflector {
    #[inline]
    fn apply(&self, x: &mut [f64]) {
        let tail = &mut x[self.offset..];
        let s = self.beta * dot(&self.v, tail);
        for (t, v) in tail.iter_mut().zip(&self.v) {
            *t -= s * v;
        }
    }
}

struct Factorization {
    reflectors: Vec<Reflector>,
    /// Columns of R for accepted design columns; entry `t` has length `t + 1`.
    r_cols: Vec<Vec<f64>>,
    accepted: Vec<usize>,
    dropped: Vec<usize>,
}

fn factorize(design: &Matrix, tolerant: bool) -> Result<Factorization> {
    let n = design.nrows();
    let k = design.ncols();
    let mut reflectors: Vec<Reflector> = Vec::with_capacity(k);
    let mut r_cols = Vec::with_capacity(k);
    let mut accepted = Vec::with_capacity(k);
    let mut dropped = Vec::new();
    let mut max_pivot = 0.0_f64;

    for j in 0..k {
        let mut x = design.column(j);
        let col_norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        for h in &reflectors {
            h.apply(&mut x);
        }
        let rank = reflectors.len();
        let rest = x[rank..].iter().map(|v| v * v).sum::<f64>().sqrt();
        if rank >= n || rest <= RANK_TOL * col_norm.max(max_pivot) || rest == 0.0 {
            if tolerant {
                dropped.push(j);
                continue;
            }
            return Err(Error::RankDeficient { column: j });
        }
        let alpha = if x[rank] > 0.0 { -rest } else { rest };
        let mut v = x[rank..].to_vec();
        v[0] -= alpha;
        let vtv = dot(&v, &v);
        let mut r_col = x[..rank].to_vec();
        r_col.push(alpha);
        reflectors.push(Reflector {
            offset: rank,
            v,
            beta: 2.0 / vtv,
        });
        r_cols.push(r_col);
        accepted.push(j);
        max_pivot = max_pivot.max(rest);
    }
    Ok(Factorization {
        reflectors,
        r_cols,
        accepted,
        dropped,
    })
}

fn solve(design: &Matrix, response: &[f64], tolerant: bool) -> Result<LinearFit> {
    let n = design.nrows();
    let k = design.ncols();
    if response.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: response.len(),
        });
    }
    if !tolerant && n <= k {
        return Err(Error::TooFewRows { rows: n, cols: k });
    }
    let f = factorize(design, tolerant)?;
    let rank = f.accepted.len();
    if n <= rank {
        return Err(Error::TooFewRows { rows: n, cols: rank });
    }

    let mut qty = response.to_vec();
    for h in &f.reflectors {
        h.apply(&mut qty);
    }

    // back substitution on the rank × rank triangle
    let mut beta = vec![0.0; rank];
    for i in (0..rank).rev() {
        let mut s = qty[i];
        for (t, b) in beta.iter().enumerate().skip(i + 1) {
            s -= f.r_cols[t][i] * b;
        }
        beta[i] = s / f.r_cols[i][i];
    }
    let mut coefficients = vec![0.0; k];
    for (t, &j) in f.accepted.iter().enumerate() {
        coefficients[j] = beta[t];
    }

    // residual = Q [0; (Qᵀy)_{rank..}], orthogonal to the column space by construction
    let mut residuals = qty;
    residuals[..rank].iter_mut().for_each(|v| *v = 0.0);
    for h in f.reflectors.iter().rev() {
        h.apply(&mut residuals);
    }

    let ssr: f64 = residuals.iter().map(|r| r * r).sum();
    let r_squared = r_squared_from(response, ssr);
    Ok(LinearFit {
        coefficients,
        residuals,
        r_squared,
        residual_variance: ssr / (n - rank) as f64,
        rank,
        dropped: f.dropped,
    })
}

/// Coefficient of determination for a fit with an intercept.
///
/// Zero-variance responses report 0. The result is clamped to `[0, 1]`.
pub(crate) fn r_squared_from(response: &[f64], ssr: f64) -> f64 {
    let sst = total_sum_of_squares(response);
    let scale: f64 = response.iter().map(|y| y * y).sum();
    if sst <= 1e-24 * scale || sst == 0.0 {
        return 0.0;
    }
    (1.0 - ssr / sst).clamp(0.0, 1.0)
}

pub(crate) fn total_sum_of_squares(v: &[f64]) -> f64 {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|y| (y - m) * (y - m)).sum()
}

/// Ordinary least squares on a design whose first column is the intercept.
///
/// Fails with [`Error::RankDeficient`] on a dependent column and with
/// [`Error::TooFewRows`] unless rows exceed columns.
pub fn ols_fit(design: &Matrix, response: &[f64]) -> Result<LinearFit> {
    solve(design, response, false)
}

/// Like [`ols_fit`] but silently drops columns that are linearly dependent on
/// earlier ones. Dropped columns are listed in [`LinearFit::dropped`].
pub fn ols_fit_tolerant(design: &Matrix, response: &[f64]) -> Result<LinearFit> {
    solve(design, response, true)
}

/// Ridge regression with an unpenalized intercept on standardized columns.
///
/// `covariates` must not include an intercept column. Coefficients are
/// returned on the original scale, intercept first. Constant columns get a
/// zero coefficient.
pub fn ridge_fit(covariates: &Matrix, response: &[f64], penalty: f64) -> Result<LinearFit> {
    if !(penalty.is_finite() && penalty >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "ridge penalty must be finite and non-negative, got {penalty}"
        )));
    }
    let n = covariates.nrows();
    let p = covariates.ncols();
    if response.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: response.len(),
        });
    }
    if n < 2 {
        return Err(Error::TooFewRows { rows: n, cols: p + 1 });
    }
    let means = covariates.column_means();
    let mut sds = vec![0.0; p];
    for r in covariates.rows_iter() {
        for j in 0..p {
            let d = r[j] - means[j];
            sds[j] += d * d;
        }
    }
    sds.iter_mut().for_each(|s| *s = (*s / n as f64).sqrt());
    let active: Vec<usize> = (0..p).filter(|&j| sds[j] > 0.0).collect();
    let k = active.len();

    let y_mean = response.iter().sum::<f64>() / n as f64;
    let shrink = penalty.sqrt();
    let mut aug = Matrix::zeros(n + k, k);
    let mut aug_y = vec![0.0; n + k];
    for i in 0..n {
        let r = covariates.row(i);
        for (c, &j) in active.iter().enumerate() {
            aug.set(i, c, (r[j] - means[j]) / sds[j]);
        }
        aug_y[i] = response[i] - y_mean;
    }
    for c in 0..k {
        aug.set(n + c, c, shrink);
    }
    let std_fit = if k == 0 {
        None
    } else {
        Some(solve(&aug, &aug_y, penalty == 0.0)?)
    };

    let mut coefficients = vec![0.0; p + 1];
    let mut intercept = y_mean;
    if let Some(fit) = &std_fit {
        for (c, &j) in active.iter().enumerate() {
            let b = fit.coefficients[c] / sds[j];
            coefficients[j + 1] = b;
            intercept -= b * means[j];
        }
    }
    coefficients[0] = intercept;

    let residuals: Vec<f64> = (0..n)
        .map(|i| response[i] - coefficients[0] - dot(&coefficients[1..], covariates.row(i)))
        .collect();
    let ssr: f64 = residuals.iter().map(|r| r * r).sum();
    let dof = if n > k + 1 { n - k - 1 } else { n };
    Ok(LinearFit {
        coefficients,
        r_squared: r_squared_from(response, ssr),
        residual_variance: ssr / dof as f64,
        residuals,
        rank: k + 1,
        dropped: (0..p).filter(|j| sds[*j] == 0.0).map(|j| j + 1).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn design_from_x(xs: &[f64]) -> Matrix {
        Matrix::from_rows(&xs.iter().map(|x| vec![1.0, *x]).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn exact_line() {
        let fit = ols_fit(&design_from_x(&[0.0, 1.0, 2.0]), &[0.0, 1.0, 2.0]).unwrap();
        assert!(fit.coefficients[0].abs() < 1e-12);
        assert!((fit.coefficients[1] - 1.0).abs() < 1e-12);
        assert_eq!(fit.r_squared, 1.0);
    }

    #[test]
    fn constant_response_reports_zero_r2() {
        let fit = ols_fit(&design_from_x(&[0.0, 1.0, 2.0, 5.0]), &[3.5; 4]).unwrap();
        assert!((fit.coefficients[0] - 3.5).abs() < 1e-12);
        assert!(fit.coefficients[1].abs() < 1e-12);
        assert_eq!(fit.r_squared, 0.0);
    }

    /// Inverse of a small square matrix by cofactor expansion.
    fn cofactor_inverse(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
        fn minor(a: &[Vec<f64>], r: usize, c: usize) -> Vec<Vec<f64>> {
            a.iter()
                .enumerate()
                .filter(|(i, _)| *i != r)
                .map(|(_, row)| {
                    row.iter()
                        .enumerate()
                        .filter(|(j, _)| *j != c)
                        .map(|(_, v)| *v)
                        .collect()
                })
                .collect()
        }
        fn det(a: &[Vec<f64>]) -> f64 {
            if a.len() == 1 {
                return a[0][0];
            }
            (0..a.len())
                .map(|j| {
                    let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                    sign * a[0][j] * det(&minor(a, 0, j))
                })
                .sum()
        }
        let n = a.len();
        let d = det(a);
        let mut inv = vec![vec![0.0; n]; n];
        #[allow(clippy::needless_range_loop)]
        for i in 0..n {
            for j in 0..n {
                let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                // adjugate is the transposed cofactor matrix
                inv[j][i] = sign * det(&minor(a, i, j)) / d;
            }
        }
        inv
    }

    #[test]
    fn matches_normal_equations_by_cofactors() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let rows: Vec<Vec<f64>> = (0..20)
            .map(|_| {
                let mut r = vec![1.0];
                r.extend((0..3).map(|_| rng.random_range(-2.0..2.0)));
                r
            })
            .collect();
        let y: Vec<f64> = rows
            .iter()
            .map(|r| 0.3 - r[1] + 2.0 * r[3] + rng.random_range(-0.5..0.5))
            .collect();
        let x = Matrix::from_rows(&rows).unwrap();

        let mut xtx = vec![vec![0.0; 4]; 4];
        for r in &rows {
            for i in 0..4 {
                for j in 0..4 {
                    xtx[i][j] += r[i] * r[j];
                }
            }
        }
        let xty = x.t_mul_vec(&y);
        let inv = cofactor_inverse(&xtx);
        let oracle: Vec<f64> = (0..4).map(|i| dot(&inv[i], &xty)).collect();

        let fit = ols_fit(&x, &y).unwrap();
        for (a, b) in fit.coefficients.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn duplicate_column_is_rank_deficient() {
        let x = Matrix::from_rows(&[
            vec![1.0, 0.0, 0.0],
            vec![1.0, 1.0, 1.0],
            vec![1.0, 2.0, 2.0],
            vec![1.0, 4.0, 4.0],
        ])
        .unwrap();
        let y = [1.0, 2.0, 2.5, 5.0];
        assert_eq!(ols_fit(&x, &y), Err(Error::RankDeficient { column: 2 }));
        let fit = ols_fit_tolerant(&x, &y).unwrap();
        assert_eq!(fit.dropped, vec![2]);
        assert_eq!(fit.coefficients[2], 0.0);
        assert_eq!(fit.rank, 2);
    }

    #[test]
    fn too_few_rows() {
        let x = Matrix::from_rows(&[vec![1.0, 0.0], vec![1.0, 1.0]]).unwrap();
        assert!(matches!(ols_fit(&x, &[0.0, 1.0]), Err(Error::TooFewRows { .. })));
    }

    #[test]
    fn ridge_zero_penalty_matches_ols_and_shrinks_otherwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|_| (0..3).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let y: Vec<f64> = rows
            .iter()
            .map(|r| 1.0 + 2.0 * r[0] - r[2] + 0.1 * rng.random_range(-1.0..1.0))
            .collect();
        let ols = ols_fit(&x.with_intercept(), &y).unwrap();
        let r0 = ridge_fit(&x, &y, 0.0).unwrap();
        for (a, b) in ols.coefficients.iter().zip(&r0.coefficients) {
            assert!((a - b).abs() < 1e-9);
        }
        let r10 = ridge_fit(&x, &y, 10.0).unwrap();
        let norm = |c: &[f64]| c[1..].iter().map(|v| v * v).sum::<f64>();
        assert!(norm(&r10.coefficients) < norm(&ols.coefficients));
    }

    fn random_problem(seed: u64, n: usize, k: usize) -> (Matrix, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                let mut r = vec![1.0];
                r.extend((0..k).map(|_| rng.random_range(-3.0..3.0)));
                r
            })
            .collect();
        let y = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        (Matrix::from_rows(&rows).unwrap(), y)
    }

    proptest! {
        #[test]
        fn adding_a_column_never_lowers_r2(seed in any::<u64>(), n in 8usize..40, k in 1usize..5) {
            let (x, y) = random_problem(seed, n, k);
            let full = ols_fit_tolerant(&x, &y).unwrap();
            let reduced = ols_fit_tolerant(&x.drop_column(k), &y).unwrap();
            prop_assert!(full.r_squared + 1e-12 >= reduced.r_squared);
        }

        #[test]
        fn residuals_are_orthogonal(seed in any::<u64>(), n in 6usize..60, k in 1usize..5) {
            let (x, y) = random_problem(seed, n, k);
            let fit = ols_fit(&x, &y).unwrap();
            let norm_y = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            let g = x.t_mul_vec(&fit.residuals);
            prop_assert!(g.iter().all(|v| v.abs() <= 1e-8 * norm_y));
        }
    }
}
