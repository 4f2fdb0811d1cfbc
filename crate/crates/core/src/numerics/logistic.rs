//! Binomial-logit maximum likelihood by Newton/IRLS with step halving.

use super::matrix::{dot, Matrix};
use super::ols::ols_fit;
use crate::error::{Error, Result};

/// Convergence threshold on the max-abs score (gradient of the log-likelihood).
pub const SCORE_TOL: f64 = 1e-6;
/// Euclidean coefficient norm treated as evidence of separation.
pub const SEPARATION_NORM: f64 = 30.0;
pub const DEFAULT_MAX_ITER: usize = 50;

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticFit {
    pub coefficients: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub log_likelihood: f64,
    /// max |Xᵀ(y − p)| at the returned coefficients.
    pub max_score: f64,
}

impl LogisticFit {
    /// Fitted probability for a design row.
    pub fn probability(&self, design_row: &[f64]) -> f64 {
        sigmoid(dot(&self.coefficients, design_row))
    }
}

#[inline]
pub fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// log(1 + e^η) without overflow.
#[inline]
fn softplus(eta: f64) -> f64 {
    if eta > 0.0 {
        eta + (-eta).exp().ln_1p()
    } else {
        eta.exp().ln_1p()
    }
}

/// Bernoulli log-likelihood of `labels` under coefficients `beta`.
pub fn log_likelihood(design: &Matrix, labels: &[u8], beta: &[f64]) -> f64 {
    design
        .rows_iter()
        .zip(labels)
        .map(|(r, &y)| {
            let eta = dot(r, beta);
            f64::from(y) * eta - softplus(eta)
        })
        .sum()
}

fn score(design: &Matrix, labels: &[u8], beta: &[f64]) -> Vec<f64> {
    let resid: Vec<f64> = design
        .rows_iter()
        .zip(labels)
        .map(|(r, &y)| f64::from(y) - sigmoid(dot(r, beta)))
        .collect();
    design.t_mul_vec(&resid)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Fits `P(label = 1 | row) = σ(rowᵀβ)`.
///
/// `design` carries its own intercept column if one is wanted. Iterates
/// Newton steps (solved as weighted least squares through QR) until the
/// max-abs score is at most [`SCORE_TOL`] or `max_iter` is reached; a step
/// that lowers the likelihood is halved. If the coefficient norm exceeds
/// [`SEPARATION_NORM`] first, returns [`Error::Separation`] carrying the
/// last iterate. Hitting `max_iter` without either is reported through
/// `converged = false`.
pub fn logistic_fit(design: &Matrix, labels: &[u8], max_iter: usize) -> Result<LogisticFit> {
    let n = design.nrows();
    let k = design.ncols();
    if labels.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: labels.len(),
        });
    }
    if let Some(bad) = labels.iter().find(|&&y| y > 1) {
        return Err(Error::InvalidInput(format!("logistic label {bad} is not 0/1")));
    }
    let ones = labels.iter().filter(|&&y| y == 1).count();
    if ones == 0 || ones == n {
        return Err(Error::SingleClass);
    }

    let mut beta = vec![0.0; k];
    let mut ll = log_likelihood(design, labels, &beta);
    let mut grad = score(design, labels, &beta);
    let mut iterations = 0;

    while max_abs(&grad) > SCORE_TOL && iterations < max_iter {
        iterations += 1;
        // Newton direction: argmin ‖W^½ X d − W^-½ (y − p)‖
        let mut wx = Matrix::zeros(n, k);
        let mut z = vec![0.0; n];
        for (i, r) in design.rows_iter().enumerate() {
            let p = sigmoid(dot(r, &beta));
            let w = (p * (1.0 - p)).max(1e-12);
            let sw = w.sqrt();
            for (j, x) in r.iter().enumerate() {
                wx.set(i, j, sw * x);
            }
            z[i] = (f64::from(labels[i]) - p) / sw;
        }
        let direction = ols_fit(&wx, &z)?.coefficients;

        let mut step = 1.0;
        let mut candidate: Vec<f64>;
        let mut cand_ll;
        loop {
            candidate = beta.iter().zip(&direction).map(|(b, d)| b + step * d).collect();
            cand_ll = log_likelihood(design, labels, &candidate);
            if cand_ll >= ll - 1e-12 * ll.abs() || step < 1e-10 {
                break;
            }
            step *= 0.5;
        }
        beta = candidate;
        ll = cand_ll;
        grad = score(design, labels, &beta);

        let norm = dot(&beta, &beta).sqrt();
        if norm > SEPARATION_NORM && max_abs(&grad) > SCORE_TOL {
            return Err(Error::Separation {
                iterations,
                coefficient_norm: norm,
                coefficients: beta,
            });
        }
    }

    let max_score = max_abs(&grad);
    Ok(LogisticFit {
        coefficients: beta,
        converged: max_score <= SCORE_TOL,
        iterations,
        log_likelihood: ll,
        max_score,
    })
}

/// McFadden pseudo-R²: `1 − LL(model) / LL(intercept only)`.
pub fn mcfadden_r2(fit: &LogisticFit, labels: &[u8]) -> f64 {
    let n = labels.len() as f64;
    let pi = labels.iter().filter(|&&y| y == 1).count() as f64 / n;
    let ll_null = n * (pi * pi.ln() + (1.0 - pi) * (1.0 - pi).ln());
    (1.0 - fit.log_likelihood / ll_null).clamp(0.0, 1.0)
}
