//! Regression kernels: least squares, logistic regression, R² arithmetic.

mod logistic;
mod matrix;
mod ols;

pub use logistic::{
    log_likelihood, logistic_fit, mcfadden_r2, sigmoid, LogisticFit, DEFAULT_MAX_ITER, SCORE_TOL,
    SEPARATION_NORM,
};
pub use matrix::{dot, mean, Matrix};
pub use ols::{ols_fit, ols_fit_tolerant, ridge_fit, LinearFit, RANK_TOL};

use crate::error::{Error, Result};

/// Slack allowed when a reduced model's R² exceeds the full model's through
/// round-off; larger violations are rejected.
const NESTING_SLACK: f64 = 1e-6;

pub fn r2_of_fit(fit: &LinearFit) -> f64 {
    fit.r_squared
}

/// Incremental share of the remaining variance explained by the extra
/// regressors of a nested model: `(R²_full − R²_reduced) / (1 − R²_reduced)`.
pub fn partial_r2(r2_full: f64, r2_reduced: f64) -> Result<f64> {
    for (name, v) in [("r2_full", r2_full), ("r2_reduced", r2_reduced)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::InvalidR2 { name, value: v });
        }
    }
    if r2_reduced >= 1.0 {
        return Err(Error::InvalidR2 {
            name: "r2_reduced",
            value: r2_reduced,
        });
    }
    let gain = r2_full - r2_reduced;
    if gain < -NESTING_SLACK {
        return Err(Error::InvalidR2 {
            name: "r2_full",
            value: r2_full,
        });
    }
    Ok((gain.max(0.0) / (1.0 - r2_reduced)).clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn partial_r2_examples() {
        assert_eq!(partial_r2(0.5, 0.5).unwrap(), 0.0);
        assert_eq!(partial_r2(1.0, 0.0).unwrap(), 1.0);
        assert!((partial_r2(0.6, 0.2).unwrap() - 0.5).abs() < 1e-15);
        assert!(partial_r2(0.2, 0.2 + 1e-9).unwrap() == 0.0);
        assert!(partial_r2(0.5, 1.0).is_err());
        assert!(partial_r2(1.2, 0.0).is_err());
        assert!(partial_r2(0.1, 0.5).is_err());
    }

    proptest! {
        #[test]
        fn partial_r2_range_and_monotonicity(a in 0.0..1.0f64, b in 0.0..1.0f64, d in 0.0..0.5f64) {
            let (full, reduced) = if a >= b { (a, b) } else { (b, a) };
            let v = partial_r2(full, reduced).unwrap();
            prop_assert!((0.0..=1.0).contains(&v));
            let up = (full + d).min(1.0);
            prop_assert!(partial_r2(up, reduced).unwrap() >= v);
            let down = (reduced - d).max(0.0);
            prop_assert!(partial_r2(full, down).unwrap() >= v);
        }
    }
}
