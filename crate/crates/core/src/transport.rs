//! Baseline transport estimators of the X-adjusted target effect τ_X:
//! outcome-model standardization (g-formula), inverse-odds weighting, the
//! trial's own difference in means, and a two-sample percentile bootstrap.

use log::{debug, warn};
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{
    ensure_same_schema, pool, Method, PooledDesign, TargetDataset, TransportEstimate, TrialDataset,
};
use crate::numerics::{logistic_fit, mean, ols_fit, ridge_fit, LinearFit, DEFAULT_MAX_ITER};
use crate::rng;

pub const DEFAULT_WEIGHT_CLIP: f64 = 50.0;
pub const DEFAULT_N_BOOT: usize = 1000;
pub const MIN_N_BOOT: usize = 100;
pub const DEFAULT_ALPHA: f64 = 0.05;
/// Largest share of failed bootstrap resamples tolerated.
pub const MAX_BOOT_FAILURE_RATE: f64 = 0.01;

/// How the per-arm outcome regressions are fitted.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OutcomeLearner {
    Ols,
    /// Ridge on standardized columns with an unpenalized intercept.
    Ridge {
        penalty: f64,
    },
}

/// Arm-specific regressions of Y on (1, X) in the trial.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeModels {
    pub mu0: LinearFit,
    pub mu1: LinearFit,
    pub residual_var0: f64,
    pub residual_var1: f64,
    covariate_names: Vec<String>,
}

impl OutcomeModels {
    /// μ̂₁(x) − μ̂₀(x) for a covariate row.
    pub fn cate(&self, x: &[f64]) -> f64 {
        self.mu1.predict_with_intercept(x) - self.mu0.predict_with_intercept(x)
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }
}

pub fn fit_outcome_models(trial: &TrialDataset) -> Result<OutcomeModels> {
    fit_outcome_models_with(trial, OutcomeLearner::Ols)
}

/// Fits μ̂₀ and μ̂₁ on their own arm's rows. Each arm needs at least p + 2 rows.
pub fn fit_outcome_models_with(trial: &TrialDataset, learner: OutcomeLearner) -> Result<OutcomeModels> {
    let required = trial.p() + 2;
    let mut fits = Vec::with_capacity(2);
    for arm in [0u8, 1] {
        let rows = trial.arm_rows(arm);
        if rows.len() < required && matches!(learner, OutcomeLearner::Ols) {
            return Err(Error::EmptyArm {
                arm,
                rows: rows.len(),
                required,
            });
        }
        let x = trial.covariates().select_rows(&rows);
        let y: Vec<f64> = rows.iter().map(|&i| trial.outcome()[i]).collect();
        let fit = match learner {
            OutcomeLearner::Ols => ols_fit(&x.with_intercept(), &y)?,
            OutcomeLearner::Ridge { penalty } => ridge_fit(&x, &y, penalty)?,
        };
        fits.push(fit);
    }
    let mu1 = fits.pop().expect("two arms");
    let mu0 = fits.pop().expect("two arms");
    Ok(OutcomeModels {
        residual_var0: mu0.residual_variance,
        residual_var1: mu1.residual_variance,
        mu0,
        mu1,
        covariate_names: trial.covariate_names().to_vec(),
    })
}

/// Average of μ̂₁(x) − μ̂₀(x) over the target rows.
pub fn gformula_tate(models: &OutcomeModels, target: &TargetDataset) -> Result<f64> {
    ensure_same_schema(&models.covariate_names, target.covariate_names())?;
    let total: f64 = target.covariates().rows_iter().map(|x| models.cate(x)).sum();
    Ok(total / target.n() as f64)
}

/// Difference of arm means in the trial.
pub fn sate(trial: &TrialDataset) -> Result<f64> {
    let (mut sum, mut count) = ([0.0; 2], [0usize; 2]);
    for (&a, &y) in trial.treatment().iter().zip(trial.outcome()) {
        sum[a as usize] += y;
        count[a as usize] += 1;
    }
    for arm in [0u8, 1] {
        if count[arm as usize] == 0 {
            return Err(Error::EmptyArm {
                arm,
                rows: 0,
                required: 1,
            });
        }
    }
    Ok(sum[1] / count[1] as f64 - sum[0] / count[0] as f64)
}

/// Fitted trial-membership model ê(x) = P̂(S = 1 | X = x).
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionModel {
    /// Intercept first.
    pub coefficients: Vec<f64>,
    pub converged: bool,
    /// The fit hit the separation bound and these are the last bounded iterate.
    pub separated: bool,
}

impl SelectionModel {
    pub fn probability(&self, x: &[f64]) -> f64 {
        crate::numerics::sigmoid(self.coefficients[0] + crate::numerics::dot(&self.coefficients[1..], x))
    }
}

/// Logistic regression of S on (1, X) over the pooled rows. Separation is
/// not fatal: the bounded coefficients are kept and flagged.
pub fn fit_selection_model(pooled: &PooledDesign) -> Result<SelectionModel> {
    match logistic_fit(
        &pooled.covariates().with_intercept(),
        pooled.selection(),
        DEFAULT_MAX_ITER,
    ) {
        Ok(fit) => {
            if !fit.converged {
                warn!(
                    "selection model did not converge (max score {:.3e})",
                    fit.max_score
                );
            }
            Ok(SelectionModel {
                coefficients: fit.coefficients,
                converged: fit.converged,
                separated: false,
            })
        }
        Err(Error::Separation {
            coefficients,
            coefficient_norm,
            ..
        }) => {
            warn!(
                "selection model separated (coefficient norm {coefficient_norm:.1}); weights will be clipped"
            );
            Ok(SelectionModel {
                coefficients,
                converged: false,
                separated: true,
            })
        }
        Err(e) => Err(e),
    }
}

/// Inverse odds of trial participation, (1 − ê)/ê, for each trial row,
/// clipped at `clip`. Returns the weights and how many were clipped.
pub fn inverse_odds_weights(model: &SelectionModel, trial: &TrialDataset, clip: f64) -> (Vec<f64>, usize) {
    let mut clipped = 0;
    let weights = trial
        .covariates()
        .rows_iter()
        .map(|x| {
            let e = model.probability(x);
            let w = (1.0 - e) / e;
            if w > clip || !w.is_finite() {
                clipped += 1;
                clip
            } else {
                w
            }
        })
        .collect();
    (weights, clipped)
}

/// Ratio (Hájek) contrast: weighted treated mean minus weighted control mean,
/// each normalized by its own weight total.
pub fn hajek_difference(weights: &[f64], treatment: &[u8], outcome: &[f64]) -> Result<f64> {
    let (mut num, mut den) = ([0.0; 2], [0.0; 2]);
    for ((&w, &a), &y) in weights.iter().zip(treatment).zip(outcome) {
        num[a as usize] += w * y;
        den[a as usize] += w;
    }
    for arm in [0u8, 1] {
        if den[arm as usize] <= 0.0 {
            return Err(Error::DegenerateWeights { arm });
        }
    }
    Ok(num[1] / den[1] - num[0] / den[0])
}

/// Inverse-odds-weighted estimate of τ_X from the trial rows.
pub fn ipw_tate(trial: &TrialDataset, pooled: &PooledDesign, weight_clip: f64) -> Result<f64> {
    if weight_clip.is_nan() || weight_clip <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "weight clip must be positive, got {weight_clip}"
        )));
    }
    ensure_same_schema(trial.covariate_names(), pooled.covariate_names())?;
    let model = fit_selection_model(pooled)?;
    let (weights, clipped) = inverse_odds_weights(&model, trial, weight_clip);
    if clipped > 0 {
        debug!(
            "clipped {clipped} of {} inverse-odds weights at {weight_clip}",
            weights.len()
        );
    }
    hajek_difference(&weights, trial.treatment(), trial.outcome())
}

/// A baseline estimator of τ_X from trial and target samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Estimator {
    GFormula(OutcomeLearner),
    Ipw { weight_clip: f64 },
}

impl Default for Estimator {
    fn default() -> Self {
        Estimator::GFormula(OutcomeLearner::Ols)
    }
}

impl Estimator {
    pub fn method(&self) -> Method {
        match self {
            Estimator::GFormula(_) => Method::GFormula,
            Estimator::Ipw { .. } => Method::Ipw,
        }
    }

    pub fn estimate(&self, trial: &TrialDataset, target: &TargetDataset) -> Result<f64> {
        match *self {
            Estimator::GFormula(learner) => gformula_tate(&fit_outcome_models_with(trial, learner)?, target),
            Estimator::Ipw { weight_clip } => ipw_tate(trial, &pool(trial, target)?, weight_clip),
        }
    }
}

/// Linear-interpolation sample quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Percentile bootstrap interval for an estimator.
///
/// Trial and target rows are resampled independently with replacement,
/// keeping both sample sizes. Resample `b` draws from stream `b` under
/// `seed`, so the interval does not depend on thread count. The full
/// pipeline (including any selection model) is refitted per resample.
/// Resamples on which the estimator fails are dropped; more than 1% failing
/// is an error.
pub fn bootstrap_ci(
    estimator: &Estimator,
    trial: &TrialDataset,
    target: &TargetDataset,
    n_boot: usize,
    alpha: f64,
    seed: u64,
) -> Result<TransportEstimate> {
    if n_boot < MIN_N_BOOT {
        return Err(Error::InvalidInput(format!(
            "need at least {MIN_N_BOOT} bootstrap resamples, got {n_boot}"
        )));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidInput(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    let tau_x_hat = estimator.estimate(trial, target)?;

    let draws: Vec<Option<f64>> = (0..n_boot as u64)
        .into_par_iter()
        .map(|b| {
            let mut r = rng::stream(seed, b);
            let ti: Vec<usize> = (0..trial.n()).map(|_| r.random_range(0..trial.n())).collect();
            let oi: Vec<usize> = (0..target.n()).map(|_| r.random_range(0..target.n())).collect();
            let est = trial
                .resample(&ti)
                .and_then(|t| estimator.estimate(&t, &target.resample(&oi)));
            est.ok().filter(|v| v.is_finite())
        })
        .collect();

    let mut values: Vec<f64> = draws.iter().flatten().copied().collect();
    let n_failed = n_boot - values.len();
    if n_failed as f64 > MAX_BOOT_FAILURE_RATE * n_boot as f64 {
        return Err(Error::BootstrapFailure {
            failed: n_failed,
            total: n_boot,
        });
    }
    if n_failed > 0 {
        warn!("{n_failed} of {n_boot} bootstrap resamples failed and were dropped");
    }
    values.sort_by(f64::total_cmp);
    Ok(TransportEstimate {
        tau_x_hat,
        ci_lower: quantile_sorted(&values, alpha / 2.0),
        ci_upper: quantile_sorted(&values, 1.0 - alpha / 2.0),
        method: estimator.method(),
        n_boot,
        alpha,
        n_failed,
    })
}

/// In-sample plug-in ATE: mean of μ̂₁ − μ̂₀ over the trial rows.
pub fn in_sample_ate(models: &OutcomeModels, trial: &TrialDataset) -> f64 {
    let cates: Vec<f64> = trial.covariates().rows_iter().map(|x| models.cate(x)).collect();
    mean(&cates)
}

/// Target dataset carrying the trial's own covariates.
pub fn trial_as_target(trial: &TrialDataset) -> TargetDataset {
    TargetDataset::new(trial.covariates().clone(), trial.covariate_names().to_vec())
        .expect("trial covariates are already validated")
}
