//! Monte Carlo coverage of sensitivity intervals.

use log::warn;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::BoundKind;
use crate::rng::{child_seed, purpose};
use crate::sensitivity::{inflate_interval, sigma_tau_upper};
use crate::simulate::dgp::{Dgp, DgpOracle};
use crate::transport::{
    bootstrap_ci, fit_outcome_models_with, Estimator, OutcomeLearner, DEFAULT_ALPHA, DEFAULT_N_BOOT,
};

/// Replication count below which coverage estimates are too noisy to read.
pub const RECOMMENDED_MIN_REPS: usize = 100;

/// Per-replication estimation settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageSettings {
    pub n_boot: usize,
    pub alpha: f64,
    pub estimator: Estimator,
}

impl Default for CoverageSettings {
    fn default() -> Self {
        Self {
            n_boot: DEFAULT_N_BOOT,
            alpha: DEFAULT_ALPHA,
            estimator: Estimator::default(),
        }
    }
}

/// Coverage of the envelope τ̂ ± Γ·|Δ_U*| and of the widened bootstrap
/// interval, per Γ.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageCurve {
    pub gamma_grid: Vec<f64>,
    pub coverage_envelope: Vec<f64>,
    pub coverage_full_ci: Vec<f64>,
    pub n_reps: usize,
    /// Replications whose estimation failed; excluded from the coverage.
    pub n_failed: usize,
    pub oracle: DgpOracle,
    pub mean_tau_hat: f64,
    pub sd_tau_hat: f64,
    pub mean_ci_width: f64,
    /// Smallest residual-variance bound on σ_τ|X seen across replications.
    pub min_sigma_tau_upper: f64,
    pub mean_sigma_tau_upper: f64,
}

#[derive(Debug, Clone, Copy)]
struct RepOutcome {
    tau_hat: f64,
    ci_lower: f64,
    ci_upper: f64,
    sigma_upper: f64,
    covered_envelope: u64,
    covered_full: u64,
}

pub(crate) fn check_reps(n_reps: usize) -> Result<()> {
    if n_reps == 0 {
        return Err(Error::InvalidInput("n_reps must be positive".into()));
    }
    if n_reps < RECOMMENDED_MIN_REPS {
        warn!("{n_reps} replications is below the recommended {RECOMMENDED_MIN_REPS}");
    }
    Ok(())
}

fn check_grid(gamma_grid: &[f64]) -> Result<()> {
    if gamma_grid.is_empty() {
        return Err(Error::InvalidInput("empty gamma grid".into()));
    }
    if gamma_grid.len() > 64 {
        return Err(Error::InvalidInput("gamma grid is limited to 64 points".into()));
    }
    if let Some(g) = gamma_grid.iter().find(|g| !(g.is_finite() && **g >= 0.0)) {
        return Err(Error::InvalidInput(format!(
            "gamma values must be finite and non-negative, got {g}"
        )));
    }
    Ok(())
}

/// Seed of replication `rep`.
pub fn rep_seed(seed: u64, rep: usize) -> u64 {
    child_seed(seed, rep as u64)
}

fn learner_of(estimator: &Estimator) -> OutcomeLearner {
    match estimator {
        Estimator::GFormula(l) => *l,
        Estimator::Ipw { .. } => OutcomeLearner::Ols,
    }
}

fn run_rep(
    dgp: &dyn Dgp,
    gamma_grid: &[f64],
    oracle: &DgpOracle,
    settings: &CoverageSettings,
    seed: u64,
) -> Result<RepOutcome> {
    let (trial, target) = dgp.sample(seed)?;
    let est = bootstrap_ci(
        &settings.estimator,
        &trial,
        &target,
        settings.n_boot,
        settings.alpha,
        child_seed(seed, purpose::BOOTSTRAP),
    )?;
    let sigma_upper =
        sigma_tau_upper(&fit_outcome_models_with(&trial, learner_of(&settings.estimator))?).value;
    let scale = oracle.delta_u_star.abs();
    let (mut env, mut full) = (0u64, 0u64);
    for (k, &g) in gamma_grid.iter().enumerate() {
        let r = inflate_interval(&est, g * scale, BoundKind::Raw)?;
        let t = oracle.tau_star;
        if r.envelope_lower <= t && t <= r.envelope_upper {
            env |= 1 << k;
        }
        if r.full_lower <= t && t <= r.full_upper {
            full |= 1 << k;
        }
    }
    Ok(RepOutcome {
        tau_hat: est.tau_x_hat,
        ci_lower: est.ci_lower,
        ci_upper: est.ci_upper,
        sigma_upper,
        covered_envelope: env,
        covered_full: full,
    })
}

/// Replicates the design `n_reps` times. Replication `r` draws its data from
/// [`rep_seed`]`(seed, r)`, so results do not depend on scheduling.
/// Failed replications are counted and left out of the coverage fractions;
/// if every replication fails the first error is returned.
pub fn coverage_experiment(
    dgp: &dyn Dgp,
    gamma_grid: &[f64],
    n_reps: usize,
    seed: u64,
    settings: &CoverageSettings,
) -> Result<CoverageCurve> {
    check_grid(gamma_grid)?;
    check_reps(n_reps)?;
    dgp.validate()?;
    let oracle = dgp.oracle()?;
    let outcomes: Vec<Result<RepOutcome>> = (0..n_reps)
        .into_par_iter()
        .map(|r| run_rep(dgp, gamma_grid, &oracle, settings, rep_seed(seed, r)))
        .collect();

    let mut ok = Vec::with_capacity(n_reps);
    let mut first_err = None;
    for o in outcomes {
        match o {
            Ok(v) => ok.push(v),
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    let n_failed = n_reps - ok.len();
    if ok.is_empty() {
        return Err(first_err.expect("at least one replication"));
    }
    if let Some(e) = &first_err {
        warn!("{n_failed} of {n_reps} replications failed (first: {e})");
    }
    let m = ok.len() as f64;
    let frac = |bits: fn(&RepOutcome) -> u64, k: usize| {
        ok.iter().filter(|o| bits(o) >> k & 1 == 1).count() as f64 / m
    };
    let coverage_envelope = (0..gamma_grid.len())
        .map(|k| frac(|o| o.covered_envelope, k))
        .collect();
    let coverage_full_ci = (0..gamma_grid.len())
        .map(|k| frac(|o| o.covered_full, k))
        .collect();
    let mean_tau_hat = ok.iter().map(|o| o.tau_hat).sum::<f64>() / m;
    let var = ok.iter().map(|o| (o.tau_hat - mean_tau_hat).powi(2)).sum::<f64>() / (m - 1.0).max(1.0);
    Ok(CoverageCurve {
        gamma_grid: gamma_grid.to_vec(),
        coverage_envelope,
        coverage_full_ci,
        n_reps,
        n_failed,
        oracle,
        mean_tau_hat,
        sd_tau_hat: var.sqrt(),
        mean_ci_width: ok.iter().map(|o| o.ci_upper - o.ci_lower).sum::<f64>() / m,
        min_sigma_tau_upper: ok.iter().map(|o| o.sigma_upper).fold(f64::INFINITY, f64::min),
        mean_sigma_tau_upper: ok.iter().map(|o| o.sigma_upper).sum::<f64>() / m,
    })
}

/// Mean and spread of one estimator's point estimates across replications.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorSummary {
    pub label: String,
    pub mean: f64,
    pub sd: f64,
    pub n_failed: usize,
}

pub fn estimator_label(estimator: &Estimator) -> String {
    match estimator {
        Estimator::GFormula(OutcomeLearner::Ols) => "gformula".into(),
        Estimator::GFormula(OutcomeLearner::Ridge { penalty }) => format!("gformula_ridge({penalty})"),
        Estimator::Ipw { .. } => "ipw".into(),
    }
}

/// Point estimates of several estimators on the same replications (same
/// seeds as [`coverage_experiment`]), without bootstrap.
pub fn estimator_calibration(
    dgp: &dyn Dgp,
    estimators: &[Estimator],
    n_reps: usize,
    seed: u64,
) -> Result<Vec<EstimatorSummary>> {
    check_reps(n_reps)?;
    dgp.validate()?;
    let per_rep: Vec<Vec<Option<f64>>> = (0..n_reps)
        .into_par_iter()
        .map(|r| match dgp.sample(rep_seed(seed, r)) {
            Ok((trial, target)) => estimators
                .iter()
                .map(|e| e.estimate(&trial, &target).ok().filter(|v| v.is_finite()))
                .collect(),
            Err(_) => vec![None; estimators.len()],
        })
        .collect();
    Ok(estimators
        .iter()
        .enumerate()
        .map(|(k, e)| {
            let vals: Vec<f64> = per_rep.iter().filter_map(|v| v[k]).collect();
            let m = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / m;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0).max(1.0);
            EstimatorSummary {
                label: estimator_label(e),
                mean,
                sd: var.sqrt(),
                n_failed: n_reps - vals.len(),
            }
        })
        .collect())
}
