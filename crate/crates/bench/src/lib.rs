//! Shared fixtures for the benchmarks, drawn from the simulation designs so
//! the inputs have realistic shape.

use trialgen_core::simulate::{Dgp, Dgp1Config};
use trialgen_core::{pool, Matrix, PooledDesign, TargetDataset, TrialDataset};

pub fn dgp1_sample(n_trial: usize, n_target: usize, p: usize, seed: u64) -> (TrialDataset, TargetDataset) {
    let cfg = Dgp1Config {
        n_trial,
        n_target,
        ..Dgp1Config::with_p(p)
    };
    cfg.sample(seed).expect("valid design")
}

/// `[1 | X]` and outcome from a trial draw.
pub fn regression_problem(n: usize, p: usize, seed: u64) -> (Matrix, Vec<f64>) {
    let (trial, _) = dgp1_sample(n, p + 2, p, seed);
    (trial.covariates().with_intercept(), trial.outcome().to_vec())
}

/// Pooled selection design with `n` rows split 2:5 between trial and target.
pub fn selection_problem(n: usize, p: usize, seed: u64) -> PooledDesign {
    let n_trial = (n * 2 / 7).max(p + 2);
    let (trial, target) = dgp1_sample(n_trial, n - n_trial, p, seed);
    pool(&trial, &target).expect("matching covariates")
}
