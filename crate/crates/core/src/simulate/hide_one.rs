//! Benchmark study: hide one observed effect modifier and check whether its
//! own partial R²s bound the resulting bias.

use rayon::prelude::*;
use serde::Serialize;

use crate::benchmark::{benchmark_table, hide_covariate, SelectionR2Method};
use crate::error::Result;
use crate::model::{pool, BoundKind};
use crate::rng::{child_seed, purpose};
use crate::sensitivity::inflate_interval;
use crate::simulate::coverage::{check_reps, rep_seed};
use crate::simulate::dgp::{Dgp, DgpOracle, HideOneConfig};
use crate::transport::{bootstrap_ci, Estimator, DEFAULT_ALPHA};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HideOneReport {
    pub n_reps: usize,
    pub n_failed: usize,
    pub oracle: DgpOracle,
    /// Share of replications where τ̂ (without Z) ± bound covers τ*.
    pub coverage_envelope: f64,
    /// Same for the widened bootstrap interval; absent without bootstrap.
    pub coverage_full_ci: Option<f64>,
    /// Share of replications where Z has the largest benchmark product.
    pub hidden_ranked_first: f64,
    pub mean_tau_hat_hidden: f64,
    pub mean_bias_bound: f64,
    pub mean_r2_s_z: f64,
    pub mean_r2_tau_z: f64,
}

struct Rep {
    covered: bool,
    covered_full: Option<bool>,
    first: bool,
    tau: f64,
    bound: f64,
    r2_s: f64,
    r2_tau: f64,
}

fn run_rep(config: &HideOneConfig, oracle: &DgpOracle, n_boot: Option<usize>, seed: u64) -> Result<Rep> {
    let z = config.hidden;
    let (trial, target) = config.sample(seed)?;
    let table = benchmark_table(&trial, &pool(&trial, &target)?, 0.0)?;
    let out = hide_covariate(&trial, &target, z, SelectionR2Method::Lpm)?;
    let t = oracle.tau_star;
    let covered = (out.tau_x_hat_hidden - t).abs() <= out.bias_bound;
    let covered_full = match n_boot {
        Some(b) => {
            let est = bootstrap_ci(
                &Estimator::default(),
                &trial.drop_covariate(z),
                &target.drop_covariate(z),
                b,
                DEFAULT_ALPHA,
                child_seed(seed, purpose::BOOTSTRAP),
            )?;
            let r = inflate_interval(&est, out.bias_bound, BoundKind::PartialR2)?;
            Some(r.full_lower <= t && t <= r.full_upper)
        }
        None => None,
    };
    Ok(Rep {
        covered,
        covered_full,
        first: table[0].index == z,
        tau: out.tau_x_hat_hidden,
        bound: out.bias_bound,
        r2_s: out.r2_s_z,
        r2_tau: out.r2_tau_z,
    })
}

/// Runs the hide-one study. With `n_boot` set, each replication also
/// bootstraps the reduced analysis and records full-interval coverage.
pub fn hide_one_benchmark(
    config: &HideOneConfig,
    n_reps: usize,
    seed: u64,
    n_boot: Option<usize>,
) -> Result<HideOneReport> {
    check_reps(n_reps)?;
    let oracle = config.oracle()?;
    let reps: Vec<Result<Rep>> = (0..n_reps)
        .into_par_iter()
        .map(|r| run_rep(config, &oracle, n_boot, rep_seed(seed, r)))
        .collect();
    let mut ok = Vec::with_capacity(n_reps);
    let mut first_err = None;
    for r in reps {
        match r {
            Ok(v) => ok.push(v),
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    if ok.is_empty() {
        return Err(first_err.expect("at least one replication"));
    }
    let m = ok.len() as f64;
    let share = |f: &dyn Fn(&Rep) -> bool| ok.iter().filter(|r| f(r)).count() as f64 / m;
    let avg = |f: &dyn Fn(&Rep) -> f64| ok.iter().map(f).sum::<f64>() / m;
    Ok(HideOneReport {
        n_reps,
        n_failed: n_reps - ok.len(),
        oracle,
        coverage_envelope: share(&|r| r.covered),
        coverage_full_ci: n_boot.map(|_| share(&|r| r.covered_full == Some(true))),
        hidden_ranked_first: share(&|r| r.first),
        mean_tau_hat_hidden: avg(&|r| r.tau),
        mean_bias_bound: avg(&|r| r.bound),
        mean_r2_s_z: avg(&|r| r.r2_s),
        mean_r2_tau_z: avg(&|r| r.r2_tau),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inert_hidden_covariate_needs_no_bound() {
        let cfg = HideOneConfig {
            theta: vec![0.0, 0.4, 0.3, 0.2, 0.1],
            ..HideOneConfig::default()
        };
        let rep = hide_one_benchmark(&cfg, 4, 5, None).unwrap();
        assert_eq!(rep.oracle.bias, 0.0);
        assert!(rep.mean_bias_bound < 0.05);
        assert!((rep.mean_tau_hat_hidden - rep.oracle.tau_star).abs() < 0.15);
        assert!(rep.coverage_full_ci.is_none());
    }

    #[test]
    fn deterministic() {
        let cfg = HideOneConfig {
            n_trial: 400,
            n_target: 600,
            ..HideOneConfig::default()
        };
        assert_eq!(
            hide_one_benchmark(&cfg, 3, 1, Some(100)).unwrap(),
            hide_one_benchmark(&cfg, 3, 1, Some(100)).unwrap()
        );
    }
}
