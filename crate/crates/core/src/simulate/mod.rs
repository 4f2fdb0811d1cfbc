//! Simulation designs with oracles and the Monte Carlo drivers built on them.

mod coverage;
mod dgp;
mod hide_one;

pub use coverage::{
    coverage_experiment, estimator_calibration, estimator_label, rep_seed, CoverageCurve, CoverageSettings,
    EstimatorSummary, RECOMMENDED_MIN_REPS,
};
pub use dgp::{
    dgp1_population_check, gen_dgp1, gen_dgp2, gen_dgp3, mc_mean, Dgp, Dgp1Config, Dgp2Config, Dgp3Config,
    DgpOracle, HideOneConfig, PopulationCheck, DEFAULT_ORACLE_DRAWS, ORACLE_KEY,
};
pub use hide_one::{hide_one_benchmark, HideOneReport};
