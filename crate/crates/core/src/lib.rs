//! Generalizing randomized-trial effects to a target population, with
//! omitted-moderator sensitivity analysis.
//!
//! The crate covers baseline transport estimators ([`transport`]), bias
//! bounds and robustness values ([`sensitivity`]), covariate benchmarking
//! ([`benchmark`]) and simulation studies with known oracles ([`simulate`]).

pub mod benchmark;
pub mod error;
pub mod model;
pub mod numerics;
pub mod rng;
pub mod sensitivity;
pub mod simulate;
pub mod transport;

pub use benchmark::{
    benchmark_table, effect_partial_r2, selection_partial_r2, selection_r2, SelectionR2Method,
};
pub use error::{Error, Result};
pub use model::{
    pool, validate_ingest, BenchmarkEntry, BoundKind, ColumnRoles, Ingested, Method, PooledDesign, RawTable,
    SensitivityParamsR2, SensitivityParamsRaw, SensitivityReport, TargetDataset, TransportEstimate,
    TrialDataset,
};
pub use numerics::Matrix;
pub use sensitivity::{
    contour_grid, inflate_interval, r2_bias_bound, raw_bias_bound, robustness_value, sigma_tau_upper,
    sigma_tau_user, ContourGrid, SigmaMode, SigmaTauEstimate,
};
pub use transport::{
    bootstrap_ci, fit_outcome_models, gformula_tate, ipw_tate, sate, Estimator, OutcomeLearner,
};
