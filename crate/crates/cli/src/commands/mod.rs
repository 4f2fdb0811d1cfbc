pub mod analyze;
pub mod benchmark;
pub mod contour;
pub mod generate;
pub mod simulate;

use serde_json::{json, Value};
use trialgen_core::benchmark::{selection_r2, SelectionR2Method};
use trialgen_core::sensitivity::{sigma_tau_upper, sigma_tau_user, SigmaTauEstimate};
use trialgen_core::transport::fit_outcome_models_with;
use trialgen_core::{
    pool, validate_ingest, ColumnRoles, Error, Estimator, Ingested, OutcomeLearner, PooledDesign,
};

use crate::args::{DataArgs, EstimatorArg, LearnerArg, ModelArgs, R2MethodArg};
use crate::error::CliError;
use crate::io::{json_num, one_hot, read_table};

pub struct Loaded {
    pub data: Ingested,
    pub pooled: PooledDesign,
    pub one_hot: Vec<String>,
}

fn role(flag: &Option<String>, name: &str) -> Result<String, CliError> {
    flag.clone().ok_or_else(|| {
        CliError::Core(Error::MissingColumn {
            table: "trial",
            column: format!("<{name} column not given; pass --{name}>"),
        })
    })
}

pub fn load(args: &DataArgs) -> Result<Loaded, CliError> {
    let treatment = role(&args.treatment, "treatment")?;
    let outcome = role(&args.outcome, "outcome")?;
    let mut trial = read_table(&args.trial)?;
    let mut target = read_table(&args.target)?;
    let mut covariates = args.covariates.clone();
    let mut expanded = Vec::new();
    for col in &args.one_hot {
        if *col == treatment || *col == outcome {
            return Err(CliError::Usage(format!(
                "--one-hot cannot expand the `{col}` column"
            )));
        }
        let names = one_hot(&mut trial, &mut target, col)?;
        if let Some(list) = covariates.as_mut() {
            if let Some(pos) = list.iter().position(|c| c == col) {
                list.splice(pos..=pos, names.iter().cloned());
            }
        }
        expanded.extend(names);
    }
    let roles = ColumnRoles {
        covariates,
        treatment,
        outcome,
    };
    let data = validate_ingest(&trial, &target, &roles)?;
    if data.dropped_trial_rows + data.dropped_target_rows > 0 {
        log::warn!(
            "dropped {} trial and {} target rows with missing values",
            data.dropped_trial_rows,
            data.dropped_target_rows
        );
    }
    let pooled = pool(&data.trial, &data.target)?;
    Ok(Loaded {
        data,
        pooled,
        one_hot: expanded,
    })
}

pub fn learner(model: &ModelArgs) -> OutcomeLearner {
    match model.learner {
        LearnerArg::Ols => OutcomeLearner::Ols,
        LearnerArg::Ridge => OutcomeLearner::Ridge {
            penalty: model.ridge_penalty,
        },
    }
}

pub fn estimator(model: &ModelArgs) -> Estimator {
    match model.estimator {
        EstimatorArg::Gformula => Estimator::GFormula(learner(model)),
        EstimatorArg::Ipw => Estimator::Ipw {
            weight_clip: model.weight_clip,
        },
    }
}

pub fn r2_method(model: &ModelArgs) -> SelectionR2Method {
    match model.r2_s_x_method {
        R2MethodArg::Lpm => SelectionR2Method::Lpm,
        R2MethodArg::Mcfadden => SelectionR2Method::McFadden,
    }
}

/// User-supplied σ_τ|X values, or the residual-variance upper bound.
pub fn sigma_values(model: &ModelArgs, loaded: &Loaded) -> Result<Vec<SigmaTauEstimate>, CliError> {
    if model.sigma_tau.is_empty() {
        let models = fit_outcome_models_with(&loaded.data.trial, learner(model))?;
        Ok(vec![sigma_tau_upper(&models)])
    } else {
        Ok(model
            .sigma_tau
            .iter()
            .map(|&v| sigma_tau_user(v))
            .collect::<Result<_, Error>>()?)
    }
}

pub fn selection_scale(model: &ModelArgs, loaded: &Loaded) -> Result<(f64, f64), CliError> {
    let r2 = selection_r2(&loaded.pooled, r2_method(model))?;
    if r2 >= 1.0 {
        return Err(CliError::Core(Error::InvalidR2 {
            name: "r2_s_x",
            value: r2,
        }));
    }
    Ok((loaded.pooled.var_s(), r2))
}

pub fn estimator_json(model: &ModelArgs) -> Value {
    let est = estimator(model);
    let mut v = json!({ "method": est.method().as_str() });
    match est {
        Estimator::GFormula(OutcomeLearner::Ols) => v["learner"] = json!("ols"),
        Estimator::GFormula(OutcomeLearner::Ridge { penalty }) => {
            v["learner"] = json!("ridge");
            v["ridge_penalty"] = json_num(penalty);
        }
        Estimator::Ipw { weight_clip } => v["weight_clip"] = json_num(weight_clip),
    }
    v
}

pub fn data_json(loaded: &Loaded) -> Value {
    json!({
        "n_trial": loaded.data.trial.n(),
        "n_target": loaded.data.target.n(),
        "covariates": loaded.data.trial.covariate_names(),
        "one_hot_columns": loaded.one_hot,
        "dropped_trial_rows": loaded.data.dropped_trial_rows,
        "dropped_target_rows": loaded.data.dropped_target_rows,
    })
}

pub fn tool_json() -> Value {
    json!({ "name": "trialgen", "version": env!("CARGO_PKG_VERSION") })
}
