use serde_json::json;
use trialgen_core::{TargetDataset, TrialDataset};

use super::simulate::{design, Design};
use super::tool_json;
use crate::args::{GenerateArgs, SimulateArgs};
use crate::error::CliError;
use crate::io::{ensure_dir, fmt_num, write_json, CsvOut};

fn simulate_args(args: &GenerateArgs) -> SimulateArgs {
    SimulateArgs {
        dgp: args.dgp,
        reps: 1,
        seed: args.seed,
        gamma_grid: vec![],
        boot: 0,
        alpha: 0.05,
        learner: crate::args::LearnerArg::Ols,
        ridge_penalty: 1.0,
        n_trial: args.n_trial,
        n_target: args.n_target,
        mu_shift: None,
        gamma_r: None,
        gamma_o: None,
        beta_u: None,
        beta_base: None,
        beta_mod: None,
        sigma: None,
        hidden: None,
        out_dir: args.out_dir.clone(),
    }
}

fn write_trial(args: &GenerateArgs, trial: &TrialDataset) -> Result<(), CliError> {
    let mut header: Vec<&str> = trial.covariate_names().iter().map(String::as_str).collect();
    header.extend(["treatment", "outcome"]);
    let mut csv = CsvOut::new(args.out_dir.join("trial.csv"), &header)?;
    for (i, x) in trial.covariates().rows_iter().enumerate() {
        let mut row: Vec<String> = x.iter().map(|&v| fmt_num(v)).collect();
        row.push(trial.treatment()[i].to_string());
        row.push(fmt_num(trial.outcome()[i]));
        csv.row(row)?;
    }
    csv.finish()?;
    Ok(())
}

fn write_target(args: &GenerateArgs, target: &TargetDataset) -> Result<(), CliError> {
    let header: Vec<&str> = target.covariate_names().iter().map(String::as_str).collect();
    let mut csv = CsvOut::new(args.out_dir.join("target.csv"), &header)?;
    for x in target.covariates().rows_iter() {
        csv.row(x.iter().map(|&v| fmt_num(v)))?;
    }
    csv.finish()?;
    Ok(())
}

pub fn run(args: &GenerateArgs) -> Result<(), CliError> {
    let design: Design = design(&simulate_args(args))?;
    let dgp = design.dgp();
    let (trial, target) = dgp.sample(args.seed)?;
    let oracle = dgp.oracle()?;
    ensure_dir(&args.out_dir)?;
    write_trial(args, &trial)?;
    write_target(args, &target)?;
    write_json(
        &args.out_dir.join("oracle.json"),
        &json!({
            "tool": tool_json(),
            "dgp": args.dgp.as_str(),
            "seed": args.seed,
            "config": design.config_json(),
            "oracle": oracle,
        }),
    )?;
    println!(
        "wrote trial.csv ({} rows), target.csv ({} rows), oracle.json to {}",
        trial.n(),
        target.n(),
        args.out_dir.display()
    );
    Ok(())
}
