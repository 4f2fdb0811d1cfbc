use serde_json::{json, Value};
use trialgen_core::simulate::{
    coverage_experiment, estimator_calibration, hide_one_benchmark, CoverageSettings, Dgp, Dgp1Config,
    Dgp2Config, Dgp3Config, HideOneConfig,
};
use trialgen_core::transport::DEFAULT_WEIGHT_CLIP;
use trialgen_core::{Estimator, OutcomeLearner};

use super::tool_json;
use crate::args::{DgpArg, LearnerArg, SimulateArgs};
use crate::error::CliError;
use crate::io::{ensure_dir, fmt_num, json_num, write_json, CsvOut};

pub enum Design {
    One(Dgp1Config),
    Two(Dgp2Config),
    Three(Dgp3Config),
    HideOne(HideOneConfig),
}

impl Design {
    pub fn dgp(&self) -> &dyn Dgp {
        match self {
            Design::One(c) => c,
            Design::Two(c) => c,
            Design::Three(c) => c,
            Design::HideOne(c) => c,
        }
    }

    pub fn config_json(&self) -> Value {
        match self {
            Design::One(c) => serde_json::to_value(c),
            Design::Two(c) => serde_json::to_value(c),
            Design::Three(c) => serde_json::to_value(c),
            Design::HideOne(c) => serde_json::to_value(c),
        }
        .expect("configs serialize")
    }
}

fn set<T: Copy>(field: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *field = v;
    }
}

/// Builds the design with the overrides that apply to it; an override that
/// does not exist for the chosen design is a usage error.
pub fn design(args: &SimulateArgs) -> Result<Design, CliError> {
    use DgpArg::*;
    let flags: [(&str, bool, &[DgpArg]); 7] = [
        ("--mu-shift", args.mu_shift.is_some(), &[One, Two]),
        ("--gamma-r", args.gamma_r.is_some(), &[One, Two, Three]),
        ("--gamma-o", args.gamma_o.is_some(), &[One, Two, Three]),
        ("--beta-u", args.beta_u.is_some(), &[One, Three]),
        ("--beta-base", args.beta_base.is_some(), &[Two]),
        ("--beta-mod", args.beta_mod.is_some(), &[Two]),
        ("--hidden", args.hidden.is_some(), &[HideOne]),
    ];
    for (flag, given, allowed) in flags {
        if given && !allowed.contains(&args.dgp) {
            return Err(CliError::Usage(format!(
                "{flag} does not apply to --dgp {}",
                args.dgp.as_str()
            )));
        }
    }
    let d = match args.dgp {
        One => {
            let mut c = Dgp1Config::default();
            set(&mut c.n_trial, args.n_trial);
            set(&mut c.n_target, args.n_target);
            set(&mut c.mu_shift, args.mu_shift);
            set(&mut c.gamma_r, args.gamma_r);
            set(&mut c.gamma_o, args.gamma_o);
            set(&mut c.beta_u, args.beta_u);
            set(&mut c.sigma, args.sigma);
            Design::One(c)
        }
        Two => {
            let mut c = Dgp2Config::default();
            set(&mut c.n_trial, args.n_trial);
            set(&mut c.n_target, args.n_target);
            set(&mut c.mu_shift, args.mu_shift);
            set(&mut c.gamma_r, args.gamma_r);
            set(&mut c.gamma_o, args.gamma_o);
            set(&mut c.beta_base, args.beta_base);
            set(&mut c.beta_mod, args.beta_mod);
            set(&mut c.sigma, args.sigma);
            Design::Two(c)
        }
        Three => {
            let mut c = Dgp3Config::default();
            set(&mut c.n_trial, args.n_trial);
            set(&mut c.n_target, args.n_target);
            set(&mut c.gamma_r, args.gamma_r);
            set(&mut c.gamma_o, args.gamma_o);
            set(&mut c.beta_u, args.beta_u);
            set(&mut c.sigma, args.sigma);
            Design::Three(c)
        }
        HideOne => {
            let mut c = HideOneConfig::default();
            set(&mut c.n_trial, args.n_trial);
            set(&mut c.n_target, args.n_target);
            set(&mut c.sigma, args.sigma);
            set(&mut c.hidden, args.hidden);
            Design::HideOne(c)
        }
    };
    d.dgp().validate()?;
    Ok(d)
}

fn learner(args: &SimulateArgs) -> OutcomeLearner {
    match args.learner {
        LearnerArg::Ols => OutcomeLearner::Ols,
        LearnerArg::Ridge => OutcomeLearner::Ridge {
            penalty: args.ridge_penalty,
        },
    }
}

pub fn run(args: &SimulateArgs) -> Result<(), CliError> {
    let design = design(args)?;
    ensure_dir(&args.out_dir)?;
    let mut manifest = json!({
        "tool": tool_json(),
        "command": "simulate",
        "dgp": args.dgp.as_str(),
        "config": design.config_json(),
        "seed": args.seed,
        "n_reps": args.reps,
        "n_boot": args.boot,
        "alpha": json_num(args.alpha),
    });

    if let Design::HideOne(cfg) = &design {
        let rep = hide_one_benchmark(cfg, args.reps, args.seed, Some(args.boot))?;
        let mut csv = CsvOut::new(args.out_dir.join("hide_one.csv"), &["metric", "value"])?;
        let full = rep.coverage_full_ci.unwrap_or(f64::NAN);
        for (k, v) in [
            ("coverage_envelope", rep.coverage_envelope),
            ("coverage_full_ci", full),
            ("hidden_ranked_first", rep.hidden_ranked_first),
            ("mean_tau_hat_hidden", rep.mean_tau_hat_hidden),
            ("mean_bias_bound", rep.mean_bias_bound),
            ("mean_r2_s_z", rep.mean_r2_s_z),
            ("mean_r2_tau_z", rep.mean_r2_tau_z),
            ("tau_star", rep.oracle.tau_star),
            ("bias", rep.oracle.bias),
        ] {
            csv.row([k.to_string(), fmt_num(v)])?;
        }
        let path = csv.finish()?;
        manifest["n_failed"] = json!(rep.n_failed);
        manifest["oracle"] = serde_json::to_value(rep.oracle).expect("oracle serializes");
        manifest["estimator"] = json!({ "method": "gformula", "learner": "ols" });
        write_json(&args.out_dir.join("manifest.json"), &manifest)?;
        println!(
            "envelope coverage {}, full CI coverage {}; wrote {}",
            fmt_num(rep.coverage_envelope),
            fmt_num(full),
            path.display()
        );
        return Ok(());
    }

    let settings = CoverageSettings {
        n_boot: args.boot,
        alpha: args.alpha,
        estimator: Estimator::GFormula(learner(args)),
    };
    let curve = coverage_experiment(design.dgp(), &args.gamma_grid, args.reps, args.seed, &settings)?;
    let calibration = estimator_calibration(
        design.dgp(),
        &[
            settings.estimator,
            Estimator::Ipw {
                weight_clip: DEFAULT_WEIGHT_CLIP,
            },
        ],
        args.reps,
        args.seed,
    )?;

    let mut csv = CsvOut::new(args.out_dir.join("coverage.csv"), &["gamma", "metric", "value"])?;
    for (k, &g) in curve.gamma_grid.iter().enumerate() {
        csv.row([fmt_num(g), "envelope".into(), fmt_num(curve.coverage_envelope[k])])?;
        csv.row([fmt_num(g), "full_ci".into(), fmt_num(curve.coverage_full_ci[k])])?;
    }
    let path = csv.finish()?;

    manifest["n_failed"] = json!(curve.n_failed);
    manifest["gamma_grid"] = curve.gamma_grid.iter().map(|&g| json_num(g)).collect();
    manifest["oracle"] = serde_json::to_value(curve.oracle).expect("oracle serializes");
    manifest["estimator"] = match settings.estimator {
        Estimator::GFormula(OutcomeLearner::Ridge { penalty }) => {
            json!({ "method": "gformula", "learner": "ridge", "ridge_penalty": json_num(penalty) })
        }
        _ => json!({ "method": "gformula", "learner": "ols" }),
    };
    manifest["summary"] = json!({
        "mean_tau_hat": json_num(curve.mean_tau_hat),
        "sd_tau_hat": json_num(curve.sd_tau_hat),
        "mean_ci_width": json_num(curve.mean_ci_width),
        "min_sigma_tau_upper": json_num(curve.min_sigma_tau_upper),
        "mean_sigma_tau_upper": json_num(curve.mean_sigma_tau_upper),
    });
    manifest["calibration"] = calibration
        .iter()
        .map(|c| {
            json!({
                "estimator": c.label,
                "mean": json_num(c.mean),
                "sd": json_num(c.sd),
                "n_failed": c.n_failed,
            })
        })
        .collect();
    write_json(&args.out_dir.join("manifest.json"), &manifest)?;
    println!("wrote {}", path.display());
    Ok(())
}
