use serde_json::{json, Value};
use trialgen_core::sensitivity::{
    contour_grid, inflate_interval, r2_bias_bound, raw_bias_bound, robustness_value,
};
use trialgen_core::transport::{bootstrap_ci, sate};
use trialgen_core::{
    benchmark_table, BoundKind, SensitivityParamsR2, SensitivityParamsRaw, SensitivityReport,
};

use super::{
    data_json, estimator, estimator_json, load, r2_method, selection_scale, sigma_values, tool_json,
};
use crate::args::AnalyzeArgs;
use crate::commands::contour::write_contour;
use crate::error::CliError;
use crate::io::{ensure_dir, fmt_num, json_num, json_opt, write_json, CsvOut};

/// One evaluated sensitivity setting.
struct Setting {
    gamma: Option<f64>,
    lambda: Option<f64>,
    r2_tau_u: Option<f64>,
    r2_s_u: Option<f64>,
    sigma_tau: Option<f64>,
    report: SensitivityReport,
}

fn paired(a: &[f64], b: &[f64], na: &str, nb: &str) -> Result<bool, CliError> {
    match (a.is_empty(), b.is_empty()) {
        (true, true) => Ok(false),
        (false, false) => Ok(true),
        _ => Err(CliError::Usage(format!(
            "--{na} and --{nb} must be given together"
        ))),
    }
}

fn opt_cell(x: Option<f64>) -> String {
    x.map(fmt_num).unwrap_or_default()
}

pub fn run(args: &AnalyzeArgs) -> Result<(), CliError> {
    let use_raw = paired(&args.gamma, &args.lambda, "gamma", "lambda")?;
    let use_r2 = paired(&args.r2_tau, &args.r2_s, "r2-tau", "r2-s")?;
    let loaded = load(&args.data)?;
    let (trial, target) = (&loaded.data.trial, &loaded.data.target);
    let est = bootstrap_ci(
        &estimator(&args.model),
        trial,
        target,
        args.boot,
        args.alpha,
        args.seed,
    )?;
    let sigmas = sigma_values(&args.model, &loaded)?;
    let (var_s, r2_s_x) = selection_scale(&args.model, &loaded)?;

    let mut settings = Vec::new();
    if use_raw {
        for &g in &args.gamma {
            for &l in &args.lambda {
                let params = SensitivityParamsRaw::new(g, l)?;
                settings.push(Setting {
                    gamma: Some(g),
                    lambda: Some(l),
                    r2_tau_u: None,
                    r2_s_u: None,
                    sigma_tau: None,
                    report: inflate_interval(&est, raw_bias_bound(&params), BoundKind::Raw)?,
                });
            }
        }
    }
    if use_r2 {
        for s in &sigmas {
            for &rt in &args.r2_tau {
                for &rs in &args.r2_s {
                    let params = SensitivityParamsR2::new(rt, rs, s.value, var_s, r2_s_x)?;
                    let report = inflate_interval(&est, r2_bias_bound(&params)?, BoundKind::PartialR2)?
                        .with_robustness(s.value, var_s, r2_s_x)?;
                    settings.push(Setting {
                        gamma: None,
                        lambda: None,
                        r2_tau_u: Some(rt),
                        r2_s_u: Some(rs),
                        sigma_tau: Some(s.value),
                        report,
                    });
                }
            }
        }
    }

    let robustness: Vec<Value> = sigmas
        .iter()
        .map(|s| {
            let rv = robustness_value(est.tau_x_hat.abs(), s.value, var_s, r2_s_x)?;
            Ok(json!({
                "sigma_tau": json_num(s.value),
                "rv_sign_reversal": json_num(rv),
                "rv_equal_strength": json_num(rv.sqrt()),
            }))
        })
        .collect::<Result<_, trialgen_core::Error>>()?;
    let rv_reference = robustness_value(est.tau_x_hat.abs(), sigmas[0].value, var_s, r2_s_x)?;
    let benchmark = if trial.p() >= 2 {
        let rows = benchmark_table(trial, &loaded.pooled, rv_reference)?;
        serde_json::to_value(rows).expect("benchmark rows serialize")
    } else {
        Value::Null
    };

    let sensitivity: Vec<Value> = settings
        .iter()
        .map(|s| {
            let r = &s.report;
            json!({
                "bound": r.bound,
                "assumptions": r.bound.assumptions(),
                "gamma": json_opt(s.gamma),
                "lambda": json_opt(s.lambda),
                "r2_tau_u": json_opt(s.r2_tau_u),
                "r2_s_u": json_opt(s.r2_s_u),
                "sigma_tau": json_opt(s.sigma_tau),
                "bias_bound": json_num(r.bias_bound),
                "envelope": [json_num(r.envelope_lower), json_num(r.envelope_upper)],
                "full_interval": [json_num(r.full_lower), json_num(r.full_upper)],
                "rv_sign_reversal": json_opt(r.rv_sign_reversal),
                "rv_equal_strength": json_opt(r.rv_equal_strength),
            })
        })
        .collect();

    let report = json!({
        "tool": tool_json(),
        "seed": args.seed,
        "estimator": estimator_json(&args.model),
        "data": data_json(&loaded),
        "estimate": {
            "tau_x_hat": json_num(est.tau_x_hat),
            "ci_lower": json_num(est.ci_lower),
            "ci_upper": json_num(est.ci_upper),
            "n_boot": est.n_boot,
            "alpha": json_num(est.alpha),
            "n_failed": est.n_failed,
            "sate": json_num(sate(trial)?),
        },
        "sigma_tau": {
            "mode": sigmas[0].mode.as_str(),
            "values": sigmas.iter().map(|s| json_num(s.value)).collect::<Vec<_>>(),
        },
        "var_s": json_num(var_s),
        "r2_s_x": json_num(r2_s_x),
        "r2_s_x_method": r2_method(&args.model).as_str(),
        "robustness": robustness,
        "rv_equal_strength_note": "sqrt of the product-scale robustness value: the partial R² both parameters would need if they were equal",
        "sensitivity": sensitivity,
        "benchmark": benchmark,
        "benchmark_rv_reference": json_num(rv_reference),
    });

    ensure_dir(&args.out_dir)?;
    let path = args.out_dir.join("report.json");
    write_json(&path, &report)?;
    println!(
        "tau_x_hat = {} [{}, {}]; wrote {}",
        fmt_num(est.tau_x_hat),
        fmt_num(est.ci_lower),
        fmt_num(est.ci_upper),
        path.display()
    );

    if args.envelope {
        let mut csv = CsvOut::new(
            args.out_dir.join("envelope.csv"),
            &[
                "bound",
                "gamma",
                "lambda",
                "r2_tau_u",
                "r2_s_u",
                "sigma_tau",
                "bias_bound",
                "tau_x_hat",
                "envelope_lower",
                "envelope_upper",
                "full_lower",
                "full_upper",
            ],
        )?;
        for s in &settings {
            let r = &s.report;
            let kind = match r.bound {
                BoundKind::Raw => "raw",
                BoundKind::PartialR2 => "partial_r2",
            };
            csv.row([
                kind.to_string(),
                opt_cell(s.gamma),
                opt_cell(s.lambda),
                opt_cell(s.r2_tau_u),
                opt_cell(s.r2_s_u),
                opt_cell(s.sigma_tau),
                fmt_num(r.bias_bound),
                fmt_num(est.tau_x_hat),
                fmt_num(r.envelope_lower),
                fmt_num(r.envelope_upper),
                fmt_num(r.full_lower),
                fmt_num(r.full_upper),
            ])?;
        }
        println!("wrote {}", csv.finish()?.display());
    }
    if args.contour {
        let grid = contour_grid(sigmas[0].value, var_s, r2_s_x, est.tau_x_hat, args.resolution)?;
        println!("wrote {}", write_contour(&args.out_dir, &grid)?.display());
    }
    Ok(())
}
