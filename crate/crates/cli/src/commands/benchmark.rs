use serde_json::json;
use trialgen_core::benchmark::{benchmark_table, hide_covariate};
use trialgen_core::sensitivity::{robustness_value, strength_ratio};
use trialgen_core::Error;

use super::{data_json, estimator, load, r2_method, selection_scale, sigma_values, tool_json};
use crate::args::BenchmarkArgs;
use crate::error::CliError;
use crate::io::{ensure_dir, fmt_num, json_num, write_json, CsvOut};

pub fn run(args: &BenchmarkArgs) -> Result<(), CliError> {
    let loaded = load(&args.data)?;
    let (trial, target) = (&loaded.data.trial, &loaded.data.target);
    if trial.p() < 2 {
        return Err(Error::SingleCovariate.into());
    }
    let tau = estimator(&args.model).estimate(trial, target)?;
    let sigma = sigma_values(&args.model, &loaded)?[0];
    let (var_s, r2_s_x) = selection_scale(&args.model, &loaded)?;
    let rv = match args.rv {
        Some(v) if !(v.is_finite() && v >= 0.0) => {
            return Err(CliError::Usage(format!(
                "--rv must be finite and non-negative, got {v}"
            )))
        }
        Some(v) => v,
        None => robustness_value(tau.abs(), sigma.value, var_s, r2_s_x)?,
    };
    let table = benchmark_table(trial, &loaded.pooled, rv)?;

    ensure_dir(&args.out_dir)?;
    let mut csv = CsvOut::new(
        args.out_dir.join("benchmark.csv"),
        &[
            "covariate",
            "r2_s_z",
            "r2_tau_z",
            "product",
            "exceeds_rv",
            "strength_ratio",
            "rv_reference",
        ],
    )?;
    for e in &table {
        csv.row([
            e.covariate.clone(),
            fmt_num(e.r2_s_z),
            fmt_num(e.r2_tau_z),
            fmt_num(e.product),
            e.exceeds_rv.to_string(),
            fmt_num(strength_ratio(rv, e.product)),
            fmt_num(rv),
        ])?;
    }
    println!("rv = {}; wrote {}", fmt_num(rv), csv.finish()?.display());

    if let Some(name) = &args.hide {
        let z = trial
            .covariate_names()
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::MissingColumn {
                table: "trial",
                column: name.clone(),
            })?;
        let out = hide_covariate(trial, target, z, r2_method(&args.model))?;
        let report = json!({
            "tool": tool_json(),
            "data": data_json(&loaded),
            "hidden": out.covariate,
            "index": out.index,
            "r2_s_z": json_num(out.r2_s_z),
            "r2_tau_z": json_num(out.r2_tau_z),
            "tau_x_hat_full": json_num(out.tau_x_hat_full),
            "tau_x_hat_hidden": json_num(out.tau_x_hat_hidden),
            "shift_from_hiding": json_num(out.tau_x_hat_full - out.tau_x_hat_hidden),
            "sigma_tau": json_num(out.sigma_tau),
            "sigma_tau_mode": "upper_bound",
            "var_s": json_num(out.var_s),
            "r2_s_x": json_num(out.r2_s_x),
            "bias_bound": json_num(out.bias_bound),
            "envelope": [
                json_num(out.tau_x_hat_hidden - out.bias_bound),
                json_num(out.tau_x_hat_hidden + out.bias_bound),
            ],
            "envelope_covers_full_estimate":
                (out.tau_x_hat_full - out.tau_x_hat_hidden).abs() <= out.bias_bound,
        });
        let path = args.out_dir.join("hide.json");
        write_json(&path, &report)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}
