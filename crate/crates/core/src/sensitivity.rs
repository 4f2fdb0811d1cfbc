//! Omitted-moderator bias bounds and robustness values.
//!
//! Under a latent moderator U with linear effect modification, the gap
//! between the target effect and the X-adjusted transport estimand is
//! `E[β(X)·Δ_U(X) | S = 0]`: moderation strength times moderator imbalance.
//! Two bounds follow:
//!
//! * raw: `|bias| ≤ Γ·Λ` when `|β| ≤ Γ` and `|Δ_U| ≤ Λ`;
//! * partial R²: `|bias| ≤ σ_τ|X · sqrt(R²_τ~U|X · R²_S~U|X / (Var(S)(1 − R²_S~X)))`,
//!   which additionally needs constant β and a constant X-adjusted imbalance.
//!
//! Inverting the second bound at a target bias `B` gives the robustness
//! value, a threshold on the product of the two partial R²s.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{
    BoundKind, SensitivityParamsR2, SensitivityParamsRaw, SensitivityReport, TransportEstimate,
};
use crate::transport::OutcomeModels;

/// Γ·Λ.
pub fn raw_bias_bound(params: &SensitivityParamsRaw) -> f64 {
    params.gamma * params.lambda
}

/// Closed-form partial-R² bound on the external-validity bias.
pub fn r2_bias_bound(params: &SensitivityParamsR2) -> Result<f64> {
    params.validate()?;
    let product = params.r2_tau_u * params.r2_s_u;
    if product == 0.0 {
        return Ok(0.0);
    }
    let scale = params.var_s * (1.0 - params.r2_s_x);
    Ok(params.sigma_tau * (product / scale).sqrt())
}

fn check_scale(var_s: f64, r2_s_x: f64) -> Result<()> {
    if !(0.0..1.0).contains(&r2_s_x) {
        return Err(Error::InvalidR2 {
            name: "r2_s_x",
            value: r2_s_x,
        });
    }
    if !(var_s > 0.0 && var_s <= 0.25 + 1e-12) {
        return Err(Error::InvalidR2 {
            name: "var_s",
            value: var_s,
        });
    }
    Ok(())
}

/// Smallest product `R²_τ~U|X · R²_S~U|X` able to produce a bias of `bias_target`:
/// `Var(S)(1 − R²_S~X)(B/σ)²`.
///
/// `B = 0` gives 0. With `σ = 0` no moderator can produce a positive bias and
/// the result is `+∞`.
pub fn robustness_value(bias_target: f64, sigma_tau: f64, var_s: f64, r2_s_x: f64) -> Result<f64> {
    if !(bias_target.is_finite() && bias_target >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "bias target must be finite and non-negative, got {bias_target}"
        )));
    }
    if !(sigma_tau.is_finite() && sigma_tau >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "sigma_tau must be finite and non-negative, got {sigma_tau}"
        )));
    }
    check_scale(var_s, r2_s_x)?;
    if bias_target == 0.0 {
        return Ok(0.0);
    }
    if sigma_tau == 0.0 {
        return Ok(f64::INFINITY);
    }
    let ratio = bias_target / sigma_tau;
    Ok(var_s * (1.0 - r2_s_x) * ratio * ratio)
}

/// How many times stronger (on the product scale) than a benchmark an
/// unobserved moderator must be to reach the robustness value.
pub fn strength_ratio(rv: f64, benchmark_product: f64) -> f64 {
    if benchmark_product == 0.0 {
        return f64::INFINITY;
    }
    rv / benchmark_product
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SigmaMode {
    UserSupplied,
    UpperBound,
}

impl SigmaMode {
    pub fn as_str(self) -> &'static str {
        match self {
            SigmaMode::UserSupplied => "user_supplied",
            SigmaMode::UpperBound => "upper_bound",
        }
    }
}

/// Residual treatment-effect standard deviation σ_τ|X and where it came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SigmaTauEstimate {
    pub value: f64,
    pub mode: SigmaMode,
}

/// `sqrt(Var(Y | A = 1, X) + Var(Y | A = 0, X))` from the arm residual
/// variances. Conservative: it also absorbs outcome noise that is not effect
/// heterogeneity.
pub fn sigma_tau_upper(models: &OutcomeModels) -> SigmaTauEstimate {
    SigmaTauEstimate {
        value: (models.residual_var0 + models.residual_var1).sqrt(),
        mode: SigmaMode::UpperBound,
    }
}

pub fn sigma_tau_user(value: f64) -> Result<SigmaTauEstimate> {
    if !(value.is_finite() && value >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "sigma_tau must be finite and non-negative, got {value}"
        )));
    }
    Ok(SigmaTauEstimate {
        value,
        mode: SigmaMode::UserSupplied,
    })
}

/// Widens a baseline estimate by a bias bound.
///
/// The envelope is `τ̂ ± b`. The full interval is the bootstrap interval
/// widened by `b` on each side; if the point estimate fell outside its own
/// percentile interval, the interval is first stretched to reach it so the
/// full interval always contains the envelope.
pub fn inflate_interval(
    base: &TransportEstimate,
    bias_bound: f64,
    bound: BoundKind,
) -> Result<SensitivityReport> {
    if !(bias_bound.is_finite() && bias_bound >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "bias bound must be finite and non-negative, got {bias_bound}"
        )));
    }
    let t = base.tau_x_hat;
    Ok(SensitivityReport {
        estimate: base.clone(),
        bound,
        bias_bound,
        envelope_lower: t - bias_bound,
        envelope_upper: t + bias_bound,
        full_lower: base.ci_lower.min(t) - bias_bound,
        full_upper: base.ci_upper.max(t) + bias_bound,
        rv_sign_reversal: None,
        rv_equal_strength: None,
    })
}

impl SensitivityReport {
    /// Attaches the sign-reversal robustness value `RV(|τ̂|)`.
    pub fn with_robustness(mut self, sigma_tau: f64, var_s: f64, r2_s_x: f64) -> Result<Self> {
        let rv = robustness_value(self.estimate.tau_x_hat.abs(), sigma_tau, var_s, r2_s_x)?;
        self.rv_sign_reversal = Some(rv);
        self.rv_equal_strength = Some(rv.sqrt());
        Ok(self)
    }
}

/// Bias bounds over a uniform grid of the two partial R²s.
#[derive(Debug, Clone, PartialEq)]
pub struct ContourGrid {
    pub r2_tau_axis: Vec<f64>,
    pub r2_s_axis: Vec<f64>,
    /// `bound[i][j]` at `(r2_tau_axis[i], r2_s_axis[j])`.
    pub bound: Vec<Vec<f64>>,
    /// Cells whose bound reaches `|τ̂_X|`.
    pub reversal_mask: Vec<Vec<bool>>,
    pub tau_x_hat: f64,
}

fn unit_axis(resolution: usize) -> Vec<f64> {
    let last = (resolution - 1) as f64;
    (0..resolution).map(|i| i as f64 / last).collect()
}

pub fn contour_grid(
    sigma_tau: f64,
    var_s: f64,
    r2_s_x: f64,
    tau_x_hat: f64,
    resolution: usize,
) -> Result<ContourGrid> {
    if resolution < 2 {
        return Err(Error::InvalidInput(format!(
            "contour resolution must be at least 2, got {resolution}"
        )));
    }
    let axis = unit_axis(resolution);
    let target = tau_x_hat.abs();
    let bound: Vec<Vec<f64>> = axis
        .par_iter()
        .map(|&rt| {
            axis.iter()
                .map(|&rs| {
                    r2_bias_bound(&SensitivityParamsR2 {
                        r2_tau_u: rt,
                        r2_s_u: rs,
                        sigma_tau,
                        var_s,
                        r2_s_x,
                    })
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let reversal_mask = bound
        .iter()
        .map(|row| row.iter().map(|&b| b >= target).collect())
        .collect();
    Ok(ContourGrid {
        r2_tau_axis: axis.clone(),
        r2_s_axis: axis,
        bound,
        reversal_mask,
        tau_x_hat,
    })
}
