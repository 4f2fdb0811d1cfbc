//! Leave-one-covariate-out benchmarking.
//!
//! Each observed covariate Z is treated as if it were the omitted moderator:
//! its selection partial R² and effect-modification partial R² (both given
//! the remaining covariates) calibrate how strong an unobserved moderator
//! would have to be relative to something we can see.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{pool, BenchmarkEntry, PooledDesign, SensitivityParamsR2, TargetDataset, TrialDataset};
use crate::numerics::{logistic_fit, mcfadden_r2, ols_fit_tolerant, partial_r2, Matrix, DEFAULT_MAX_ITER};
use crate::sensitivity::{r2_bias_bound, sigma_tau_upper};
use crate::transport::{fit_outcome_models, gformula_tate};

/// Relative size below which an incremental sum of squares is treated as
/// exact zero (collinear or duplicated columns).
const ZERO_GAIN: f64 = 1e-12;

/// How R²_S~X, the selection variance explained by the observed covariates,
/// is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SelectionR2Method {
    /// Linear probability model R².
    #[default]
    Lpm,
    /// McFadden pseudo-R² of the logistic selection model.
    McFadden,
}

impl SelectionR2Method {
    pub fn as_str(self) -> &'static str {
        match self {
            SelectionR2Method::Lpm => "lpm",
            SelectionR2Method::McFadden => "mcfadden",
        }
    }
}

fn lpm_r2(x: &Matrix, s: &[f64]) -> Result<f64> {
    Ok(ols_fit_tolerant(&x.with_intercept(), s)?.r_squared)
}

/// In-sample R²_S~X on the pooled rows.
pub fn selection_r2(pooled: &PooledDesign, method: SelectionR2Method) -> Result<f64> {
    let r2 = match method {
        SelectionR2Method::Lpm => lpm_r2(pooled.covariates(), &pooled.selection_f64())?,
        SelectionR2Method::McFadden => {
            let fit = logistic_fit(
                &pooled.covariates().with_intercept(),
                pooled.selection(),
                DEFAULT_MAX_ITER,
            )?;
            mcfadden_r2(&fit, pooled.selection())
        }
    };
    Ok(r2.clamp(0.0, 1.0))
}

fn check_index(p: usize, z: usize) -> Result<()> {
    if p < 2 {
        return Err(Error::SingleCovariate);
    }
    if z >= p {
        return Err(Error::InvalidInput(format!(
            "covariate index {z} out of range for {p} covariates"
        )));
    }
    Ok(())
}

/// R²_S~Z|X₋Z from linear-probability fits of S on X and on X₋Z.
pub fn selection_partial_r2(pooled: &PooledDesign, z_index: usize) -> Result<f64> {
    check_index(pooled.covariates().ncols(), z_index)?;
    let s = pooled.selection_f64();
    let full = ols_fit_tolerant(&pooled.covariates().with_intercept(), &s)?;
    let reduced = ols_fit_tolerant(&pooled.covariates().drop_column(z_index).with_intercept(), &s)?;
    let (ssr_full, ssr_reduced) = (full.ssr(), reduced.ssr());
    if ssr_reduced - ssr_full <= ZERO_GAIN * ssr_reduced.max(f64::MIN_POSITIVE) {
        return Ok(0.0);
    }
    partial_r2(full.r_squared, reduced.r_squared)
}

/// Quantities shared by every covariate's effect partial R².
struct EffectBasis {
    cate: Vec<f64>,
    sigma2: f64,
}

fn effect_basis(trial: &TrialDataset) -> Result<EffectBasis> {
    let mut fits = Vec::with_capacity(2);
    for arm in [0u8, 1] {
        let rows = trial.arm_rows(arm);
        let x = trial.covariates().select_rows(&rows).with_intercept();
        let y: Vec<f64> = rows.iter().map(|&i| trial.outcome()[i]).collect();
        fits.push(ols_fit_tolerant(&x, &y)?);
    }
    let cate = trial
        .covariates()
        .rows_iter()
        .map(|x| fits[1].predict_with_intercept(x) - fits[0].predict_with_intercept(x))
        .collect();
    Ok(EffectBasis {
        cate,
        sigma2: fits[0].residual_variance + fits[1].residual_variance,
    })
}

fn effect_partial_r2_with(trial: &TrialDataset, basis: &EffectBasis, z: usize) -> Result<f64> {
    let n = trial.n() as f64;
    let reduced = ols_fit_tolerant(&trial.covariates().drop_column(z).with_intercept(), &basis.cate)?;
    let gain = reduced.ssr() / n;
    let total = gain + basis.sigma2;
    let centered: f64 = {
        let m = crate::numerics::mean(&basis.cate);
        basis.cate.iter().map(|c| (c - m) * (c - m)).sum::<f64>() / n
    };
    if total <= 0.0 || gain <= ZERO_GAIN * (centered + basis.sigma2) {
        return Ok(0.0);
    }
    Ok((gain / total).clamp(0.0, 1.0))
}

/// R²_τ~Z|X₋Z from the trial's arm-wise outcome regressions.
///
/// The fitted effect τ̂(X) = μ̂₁(X) − μ̂₀(X) is linear in X, so regressing it
/// on X alone always gives R² = 1. Instead the effect is modelled as
/// τ̂(X) plus residual heterogeneity with variance
/// σ²_τ|X = Var(Y | A = 1, X) + Var(Y | A = 0, X), and Z's share is
/// `v / (v + σ²_τ|X)` where `v` is the mean squared residual of τ̂(X) on
/// (1, X₋Z). This is the partial R² of Z on that outcome scale, and reduces
/// to the plain two-stage R² when the arms fit exactly.
pub fn effect_partial_r2(trial: &TrialDataset, z_index: usize) -> Result<f64> {
    check_index(trial.p(), z_index)?;
    let basis = effect_basis(trial)?;
    effect_partial_r2_with(trial, &basis, z_index)
}

/// One entry per covariate, sorted by product (descending, ties by column).
pub fn benchmark_table(
    trial: &TrialDataset,
    pooled: &PooledDesign,
    rv_reference: f64,
) -> Result<Vec<BenchmarkEntry>> {
    let p = trial.p();
    if p < 2 {
        return Err(Error::SingleCovariate);
    }
    if pooled.covariates().ncols() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: pooled.covariates().ncols(),
        });
    }
    let basis = effect_basis(trial)?;
    let mut entries = (0..p)
        .into_par_iter()
        .map(|z| {
            let r2_s_z = selection_partial_r2(pooled, z)?;
            let r2_tau_z = effect_partial_r2_with(trial, &basis, z)?;
            let product = r2_s_z * r2_tau_z;
            Ok(BenchmarkEntry {
                covariate: trial.covariate_names()[z].clone(),
                index: z,
                r2_s_z,
                r2_tau_z,
                product,
                exceeds_rv: exceeds(product, rv_reference),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    entries.sort_by(|a, b| b.product.total_cmp(&a.product).then(a.index.cmp(&b.index)));
    Ok(entries)
}

/// Result of treating one observed covariate as unobserved.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct HideOutcome {
    pub covariate: String,
    pub index: usize,
    /// Partial R²s of the covariate while still observed.
    pub r2_s_z: f64,
    pub r2_tau_z: f64,
    /// g-formula estimate with every covariate.
    pub tau_x_hat_full: f64,
    /// g-formula estimate without the hidden covariate.
    pub tau_x_hat_hidden: f64,
    /// Quantities of the analysis without the hidden covariate.
    pub sigma_tau: f64,
    pub var_s: f64,
    pub r2_s_x: f64,
    /// Partial-R² bound at the covariate's own partial R²s.
    pub bias_bound: f64,
}

/// Benchmarks covariate `z_index`, drops it and bounds the bias of the
/// reduced analysis using the covariate's pre-hiding partial R²s.
pub fn hide_covariate(
    trial: &TrialDataset,
    target: &TargetDataset,
    z_index: usize,
    r2_method: SelectionR2Method,
) -> Result<HideOutcome> {
    check_index(trial.p(), z_index)?;
    let pooled = pool(trial, target)?;
    let r2_s_z = selection_partial_r2(&pooled, z_index)?;
    let r2_tau_z = effect_partial_r2(trial, z_index)?;
    let tau_x_hat_full = gformula_tate(&fit_outcome_models(trial)?, target)?;

    let trial_h = trial.drop_covariate(z_index);
    let target_h = target.drop_covariate(z_index);
    let pooled_h = pooled.drop_covariate(z_index);
    let models = fit_outcome_models(&trial_h)?;
    let tau_x_hat_hidden = gformula_tate(&models, &target_h)?;
    let sigma_tau = sigma_tau_upper(&models).value;
    let var_s = pooled_h.var_s();
    let r2_s_x = selection_r2(&pooled_h, r2_method)?;
    let bias_bound = r2_bias_bound(&SensitivityParamsR2 {
        r2_tau_u: r2_tau_z,
        r2_s_u: r2_s_z,
        sigma_tau,
        var_s,
        r2_s_x,
    })?;
    Ok(HideOutcome {
        covariate: trial.covariate_names()[z_index].clone(),
        index: z_index,
        r2_s_z,
        r2_tau_z,
        tau_x_hat_full,
        tau_x_hat_hidden,
        sigma_tau,
        var_s,
        r2_s_x,
        bias_bound,
    })
}

/// A benchmark reaches the robustness value when its product is at least RV;
/// with RV = 0 only strictly positive products count.
fn exceeds(product: f64, rv: f64) -> bool {
    if rv == 0.0 {
        product > 0.0
    } else {
        product >= rv
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn names(p: usize) -> Vec<String> {
        (0..p).map(|j| format!("x{j}")).collect()
    }

    /// Trial with Y = 1 + A·(1 + effect·X_z) + noise·ε, X ~ N(0, I).
    fn trial(n: usize, p: usize, z: usize, effect: f64, noise: f64, seed: u64) -> TrialDataset {
        let mut r = rng::stream(seed, 0);
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..p).map(|_| r.sample(StandardNormal)).collect())
            .collect();
        let a: Vec<u8> = (0..n).map(|i| (i % 2) as u8).collect();
        let y = x
            .iter()
            .zip(&a)
            .map(|(row, &t)| {
                let e: f64 = r.sample(StandardNormal);
                1.0 + f64::from(t) * (1.0 + effect * row[z]) + noise * e
            })
            .collect();
        TrialDataset::new(Matrix::from_rows(&x).unwrap(), a, y, names(p)).unwrap()
    }

    fn target(n: usize, p: usize, shift: &[f64], seed: u64) -> TargetDataset {
        let mut r = rng::stream(seed, 1);
        let x: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                (0..p)
                    .map(|j| shift[j] + r.sample::<f64, _>(StandardNormal))
                    .collect()
            })
            .collect();
        TargetDataset::new(Matrix::from_rows(&x).unwrap(), names(p)).unwrap()
    }

    #[test]
    fn effect_r2_extremes() {
        let flat = trial(1000, 3, 0, 0.0, 1.0, 1);
        for z in 0..3 {
            let v = effect_partial_r2(&flat, z).unwrap();
            assert!(v < 0.02, "{z}: {v}");
        }
        let sharp = trial(400, 3, 1, 1.0, 0.0, 2);
        assert!(effect_partial_r2(&sharp, 1).unwrap() > 0.999);
        assert!(effect_partial_r2(&sharp, 0).unwrap() < 1e-6);
    }

    #[test]
    fn duplicate_column_scores_zero() {
        let base = trial(300, 2, 0, 0.8, 0.5, 3);
        let cols: Vec<Vec<f64>> = vec![
            base.covariates().column(0),
            base.covariates().column(1),
            base.covariates().column(0),
        ];
        let dup = TrialDataset::new(
            Matrix::from_columns(&cols).unwrap(),
            base.treatment().to_vec(),
            base.outcome().to_vec(),
            names(3),
        )
        .unwrap();
        let tgt = target(500, 3, &[0.5, 0.0, 0.5], 4);
        let tgt = TargetDataset::new(
            Matrix::from_columns(&[
                tgt.covariates().column(0),
                tgt.covariates().column(1),
                tgt.covariates().column(0),
            ])
            .unwrap(),
            names(3),
        )
        .unwrap();
        let pooled = pool(&dup, &tgt).unwrap();
        for z in [0, 2] {
            assert_eq!(effect_partial_r2(&dup, z).unwrap(), 0.0);
            assert_eq!(selection_partial_r2(&pooled, z).unwrap(), 0.0);
        }
        let table = benchmark_table(&dup, &pooled, 0.01).unwrap();
        assert_eq!(table.len(), 3);
        assert!(table.iter().all(|e| e.product == 0.0 || e.index == 1));
    }

    #[test]
    fn noise_column_has_little_selection_r2() {
        let tr = trial(2000, 3, 0, 0.5, 1.0, 5);
        let tg = target(5000, 3, &[0.5, 0.5, 0.0], 6);
        let pooled = pool(&tr, &tg).unwrap();
        assert!(selection_partial_r2(&pooled, 2).unwrap() < 0.01);
        assert!(selection_partial_r2(&pooled, 0).unwrap() > 0.01);
    }

    #[test]
    fn table_sorted_and_flagged() {
        let tr = trial(600, 3, 1, 1.0, 1.0, 7);
        let tg = target(900, 3, &[0.0, 0.7, 0.2], 8);
        let pooled = pool(&tr, &tg).unwrap();
        let table = benchmark_table(&tr, &pooled, 0.0).unwrap();
        assert_eq!(table[0].index, 1);
        for w in table.windows(2) {
            assert!(w[0].product >= w[1].product);
        }
        for e in &table {
            assert!((0.0..=1.0).contains(&e.r2_s_z) && (0.0..=1.0).contains(&e.r2_tau_z));
            assert_eq!(e.exceeds_rv, e.product > 0.0);
        }
        let strict = benchmark_table(&tr, &pooled, 1.0).unwrap();
        assert!(strict.iter().all(|e| !e.exceeds_rv));
    }

    #[test]
    fn rv_comparison() {
        assert!(!exceeds(0.02, 0.04));
        assert!(exceeds(0.04, 0.04));
        assert!(!exceeds(0.0, 0.0));
    }

    #[test]
    fn single_covariate_rejected() {
        let tr = trial(50, 1, 0, 0.0, 1.0, 9);
        let tg = target(50, 1, &[0.0], 10);
        let pooled = pool(&tr, &tg).unwrap();
        assert_eq!(selection_partial_r2(&pooled, 0), Err(Error::SingleCovariate));
        assert_eq!(effect_partial_r2(&tr, 0), Err(Error::SingleCovariate));
        assert_eq!(benchmark_table(&tr, &pooled, 0.1), Err(Error::SingleCovariate));
    }

    #[test]
    fn selection_r2_methods_in_range() {
        let tr = trial(300, 2, 0, 0.0, 1.0, 11);
        let tg = target(300, 2, &[1.0, 0.0], 12);
        let pooled = pool(&tr, &tg).unwrap();
        for m in [SelectionR2Method::Lpm, SelectionR2Method::McFadden] {
            let r = selection_r2(&pooled, m).unwrap();
            assert!(r > 0.05 && r < 1.0, "{m:?}: {r}");
        }
    }
}
