//! Domain types shared across the crate and validation of raw tables into
//! typed trial/target datasets.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Randomized-trial sample: covariates, binary treatment, outcome.
///
/// Guarantees: treatment entries are 0/1 and both arms are non-empty, every
/// value is finite, and the covariate names match the matrix width.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialDataset {
    covariates: Matrix,
    treatment: Vec<u8>,
    outcome: Vec<f64>,
    covariate_names: Vec<String>,
}

impl TrialDataset {
    pub fn new(
        covariates: Matrix,
        treatment: Vec<u8>,
        outcome: Vec<f64>,
        covariate_names: Vec<String>,
    ) -> Result<Self> {
        let n = covariates.nrows();
        for len in [treatment.len(), outcome.len()] {
            if len != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: len,
                });
            }
        }
        if covariate_names.len() != covariates.ncols() {
            return Err(Error::DimensionMismatch {
                expected: covariates.ncols(),
                found: covariate_names.len(),
            });
        }
        if let Some((row, a)) = treatment.iter().enumerate().find(|(_, &a)| a > 1) {
            return Err(Error::NonBinaryTreatment {
                row,
                value: a.to_string(),
            });
        }
        check_finite(&covariates, &covariate_names)?;
        if let Some(row) = outcome.iter().position(|y| !y.is_finite()) {
            return Err(Error::NonFiniteValue {
                column: "outcome".into(),
                row,
            });
        }
        let treated = treatment.iter().filter(|&&a| a == 1).count();
        for (arm, rows) in [(0u8, n - treated), (1u8, treated)] {
            if rows == 0 {
                return Err(Error::EmptyArm {
                    arm,
                    rows,
                    required: 1,
                });
            }
        }
        Ok(Self {
            covariates,
            treatment,
            outcome,
            covariate_names,
        })
    }

    pub fn n(&self) -> usize {
        self.covariates.nrows()
    }

    pub fn p(&self) -> usize {
        self.covariates.ncols()
    }

    pub fn covariates(&self) -> &Matrix {
        &self.covariates
    }

    pub fn treatment(&self) -> &[u8] {
        &self.treatment
    }

    pub fn outcome(&self) -> &[f64] {
        &self.outcome
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    /// Row indices assigned to arm `a`.
    pub fn arm_rows(&self, a: u8) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.treatment[i] == a).collect()
    }

    /// Rows `idx` (with repetition) as a new dataset; fails if an arm empties.
    pub fn resample(&self, idx: &[usize]) -> Result<Self> {
        Self::new(
            self.covariates.select_rows(idx),
            idx.iter().map(|&i| self.treatment[i]).collect(),
            idx.iter().map(|&i| self.outcome[i]).collect(),
            self.covariate_names.clone(),
        )
    }

    pub fn drop_covariate(&self, j: usize) -> Self {
        let mut names = self.covariate_names.clone();
        names.remove(j);
        Self {
            covariates: self.covariates.drop_column(j),
            treatment: self.treatment.clone(),
            outcome: self.outcome.clone(),
            covariate_names: names,
        }
    }
}

/// Target-population covariates (no treatment, no outcome).
#[derive(Debug, Clone, PartialEq)]
pub struct TargetDataset {
    covariates: Matrix,
    covariate_names: Vec<String>,
}

impl TargetDataset {
    pub fn new(covariates: Matrix, covariate_names: Vec<String>) -> Result<Self> {
        if covariate_names.len() != covariates.ncols() {
            return Err(Error::DimensionMismatch {
                expected: covariates.ncols(),
                found: covariate_names.len(),
            });
        }
        if covariates.nrows() == 0 {
            return Err(Error::InvalidInput("target dataset has no rows".into()));
        }
        check_finite(&covariates, &covariate_names)?;
        Ok(Self {
            covariates,
            covariate_names,
        })
    }

    pub fn n(&self) -> usize {
        self.covariates.nrows()
    }

    pub fn p(&self) -> usize {
        self.covariates.ncols()
    }

    pub fn covariates(&self) -> &Matrix {
        &self.covariates
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn resample(&self, idx: &[usize]) -> Self {
        Self {
            covariates: self.covariates.select_rows(idx),
            covariate_names: self.covariate_names.clone(),
        }
    }

    pub fn drop_covariate(&self, j: usize) -> Self {
        let mut names = self.covariate_names.clone();
        names.remove(j);
        Self {
            covariates: self.covariates.drop_column(j),
            covariate_names: names,
        }
    }
}

fn check_finite(m: &Matrix, names: &[String]) -> Result<()> {
    for (row, r) in m.rows_iter().enumerate() {
        if let Some(j) = r.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue {
                column: names[j].clone(),
                row,
            });
        }
    }
    Ok(())
}

pub(crate) fn ensure_same_schema(trial: &[String], target: &[String]) -> Result<()> {
    if trial != target {
        return Err(Error::SchemaMismatch {
            trial: trial.to_vec(),
            target: target.to_vec(),
        });
    }
    Ok(())
}

/// Trial and target covariates stacked, with the selection indicator
/// (1 = trial row, 0 = target row).
#[derive(Debug, Clone, PartialEq)]
pub struct PooledDesign {
    covariates: Matrix,
    selection: Vec<u8>,
    n_trial: usize,
    covariate_names: Vec<String>,
}

impl PooledDesign {
    pub fn covariates(&self) -> &Matrix {
        &self.covariates
    }

    pub fn selection(&self) -> &[u8] {
        &self.selection
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn n_trial(&self) -> usize {
        self.n_trial
    }

    pub fn n_target(&self) -> usize {
        self.selection.len() - self.n_trial
    }

    pub fn n(&self) -> usize {
        self.selection.len()
    }

    /// Share of trial rows, π.
    pub fn pi(&self) -> f64 {
        self.n_trial as f64 / self.n() as f64
    }

    /// Var(S) = π(1 − π).
    pub fn var_s(&self) -> f64 {
        let pi = self.pi();
        pi * (1.0 - pi)
    }

    pub fn selection_f64(&self) -> Vec<f64> {
        self.selection.iter().map(|&s| f64::from(s)).collect()
    }

    pub fn drop_covariate(&self, j: usize) -> Self {
        let mut names = self.covariate_names.clone();
        names.remove(j);
        Self {
            covariates: self.covariates.drop_column(j),
            selection: self.selection.clone(),
            n_trial: self.n_trial,
            covariate_names: names,
        }
    }
}

/// Stacks trial rows over target rows.
pub fn pool(trial: &TrialDataset, target: &TargetDataset) -> Result<PooledDesign> {
    ensure_same_schema(trial.covariate_names(), target.covariate_names())?;
    let covariates = trial.covariates().vstack(target.covariates())?;
    let mut selection = vec![1u8; trial.n()];
    selection.resize(trial.n() + target.n(), 0);
    Ok(PooledDesign {
        covariates,
        selection,
        n_trial: trial.n(),
        covariate_names: trial.covariate_names().to_vec(),
    })
}

/// Raw bounds on moderation strength (Γ) and moderator imbalance (Λ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SensitivityParamsRaw {
    pub gamma: f64,
    pub lambda: f64,
}

impl SensitivityParamsRaw {
    pub fn new(gamma: f64, lambda: f64) -> Result<Self> {
        for (name, v) in [("gamma", gamma), ("lambda", lambda)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidInput(format!(
                    "{name} must be finite and non-negative, got {v}"
                )));
            }
        }
        Ok(Self { gamma, lambda })
    }
}

/// Partial-R² sensitivity parameters plus the data-side scale quantities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SensitivityParamsR2 {
    /// Share of residual treatment-effect variance explained by the moderator.
    pub r2_tau_u: f64,
    /// Share of residual selection variance explained by the moderator.
    pub r2_s_u: f64,
    /// Residual treatment-effect standard deviation given X.
    pub sigma_tau: f64,
    /// Var(S) = π(1 − π).
    pub var_s: f64,
    /// R² of selection on the observed covariates.
    pub r2_s_x: f64,
}

impl SensitivityParamsR2 {
    pub fn new(r2_tau_u: f64, r2_s_u: f64, sigma_tau: f64, var_s: f64, r2_s_x: f64) -> Result<Self> {
        let p = Self {
            r2_tau_u,
            r2_s_u,
            sigma_tau,
            var_s,
            r2_s_x,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("r2_tau_u", self.r2_tau_u), ("r2_s_u", self.r2_s_u)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidR2 { name, value: v });
            }
        }
        if !(0.0..1.0).contains(&self.r2_s_x) {
            return Err(Error::InvalidR2 {
                name: "r2_s_x",
                value: self.r2_s_x,
            });
        }
        if !(self.var_s > 0.0 && self.var_s <= 0.25 + 1e-12) {
            return Err(Error::InvalidR2 {
                name: "var_s",
                value: self.var_s,
            });
        }
        if !(self.sigma_tau.is_finite() && self.sigma_tau >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "sigma_tau must be finite and non-negative, got {}",
                self.sigma_tau
            )));
        }
        Ok(())
    }
}

/// Transport estimator family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    GFormula,
    Ipw,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::GFormula => "gformula",
            Method::Ipw => "ipw",
        }
    }
}

/// Point estimate of the X-adjusted transport estimand with its percentile
/// bootstrap interval.
///
/// `ci_lower <= ci_upper` always holds. The point estimate usually lies in
/// the interval but a percentile interval does not guarantee it.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TransportEstimate {
    pub tau_x_hat: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub method: Method,
    pub n_boot: usize,
    pub alpha: f64,
    /// Resamples on which the estimator failed and were left out.
    pub n_failed: usize,
}

/// Which closed-form bound produced a bias bound.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    /// |β(X)| ≤ Γ and |Δ_U(X)| ≤ Λ.
    Raw,
    /// Partial-R² parameterization.
    PartialR2,
}

impl BoundKind {
    /// Modeling assumptions the bound relies on, beyond trial internal validity.
    pub fn assumptions(self) -> &'static [&'static str] {
        match self {
            BoundKind::Raw => &[
                "latent moderator bridge: Y(a) independent of S given (X, U)",
                "linear effect modification in U",
                "|beta(X)| <= gamma and |Delta_U(X)| <= lambda almost surely",
            ],
            BoundKind::PartialR2 => &[
                "latent moderator bridge: Y(a) independent of S given (X, U)",
                "linear effect modification in U with constant moderation strength",
                "linear projections of residual effect and selection on residual U",
                "constant X-adjusted moderator imbalance (untestable)",
            ],
        }
    }
}

/// Baseline estimate widened by a bias bound.
#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityReport {
    pub estimate: TransportEstimate,
    pub bound: BoundKind,
    pub bias_bound: f64,
    /// Point estimate ± bias bound.
    pub envelope_lower: f64,
    pub envelope_upper: f64,
    /// Bootstrap interval widened by the bias bound on each side.
    pub full_lower: f64,
    pub full_upper: f64,
    /// Product threshold on the two partial R²s needed to reverse the sign;
    /// `+∞` when no moderator can do it.
    pub rv_sign_reversal: Option<f64>,
    /// √RV: common value of both partial R²s on the threshold when they are
    /// equal.
    pub rv_equal_strength: Option<f64>,
}

/// One row of the observed-covariate benchmark table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchmarkEntry {
    pub covariate: String,
    pub index: usize,
    pub r2_s_z: f64,
    pub r2_tau_z: f64,
    pub product: f64,
    pub exceeds_rv: bool,
}

/// Untyped table as read from a delimited file: a header and string cells.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RawTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl RawTable {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}

/// Which raw columns play which role.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ColumnRoles {
    /// `None` means every trial column other than treatment and outcome.
    pub covariates: Option<Vec<String>>,
    pub treatment: String,
    pub outcome: String,
}

/// Typed datasets plus how many incomplete rows were discarded.
#[derive(Debug, Clone, PartialEq)]
pub struct Ingested {
    pub trial: TrialDataset,
    pub target: TargetDataset,
    pub dropped_trial_rows: usize,
    pub dropped_target_rows: usize,
}

fn is_missing(cell: &str) -> bool {
    let c = cell.trim();
    c.is_empty()
        || c.eq_ignore_ascii_case("na")
        || c.eq_ignore_ascii_case("n/a")
        || c.eq_ignore_ascii_case("null")
}

fn parse_cell(cell: &str, column: &str, row: usize) -> Result<f64> {
    let v: f64 = cell.trim().parse().map_err(|_| Error::NonNumericValue {
        column: column.to_string(),
        row,
        value: cell.to_string(),
    })?;
    if !v.is_finite() {
        return Err(Error::NonFiniteValue {
            column: column.to_string(),
            row,
        });
    }
    Ok(v)
}

fn locate(table: &RawTable, which: &'static str, names: &[String]) -> Result<Vec<usize>> {
    names
        .iter()
        .map(|n| {
            table.column_index(n).ok_or_else(|| Error::MissingColumn {
                table: which,
                column: n.clone(),
            })
        })
        .collect()
}

/// Rows parsed into numbers, skipping any row with a missing cell among
/// `cols`. Row numbers in errors are 1-based data rows.
fn numeric_rows(table: &RawTable, cols: &[usize], names: &[&str]) -> Result<(Vec<Vec<f64>>, usize)> {
    let mut out = Vec::with_capacity(table.rows.len());
    let mut dropped = 0;
    for (i, row) in table.rows.iter().enumerate() {
        let cells: Vec<&str> = cols
            .iter()
            .map(|&c| row.get(c).map_or("", String::as_str))
            .collect();
        if cells.iter().any(|c| is_missing(c)) {
            dropped += 1;
            continue;
        }
        let parsed = cells
            .iter()
            .zip(names)
            .map(|(c, n)| parse_cell(c, n, i + 1))
            .collect::<Result<Vec<f64>>>()?;
        out.push(parsed);
    }
    Ok((out, dropped))
}

/// Turns raw trial and target tables into validated datasets.
///
/// Rows with a missing value in any used column are dropped and counted.
/// Fails with the offending column and 1-based data row on non-numeric or
/// non-finite cells, a treatment other than 0/1, or an empty arm.
pub fn validate_ingest(
    trial_table: &RawTable,
    target_table: &RawTable,
    roles: &ColumnRoles,
) -> Result<Ingested> {
    let treat_col = trial_table
        .column_index(&roles.treatment)
        .ok_or_else(|| Error::MissingColumn {
            table: "trial",
            column: roles.treatment.clone(),
        })?;
    let out_col = trial_table
        .column_index(&roles.outcome)
        .ok_or_else(|| Error::MissingColumn {
            table: "trial",
            column: roles.outcome.clone(),
        })?;
    let covariates: Vec<String> = match &roles.covariates {
        Some(c) => c.clone(),
        None => trial_table
            .header
            .iter()
            .filter(|h| **h != roles.treatment && **h != roles.outcome)
            .cloned()
            .collect(),
    };
    let trial_cov = locate(trial_table, "trial", &covariates)?;
    let target_cov = locate(target_table, "target", &covariates)?;

    let mut trial_cols = trial_cov.clone();
    trial_cols.push(treat_col);
    trial_cols.push(out_col);
    let mut trial_names: Vec<&str> = covariates.iter().map(String::as_str).collect();
    trial_names.push(&roles.treatment);
    trial_names.push(&roles.outcome);
    let (trial_rows, dropped_trial_rows) = numeric_rows(trial_table, &trial_cols, &trial_names)?;

    let p = covariates.len();
    let mut x = Vec::with_capacity(trial_rows.len() * p);
    let mut a = Vec::with_capacity(trial_rows.len());
    let mut y = Vec::with_capacity(trial_rows.len());
    for (r, row) in trial_rows.iter().enumerate() {
        let t = row[p];
        if t != 0.0 && t != 1.0 {
            return Err(Error::NonBinaryTreatment {
                row: r + 1,
                value: t.to_string(),
            });
        }
        x.extend_from_slice(&row[..p]);
        a.push(t as u8);
        y.push(row[p + 1]);
    }
    let trial = TrialDataset::new(
        Matrix::from_row_major(trial_rows.len(), p, x)?,
        a,
        y,
        covariates.clone(),
    )?;

    let target_names: Vec<&str> = covariates.iter().map(String::as_str).collect();
    let (target_rows, dropped_target_rows) = numeric_rows(target_table, &target_cov, &target_names)?;
    let target = TargetDataset::new(
        Matrix::from_row_major(target_rows.len(), p, target_rows.into_iter().flatten().collect())?,
        covariates,
    )?;

    Ok(Ingested {
        trial,
        target,
        dropped_trial_rows,
        dropped_target_rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(header: &[&str], rows: &[&[&str]]) -> RawTable {
        RawTable {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: rows
                .iter()
                .map(|r| r.iter().map(|s| s.to_string()).collect())
                .collect(),
        }
    }

    fn roles() -> ColumnRoles {
        ColumnRoles {
            covariates: None,
            treatment: "a".into(),
            outcome: "y".into(),
        }
    }

    fn target() -> RawTable {
        table(&["x1", "x2"], &[&["0.1", "0.2"], &["1", "2"]])
    }

    #[test]
    fn minimal_trial_is_accepted() {
        let trial = table(
            &["x1", "x2", "a", "y"],
            &[
                &["0", "1", "0", "1.5"],
                &["1", "0", "1", "2"],
                &["2", "2", "1", "3"],
            ],
        );
        let ing = validate_ingest(&trial, &target(), &roles()).unwrap();
        assert_eq!(ing.trial.n(), 3);
        assert_eq!(ing.trial.p(), 2);
        assert_eq!(ing.trial.treatment(), &[0, 1, 1]);
        assert_eq!(ing.target.n(), 2);
    }

    #[test]
    fn non_binary_treatment() {
        let trial = table(
            &["x1", "x2", "a", "y"],
            &[&["0", "1", "0", "1"], &["1", "0", "2", "2"]],
        );
        assert!(matches!(
            validate_ingest(&trial, &target(), &roles()),
            Err(Error::NonBinaryTreatment { row: 2, .. })
        ));
    }

    #[test]
    fn single_arm_is_rejected() {
        let trial = table(
            &["x1", "x2", "a", "y"],
            &[&["0", "1", "1", "1"], &["1", "0", "1", "2"]],
        );
        assert!(matches!(
            validate_ingest(&trial, &target(), &roles()),
            Err(Error::EmptyArm { arm: 0, .. })
        ));
    }

    #[test]
    fn missing_rows_are_dropped_and_counted() {
        let trial = table(
            &["x1", "x2", "a", "y"],
            &[
                &["0", "1", "0", "1"],
                &["", "0", "1", "2"],
                &["1", "1", "1", "NA"],
                &["2", "0", "1", "2"],
            ],
        );
        let ing = validate_ingest(&trial, &target(), &roles()).unwrap();
        assert_eq!(ing.dropped_trial_rows, 2);
        assert_eq!(ing.trial.n(), 2);
    }

    #[test]
    fn bad_cells_name_column_and_row() {
        let trial = table(
            &["x1", "x2", "a", "y"],
            &[&["0", "1", "0", "1"], &["1", "inf", "1", "2"]],
        );
        assert_eq!(
            validate_ingest(&trial, &target(), &roles()).unwrap_err(),
            Error::NonFiniteValue {
                column: "x2".into(),
                row: 2
            }
        );
        let missing = ColumnRoles {
            outcome: "outcome".into(),
            ..roles()
        };
        assert!(matches!(
            validate_ingest(&trial, &target(), &missing),
            Err(Error::MissingColumn { table: "trial", .. })
        ));
        let narrow = table(&["x1"], &[&["0"]]);
        let trial_ok = table(
            &["x1", "x2", "a", "y"],
            &[&["0", "1", "0", "1"], &["1", "1", "1", "2"]],
        );
        assert!(matches!(
            validate_ingest(&trial_ok, &narrow, &roles()),
            Err(Error::MissingColumn { table: "target", .. })
        ));
    }

    fn dataset(n_trial: usize, n_target: usize, names: &[&str]) -> (TrialDataset, TargetDataset) {
        let p = names.len();
        let names: Vec<String> = names.iter().map(|s| s.to_string()).collect();
        let trial = TrialDataset::new(
            Matrix::zeros(n_trial, p),
            (0..n_trial).map(|i| (i % 2) as u8).collect(),
            vec![0.0; n_trial],
            names.clone(),
        )
        .unwrap();
        let target = TargetDataset::new(Matrix::zeros(n_target, p), names).unwrap();
        (trial, target)
    }

    #[test]
    fn pooling_counts_and_selection_variance() {
        let (trial, target) = dataset(2000, 5000, &["x"]);
        let pooled = pool(&trial, &target).unwrap();
        assert_eq!(pooled.n(), 7000);
        assert!((pooled.pi() - 2.0 / 7.0).abs() < 1e-15);
        assert!((pooled.var_s() - 10.0 / 49.0).abs() < 1e-15);
        // π(1 − π) equals the empirical (population) variance of S
        let s = pooled.selection_f64();
        let m = s.iter().sum::<f64>() / 7000.0;
        let v = s.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / 7000.0;
        assert!((v - pooled.var_s()).abs() < 1e-12);

        let (trial, target) = dataset(40, 40, &["x"]);
        assert_eq!(pool(&trial, &target).unwrap().var_s(), 0.25);
    }

    #[test]
    fn pooling_rejects_schema_mismatch() {
        let (trial, _) = dataset(4, 4, &["x", "z"]);
        let (_, target) = dataset(4, 4, &["x", "w"]);
        assert!(matches!(pool(&trial, &target), Err(Error::SchemaMismatch { .. })));
    }

    #[test]
    fn param_validation() {
        assert!(SensitivityParamsRaw::new(-1.0, 0.0).is_err());
        assert!(SensitivityParamsR2::new(0.1, 0.1, 1.0, 0.25, 1.0).is_err());
        assert!(SensitivityParamsR2::new(0.1, 1.1, 1.0, 0.25, 0.0).is_err());
        assert!(SensitivityParamsR2::new(0.1, 0.1, 1.0, 0.0, 0.0).is_err());
        assert!(SensitivityParamsR2::new(0.1, 0.1, 1.0, 0.25, 0.0).is_ok());
    }
}
