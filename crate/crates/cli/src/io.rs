//! Table input, one-hot expansion, and deterministic CSV/JSON output.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::Value;
use trialgen_core::{Error, RawTable};

use crate::error::CliError;

pub fn read_table(path: &Path) -> Result<RawTable, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::csv(path, e))?;
    let header: Vec<String> = reader
        .headers()
        .map_err(|e| CliError::csv(path, e))?
        .iter()
        .map(str::to_string)
        .collect();
    if header.is_empty() || header.iter().all(String::is_empty) {
        return Err(CliError::Core(Error::InvalidInput(format!(
            "{} has no header row",
            path.display()
        ))));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::csv(path, e))?;
        rows.push(record.iter().map(str::to_string).collect());
    }
    Ok(RawTable { header, rows })
}

fn is_missing(cell: &str) -> bool {
    let c = cell.trim();
    c.is_empty() || ["na", "n/a", "null"].iter().any(|m| c.eq_ignore_ascii_case(m))
}

/// Replaces categorical column `name` in both tables by 0/1 indicators,
/// one per level except the first in sorted order. Levels are pooled over
/// both tables so the two schemas agree. Missing cells stay missing.
pub fn one_hot(trial: &mut RawTable, target: &mut RawTable, name: &str) -> Result<Vec<String>, CliError> {
    let missing = |table: &'static str| {
        CliError::Core(Error::MissingColumn {
            table,
            column: name.to_string(),
        })
    };
    let ti = trial.column_index(name).ok_or_else(|| missing("trial"))?;
    let oi = target.column_index(name).ok_or_else(|| missing("target"))?;
    let levels: BTreeSet<String> = trial
        .rows
        .iter()
        .filter_map(|r| r.get(ti))
        .chain(target.rows.iter().filter_map(|r| r.get(oi)))
        .filter(|c| !is_missing(c))
        .map(|c| c.trim().to_string())
        .collect();
    let kept: Vec<String> = levels.into_iter().skip(1).collect();
    let new_names: Vec<String> = kept.iter().map(|l| format!("{name}={l}")).collect();
    for (table, idx) in [(trial, ti), (target, oi)] {
        table.header.splice(idx..=idx, new_names.iter().cloned());
        for row in &mut table.rows {
            let cell = row.get(idx).cloned().unwrap_or_default();
            let expanded: Vec<String> = kept
                .iter()
                .map(|l| {
                    if is_missing(&cell) {
                        String::new()
                    } else if cell.trim() == l {
                        "1".to_string()
                    } else {
                        "0".to_string()
                    }
                })
                .collect();
            if idx < row.len() {
                row.splice(idx..=idx, expanded);
            }
        }
    }
    Ok(new_names)
}

/// `%.12g`-style rendering: 12 significant digits, trailing zeros removed,
/// exponent form outside [1e-4, 1e12). Infinities render as `inf`.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    const DIGITS: i32 = 12;
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..DIGITS).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (DIGITS - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// JSON number, or the string `inf`/`-inf`/`nan` where JSON has no number.
pub fn json_num(x: f64) -> Value {
    serde_json::Number::from_f64(x).map_or_else(|| Value::String(fmt_num(x)), Value::Number)
}

pub fn json_opt(x: Option<f64>) -> Value {
    x.map_or(Value::Null, json_num)
}

pub struct CsvOut {
    path: PathBuf,
    writer: csv::Writer<Vec<u8>>,
}

impl CsvOut {
    pub fn new(path: PathBuf, header: &[&str]) -> Result<Self, CliError> {
        let mut writer = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        writer.write_record(header).map_err(|e| CliError::csv(&path, e))?;
        Ok(Self { path, writer })
    }

    pub fn row<I, S>(&mut self, cells: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer
            .write_record(cells)
            .map_err(|e| CliError::csv(&self.path, e))
    }

    pub fn finish(self) -> Result<PathBuf, CliError> {
        let bytes = self.writer.into_inner().map_err(|e| CliError::Io {
            path: self.path.clone(),
            source: e.into_error(),
        })?;
        write_bytes(&self.path, &bytes)?;
        Ok(self.path)
    }
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_json(path: &Path, value: &Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("JSON values serialize");
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })
}
