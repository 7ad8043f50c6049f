//! Observation tables keyed by (unit, year).
//!
//! A table holds named numeric columns with missing entries allowed; rows are
//! identified by a unit string (zone id or province name) and a year. The
//! operations here derive the insurance indicators, apply log transforms,
//! and produce summary-statistics and correlation reports.

use std::collections::HashMap;
use std::io::Read;

use indexmap::IndexMap;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum PanelError {
    #[error("panel CSV: {0}")]
    Csv(String),
    #[error("duplicate row ({unit}, {year})")]
    DuplicateKey { unit: String, year: i32 },
    #[error("unknown column {0:?}")]
    UnknownColumn(String),
    #[error("vectors have different lengths")]
    LengthMismatch,
    #[error("need at least two paired observations")]
    TooFewObservations,
    #[error("zero variance makes the correlation undefined")]
    DegenerateVariance,
    #[error("need at least two variables")]
    TooFewVariables,
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
}

/// Panel of (unit, year) rows by named numeric columns.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ObservationTable {
    keys: Vec<(String, i32)>,
    index: HashMap<(String, i32), usize>,
    columns: IndexMap<String, Vec<Option<f64>>>,
}

impl ObservationTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn n_rows(&self) -> usize {
        self.keys.len()
    }

    pub fn keys(&self) -> &[(String, i32)] {
        &self.keys
    }

    pub fn column_names(&self) -> impl Iterator<Item = &str> {
        self.columns.keys().map(String::as_str)
    }

    pub fn column(&self, name: &str) -> Option<&[Option<f64>]> {
        self.columns.get(name).map(Vec::as_slice)
    }

    pub fn row_of(&self, unit: &str, year: i32) -> Option<usize> {
        self.index.get(&(unit.to_string(), year)).copied()
    }

    /// Append a row; `(unit, year)` pairs must be unique.
    pub fn push_row(&mut self, unit: impl Into<String>, year: i32) -> Result<usize, PanelError> {
        let unit = unit.into();
        let key = (unit.clone(), year);
        if self.index.contains_key(&key) {
            return Err(PanelError::DuplicateKey { unit, year });
        }
        let row = self.keys.len();
        self.keys.push(key.clone());
        self.index.insert(key, row);
        for col in self.columns.values_mut() {
            col.push(None);
        }
        Ok(row)
    }

    /// Add the column if missing; existing rows get missing entries.
    pub fn ensure_column(&mut self, name: &str) {
        if !self.columns.contains_key(name) {
            self.columns
                .insert(name.to_string(), vec![None; self.keys.len()]);
        }
    }

    pub fn set(&mut self, row: usize, column: &str, value: Option<f64>) {
        self.ensure_column(column);
        self.columns.get_mut(column).unwrap()[row] = value;
    }

    pub fn get(&self, row: usize, column: &str) -> Option<f64> {
        self.columns.get(column).and_then(|c| c[row])
    }

    /// Row indices where every named column has a value.
    pub fn complete_rows(&self, columns: &[&str]) -> Result<Vec<usize>, PanelError> {
        let cols: Vec<&[Option<f64>]> = columns
            .iter()
            .map(|&name| {
                self.column(name)
                    .ok_or_else(|| PanelError::UnknownColumn(name.to_string()))
            })
            .collect::<Result<_, _>>()?;
        Ok((0..self.n_rows())
            .filter(|&r| cols.iter().all(|c| c[r].is_some()))
            .collect())
    }

    /// Parse from CSV with header `unit,year,<var1>,...`; empty fields are missing.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self, PanelError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(reader);
        let headers = rdr
            .headers()
            .map_err(|e| PanelError::Csv(e.to_string()))?
            .clone();
        let names: Vec<String> = headers.iter().map(str::to_string).collect();
        if names.len() < 2 || names[0] != "unit" || names[1] != "year" {
            return Err(PanelError::Csv(format!(
                "expected header unit,year,..., got {}",
                names.join(",")
            )));
        }
        let mut table = ObservationTable::new();
        for name in &names[2..] {
            table.ensure_column(name);
        }
        for (i, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| PanelError::Csv(e.to_string()))?;
            let line = i + 2;
            let unit = record
                .get(0)
                .ok_or_else(|| PanelError::Csv(format!("row {line}: missing unit")))?;
            let year: i32 = record
                .get(1)
                .unwrap_or("")
                .parse()
                .map_err(|_| PanelError::Csv(format!("row {line}: bad year")))?;
            let row = table.push_row(unit, year)?;
            for (j, name) in names[2..].iter().enumerate() {
                let field = record.get(j + 2).unwrap_or("");
                if field.is_empty() {
                    continue;
                }
                let v: f64 = field.parse().map_err(|_| {
                    PanelError::Csv(format!("row {line}: bad value {field:?} for {name}"))
                })?;
                table.set(row, name, Some(v));
            }
        }
        Ok(table)
    }

    /// Serialize to CSV; values keep full round-trip precision.
    pub fn to_csv(&self) -> String {
        let mut wtr = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["unit".to_string(), "year".to_string()];
        header.extend(self.columns.keys().cloned());
        wtr.write_record(&header).unwrap();
        for (row, (unit, year)) in self.keys.iter().enumerate() {
            let mut record = vec![unit.clone(), year.to_string()];
            for col in self.columns.values() {
                record.push(col[row].map(|v| v.to_string()).unwrap_or_default());
            }
            wtr.write_record(&record).unwrap();
        }
        String::from_utf8(wtr.into_inner().unwrap()).unwrap()
    }

    /// Sum `columns` into a new table whose units come from `map_unit`
    /// (e.g. zone id → province). Rows missing a mapping are skipped; output
    /// rows are sorted by (unit, year).
    pub fn aggregate_sum(
        &self,
        map_unit: impl Fn(&str) -> Option<String>,
        columns: &[&str],
    ) -> Result<ObservationTable, PanelError> {
        for &name in columns {
            if self.column(name).is_none() {
                return Err(PanelError::UnknownColumn(name.to_string()));
            }
        }
        let mut sums: HashMap<(String, i32), Vec<Option<f64>>> = HashMap::new();
        for (row, (unit, year)) in self.keys.iter().enumerate() {
            let Some(target) = map_unit(unit) else {
                continue;
            };
            let entry = sums
                .entry((target, *year))
                .or_insert_with(|| vec![None; columns.len()]);
            for (j, &name) in columns.iter().enumerate() {
                if let Some(v) = self.get(row, name) {
                    *entry[j].get_or_insert(0.0) += v;
                }
            }
        }
        let mut keys: Vec<(String, i32)> = sums.keys().cloned().collect();
        keys.sort();
        let mut out = ObservationTable::new();
        for &name in columns {
            out.ensure_column(name);
        }
        for key in keys {
            let values = sums[&key].clone();
            let row = out.push_row(key.0, key.1)?;
            for (j, &name) in columns.iter().enumerate() {
                out.set(row, name, values[j]);
            }
        }
        Ok(out)
    }
}

/// Which population total divides premiums when deriving premium density.
/// The source material defines it both ways, so callers must choose.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DensityDenominator {
    InsuredPopulation,
    TotalPopulation,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct DeriveDiagnostics {
    /// Rows where a derivation hit a zero or negative denominator.
    pub zero_denominator: usize,
}

/// Derive the indicator columns:
/// `premium_density = insurance_premiums / <denominator>`,
/// `insured_density = insured_population / total_population`,
/// `insurance_presence = 1 if insurance_count > 0 else 0`.
///
/// Rows whose inputs are missing keep their existing entries; zero
/// denominators leave the result missing and are tallied. Applying the
/// derivation twice changes nothing.
pub fn derive_indicators(
    t: &ObservationTable,
    denominator: DensityDenominator,
) -> (ObservationTable, DeriveDiagnostics) {
    let mut out = t.clone();
    let mut diag = DeriveDiagnostics::default();
    out.ensure_column("premium_density");
    out.ensure_column("insured_density");
    out.ensure_column("insurance_presence");

    let denom_col = match denominator {
        DensityDenominator::InsuredPopulation => "insured_population",
        DensityDenominator::TotalPopulation => "total_population",
    };

    for row in 0..out.n_rows() {
        if let (Some(premiums), Some(denom)) = (out.get(row, "insurance_premiums"), out.get(row, denom_col)) {
            if denom > 0.0 {
                out.set(row, "premium_density", Some(premiums / denom));
            } else {
                out.set(row, "premium_density", None);
                diag.zero_denominator += 1;
            }
        }
        if let (Some(insured), Some(total)) = (
            out.get(row, "insured_population"),
            out.get(row, "total_population"),
        ) {
            if total > 0.0 {
                out.set(row, "insured_density", Some(insured / total));
            } else {
                out.set(row, "insured_density", None);
                diag.zero_denominator += 1;
            }
        }
        if let Some(count) = out.get(row, "insurance_count") {
            let presence = if count > 0.0 { 1.0 } else { 0.0 };
            out.set(row, "insurance_presence", Some(presence));
        }
    }
    (out, diag)
}

/// Policy for log-transforming columns that may contain non-positive values.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LogPolicy {
    /// Non-positive entries become missing (tallied).
    DropNonPositive,
    /// ln(v + ε) with ε > 0; entries still non-positive after the offset
    /// become missing (tallied).
    Offset(f64),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct LogDiagnostics {
    /// Entries dropped because they were non-positive under the policy.
    pub dropped: usize,
}

/// Replace the named columns by their natural logs under `policy`.
pub fn log_transform(
    t: &ObservationTable,
    vars: &[&str],
    policy: LogPolicy,
) -> Result<(ObservationTable, LogDiagnostics), PanelError> {
    if let LogPolicy::Offset(eps) = policy {
        if !(eps > 0.0) {
            return Err(PanelError::InvalidPolicy(format!(
                "offset must be positive, got {eps}"
            )));
        }
    }
    let mut out = t.clone();
    let mut diag = LogDiagnostics::default();
    for &name in vars {
        if out.column(name).is_none() {
            return Err(PanelError::UnknownColumn(name.to_string()));
        }
        for row in 0..out.n_rows() {
            let Some(v) = out.get(row, name) else {
                continue;
            };
            let shifted = match policy {
                LogPolicy::DropNonPositive => v,
                LogPolicy::Offset(eps) => v + eps,
            };
            if shifted > 0.0 {
                out.set(row, name, Some(shifted.ln()));
            } else {
                out.set(row, name, None);
                diag.dropped += 1;
            }
        }
    }
    Ok((out, diag))
}

/// Per-variable summary block (min/max/mean/std/n).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VariableSummary {
    pub name: String,
    pub n: usize,
    pub min: Option<f64>,
    pub max: Option<f64>,
    pub mean: Option<f64>,
    /// Sample standard deviation (n−1); zero for a single observation.
    pub std_deviation: Option<f64>,
    /// True when n == 1, where the zero std is a convention.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryReport {
    pub variables: Vec<VariableSummary>,
}

/// Summarize every column over its non-missing entries.
pub fn summarize(t: &ObservationTable) -> SummaryReport {
    let variables = t
        .columns
        .iter()
        .map(|(name, col)| {
            let values: Vec<f64> = col.iter().flatten().copied().collect();
            let n = values.len();
            if n == 0 {
                return VariableSummary {
                    name: name.clone(),
                    n,
                    min: None,
                    max: None,
                    mean: None,
                    std_deviation: None,
                    degenerate: false,
                };
            }
            let min = values.iter().copied().fold(f64::INFINITY, f64::min);
            let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mean = values.iter().sum::<f64>() / n as f64;
            let std = if n == 1 {
                0.0
            } else {
                let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
                (ss / (n as f64 - 1.0)).sqrt()
            };
            VariableSummary {
                name: name.clone(),
                n,
                min: Some(min),
                max: Some(max),
                mean: Some(mean),
                std_deviation: Some(std),
                degenerate: n == 1,
            }
        })
        .collect();
    SummaryReport { variables }
}

/// Sample Pearson correlation of two equal-length, complete vectors.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, PanelError> {
    if x.len() != y.len() {
        return Err(PanelError::LengthMismatch);
    }
    let n = x.len();
    if n < 2 {
        return Err(PanelError::TooFewObservations);
    }
    let nf = n as f64;
    let mean_x = x.iter().sum::<f64>() / nf;
    let mean_y = y.iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for i in 0..n {
        let dx = x[i] - mean_x;
        let dy = y[i] - mean_y;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(PanelError::DegenerateVariance);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Symmetric Pearson matrix with a unit diagonal.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationMatrix {
    pub variables: Vec<String>,
    /// `cells[i][j]`; `None` marks a degenerate or data-starved pair.
    pub cells: Vec<Vec<Option<f64>>>,
    /// Pairs (including diagonal entries) that could not be computed.
    pub degenerate_pairs: usize,
}

impl CorrelationMatrix {
    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.cells[i][j]
    }
}

/// Pairwise-complete Pearson for every pair of the named columns.
///
/// Each pair is computed once and mirrored, so the matrix is symmetric
/// bit-for-bit. Degenerate pairs become missing cells and are tallied.
pub fn correlation_matrix(
    t: &ObservationTable,
    vars: &[&str],
) -> Result<CorrelationMatrix, PanelError> {
    if vars.len() < 2 {
        return Err(PanelError::TooFewVariables);
    }
    let cols: Vec<&[Option<f64>]> = vars
        .iter()
        .map(|&name| {
            t.column(name)
                .ok_or_else(|| PanelError::UnknownColumn(name.to_string()))
        })
        .collect::<Result<_, _>>()?;

    let m = vars.len();
    let mut cells = vec![vec![None; m]; m];
    let mut degenerate = 0;

    for i in 0..m {
        // Diagonal: 1 only when the variable has spread.
        let values: Vec<f64> = cols[i].iter().flatten().copied().collect();
        let has_variance = values.len() >= 2 && {
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            values.iter().any(|v| *v != mean)
        };
        if has_variance {
            cells[i][i] = Some(1.0);
        } else {
            degenerate += 1;
        }
        for j in (i + 1)..m {
            let mut xs = Vec::new();
            let mut ys = Vec::new();
            for row in 0..t.n_rows() {
                if let (Some(a), Some(b)) = (cols[i][row], cols[j][row]) {
                    xs.push(a);
                    ys.push(b);
                }
            }
            match pearson(&xs, &ys) {
                Ok(r) => {
                    cells[i][j] = Some(r);
                    cells[j][i] = Some(r);
                }
                Err(
                    PanelError::DegenerateVariance | PanelError::TooFewObservations,
                ) => degenerate += 1,
                Err(e) => return Err(e),
            }
        }
    }

    Ok(CorrelationMatrix {
        variables: vars.iter().map(|s| s.to_string()).collect(),
        cells,
        degenerate_pairs: degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn table_with(column: &str, values: &[f64]) -> ObservationTable {
        let mut t = ObservationTable::new();
        for (i, &v) in values.iter().enumerate() {
            let row = t.push_row(format!("u{i}"), 2000).unwrap();
            t.set(row, column, Some(v));
        }
        t
    }

    #[test]
    fn duplicate_keys_rejected() {
        let mut t = ObservationTable::new();
        t.push_row("a", 2000).unwrap();
        assert_eq!(
            t.push_row("a", 2000),
            Err(PanelError::DuplicateKey {
                unit: "a".to_string(),
                year: 2000
            })
        );
        assert!(t.push_row("a", 2001).is_ok());
    }

    #[test]
    fn derive_ratios() {
        let mut t = ObservationTable::new();
        let r = t.push_row("z0", 2000).unwrap();
        t.set(r, "insurance_premiums", Some(500.0));
        t.set(r, "insured_population", Some(100.0));
        t.set(r, "total_population", Some(2000.0));
        t.set(r, "insurance_count", Some(3.0));
        let r1 = t.push_row("z1", 2000).unwrap();
        t.set(r1, "insurance_premiums", Some(10.0));
        t.set(r1, "insured_population", Some(0.0));
        t.set(r1, "insurance_count", Some(0.0));

        let (d, diag) = derive_indicators(&t, DensityDenominator::InsuredPopulation);
        assert_eq!(d.get(0, "premium_density"), Some(5.0));
        assert_relative_eq!(d.get(0, "insured_density").unwrap(), 0.05);
        assert_eq!(d.get(0, "insurance_presence"), Some(1.0));
        assert_eq!(d.get(1, "premium_density"), None);
        assert_eq!(d.get(1, "insurance_presence"), Some(0.0));
        assert_eq!(diag.zero_denominator, 1);

        // Total-population variant uses the other denominator.
        let (d2, _) = derive_indicators(&t, DensityDenominator::TotalPopulation);
        assert_eq!(d2.get(0, "premium_density"), Some(0.25));
    }

    #[test]
    fn derive_is_idempotent() {
        let mut t = ObservationTable::new();
        let r = t.push_row("z0", 2000).unwrap();
        t.set(r, "insurance_premiums", Some(42.0));
        t.set(r, "insured_population", Some(6.0));
        let (once, _) = derive_indicators(&t, DensityDenominator::InsuredPopulation);
        let (twice, _) = derive_indicators(&once, DensityDenominator::InsuredPopulation);
        assert_eq!(once, twice);
    }

    #[test]
    fn log_policies() {
        let t = table_with("v", &[std::f64::consts::E, 0.0]);
        let (dropped, diag) = log_transform(&t, &["v"], LogPolicy::DropNonPositive).unwrap();
        assert_relative_eq!(dropped.get(0, "v").unwrap(), 1.0);
        assert_eq!(dropped.get(1, "v"), None);
        assert_eq!(diag.dropped, 1);

        let (offset, diag) = log_transform(&t, &["v"], LogPolicy::Offset(1.0)).unwrap();
        assert_eq!(offset.get(1, "v"), Some(0.0));
        assert_eq!(diag.dropped, 0);

        assert!(log_transform(&t, &["v"], LogPolicy::Offset(0.0)).is_err());
        assert!(matches!(
            log_transform(&t, &["w"], LogPolicy::DropNonPositive),
            Err(PanelError::UnknownColumn(_))
        ));
    }

    #[test]
    fn summary_basics() {
        let t = table_with("v", &[1.0, 2.0, 3.0]);
        let report = summarize(&t);
        let v = &report.variables[0];
        assert_eq!(v.n, 3);
        assert_eq!(v.min, Some(1.0));
        assert_eq!(v.max, Some(3.0));
        assert_eq!(v.mean, Some(2.0));
        assert_relative_eq!(v.std_deviation.unwrap(), 1.0);
    }

    #[test]
    fn summary_degenerate_cases() {
        let single = table_with("v", &[5.0]);
        let v = &summarize(&single).variables[0];
        assert_eq!((v.min, v.max, v.mean), (Some(5.0), Some(5.0), Some(5.0)));
        assert_eq!(v.std_deviation, Some(0.0));
        assert!(v.degenerate);

        let mut empty = ObservationTable::new();
        empty.push_row("a", 2000).unwrap();
        empty.ensure_column("v");
        let v = &summarize(&empty).variables[0];
        assert_eq!(v.n, 0);
        assert_eq!(v.mean, None);
    }

    #[test]
    fn pearson_known_values() {
        assert_eq!(pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert_eq!(pearson(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), -1.0);
        // Frozen from the hand-evaluated formula: r = 3/sqrt(2*14/3)... = 0.981980506...
        assert_relative_eq!(
            pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0]).unwrap(),
            0.9819805060619659,
            epsilon = 1e-12
        );
    }

    #[test]
    fn pearson_errors() {
        assert_eq!(
            pearson(&[1.0], &[1.0]),
            Err(PanelError::TooFewObservations)
        );
        assert_eq!(
            pearson(&[1.0, 1.0], &[1.0, 2.0]),
            Err(PanelError::DegenerateVariance)
        );
        assert_eq!(pearson(&[1.0, 2.0], &[1.0]), Err(PanelError::LengthMismatch));
    }

    #[test]
    fn matrix_self_and_negated() {
        let mut t = ObservationTable::new();
        for (i, v) in [1.0, 2.0, 5.0].iter().enumerate() {
            let row = t.push_row(format!("u{i}"), 2000).unwrap();
            t.set(row, "a", Some(*v));
            t.set(row, "b", Some(*v));
            t.set(row, "neg", Some(-v));
        }
        let m = correlation_matrix(&t, &["a", "b", "neg"]).unwrap();
        assert_eq!(m.get(0, 0), Some(1.0));
        assert_eq!(m.get(0, 1), Some(1.0));
        assert_eq!(m.get(0, 2), Some(-1.0));
        assert_eq!(m.get(2, 0), Some(-1.0));
    }

    #[test]
    fn matrix_flags_degenerate_column() {
        let mut t = ObservationTable::new();
        for i in 0..3 {
            let row = t.push_row(format!("u{i}"), 2000).unwrap();
            t.set(row, "a", Some(i as f64));
            t.set(row, "flat", Some(7.0));
        }
        let m = correlation_matrix(&t, &["a", "flat"]).unwrap();
        assert_eq!(m.get(0, 0), Some(1.0));
        assert_eq!(m.get(1, 1), None);
        assert_eq!(m.get(0, 1), None);
        assert_eq!(m.degenerate_pairs, 2);
    }

    #[test]
    fn csv_roundtrip_preserves_missing() {
        let mut t = ObservationTable::new();
        let r0 = t.push_row("gauteng", 2000).unwrap();
        t.set(r0, "gdp", Some(1.25));
        t.set(r0, "radiance_light", Some(0.1 + 0.2)); // awkward binary value
        let r1 = t.push_row("limpopo", 2001).unwrap();
        t.set(r1, "gdp", None);
        t.set(r1, "radiance_light", Some(3.0));

        let text = t.to_csv();
        let back = ObservationTable::from_csv(text.as_bytes()).unwrap();
        assert_eq!(t, back);
    }

    #[test]
    fn aggregate_sums_by_mapped_unit() {
        let mut t = ObservationTable::new();
        for (unit, year, v) in [("z0", 2000, 1.0), ("z1", 2000, 2.0), ("z2", 2000, 4.0)] {
            let row = t.push_row(unit, year).unwrap();
            t.set(row, "gdp", Some(v));
        }
        let map = |u: &str| -> Option<String> {
            Some(if u == "z2" { "east" } else { "west" }.to_string())
        };
        let agg = t.aggregate_sum(map, &["gdp"]).unwrap();
        assert_eq!(agg.n_rows(), 2);
        assert_eq!(agg.get(agg.row_of("west", 2000).unwrap(), "gdp"), Some(3.0));
        assert_eq!(agg.get(agg.row_of("east", 2000).unwrap(), "gdp"), Some(4.0));
    }
}
