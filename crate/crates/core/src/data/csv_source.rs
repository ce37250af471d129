use std::collections::BTreeSet;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};

const IRIS_CSV: &str = include_str!("../../data/iris.csv");
const BREAST_CANCER_CSV: &str = include_str!("../../data/breast_cancer.csv");

/// Column layout of an input CSV.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub label_column: String,
    /// Columns to integer-encode by sorted category name. `None` infers:
    /// any column with a non-numeric value is nominal.
    pub nominal_columns: Option<Vec<String>>,
}

impl CsvSchema {
    pub fn with_label(label_column: impl Into<String>) -> Self {
        Self {
            label_column: label_column.into(),
            nominal_columns: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestionReport {
    pub rows_read: usize,
    pub rows_dropped_missing: usize,
    pub nominal_columns: Vec<String>,
}

fn is_missing(value: &str) -> bool {
    let v = value.trim();
    v.is_empty() || v == "?"
}

/// Reads a dataset from a CSV file with a header row.
pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<(Dataset, IngestionReport)> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "csv".into());
    parse_csv(file, &name, schema)
}

pub fn parse_csv<R: Read>(
    reader: R,
    name: &str,
    schema: &CsvSchema,
) -> Result<(Dataset, IngestionReport)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::Ingestion {
            line: 1,
            message: e.to_string(),
        })?
        .iter()
        .map(str::to_string)
        .collect();
    let label_idx = headers
        .iter()
        .position(|h| *h == schema.label_column)
        .ok_or_else(|| Error::Ingestion {
            line: 1,
            message: format!("label column '{}' not in header", schema.label_column),
        })?;
    if let Some(nominal) = &schema.nominal_columns {
        if let Some(missing) = nominal.iter().find(|c| !headers.contains(c)) {
            return Err(Error::Ingestion {
                line: 1,
                message: format!("nominal column '{missing}' not in header"),
            });
        }
    }

    let mut report = IngestionReport::default();
    let mut rows: Vec<(usize, Vec<String>)> = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| Error::Ingestion {
            line: e.position().map_or(0, |p| p.line() as usize),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() == 1 && record.get(0).is_some_and(str::is_empty) {
            continue;
        }
        report.rows_read += 1;
        if record.len() != headers.len() {
            return Err(Error::Ingestion {
                line,
                message: format!("expected {} fields, found {}", headers.len(), record.len()),
            });
        }
        if record.iter().any(is_missing) {
            report.rows_dropped_missing += 1;
            continue;
        }
        rows.push((line, record.iter().map(str::to_string).collect()));
    }
    if rows.is_empty() {
        return Err(Error::Dataset(format!("'{name}' has no complete rows")));
    }

    let feature_cols: Vec<usize> = (0..headers.len()).filter(|&j| j != label_idx).collect();
    let nominal: Vec<bool> = feature_cols
        .iter()
        .map(|&j| match &schema.nominal_columns {
            Some(list) => list.contains(&headers[j]),
            None => rows.iter().any(|(_, r)| r[j].parse::<f64>().is_err()),
        })
        .collect();
    let codebooks: Vec<Vec<String>> = feature_cols
        .iter()
        .zip(&nominal)
        .map(|(&j, &is_nominal)| {
            if is_nominal {
                let set: BTreeSet<&str> = rows.iter().map(|(_, r)| r[j].as_str()).collect();
                set.into_iter().map(str::to_string).collect()
            } else {
                Vec::new()
            }
        })
        .collect();

    let mut features = Vec::with_capacity(rows.len());
    for (line, row) in &rows {
        let mut values = Vec::with_capacity(feature_cols.len());
        for (k, &j) in feature_cols.iter().enumerate() {
            let raw = &row[j];
            let v = if nominal[k] {
                codebooks[k].iter().position(|c| c == raw).unwrap_or_default() as f64
            } else {
                raw.parse::<f64>().map_err(|_| Error::Ingestion {
                    line: *line,
                    message: format!("column '{}' value '{raw}' is not numeric", headers[j]),
                })?
            };
            if !v.is_finite() {
                return Err(Error::Ingestion {
                    line: *line,
                    message: format!("column '{}' value '{raw}' is not finite", headers[j]),
                });
            }
            values.push(v);
        }
        features.push(values);
    }

    let class_names = label_codebook(rows.iter().map(|(_, r)| r[label_idx].as_str()));
    let labels = rows
        .iter()
        .map(|(_, r)| {
            class_names
                .iter()
                .position(|c| *c == r[label_idx])
                .unwrap_or_default()
        })
        .collect();

    report.nominal_columns = feature_cols
        .iter()
        .zip(&nominal)
        .filter(|(_, n)| **n)
        .map(|(&j, _)| headers[j].clone())
        .collect();
    let feature_names = feature_cols.iter().map(|&j| headers[j].clone()).collect();
    let ds = Dataset::new(name, feature_names, features, labels, class_names)?;
    Ok((ds, report))
}

/// Distinct labels, numerically sorted when every label is an integer.
fn label_codebook<'a>(values: impl Iterator<Item = &'a str>) -> Vec<String> {
    let distinct: BTreeSet<&str> = values.collect();
    let mut names: Vec<String> = distinct.into_iter().map(str::to_string).collect();
    if names.iter().all(|n| n.parse::<i64>().is_ok()) {
        names.sort_by_key(|n| n.parse::<i64>().unwrap_or_default());
    }
    names
}

/// The bundled Iris table: 150 samples, 4 numeric features, 3 species.
pub fn iris() -> Result<(Dataset, IngestionReport)> {
    parse_csv(IRIS_CSV.as_bytes(), "iris", &CsvSchema::with_label("species"))
}

/// The bundled breast-cancer recurrence table: 286 rows, 9 attributes, 2 classes.
pub fn breast_cancer() -> Result<(Dataset, IngestionReport)> {
    parse_csv(
        BREAST_CANCER_CSV.as_bytes(),
        "breast_cancer",
        &CsvSchema::with_label("class"),
    )
}
