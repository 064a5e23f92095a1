//! Report rows, auxiliary tables and their on-disk form.

use std::path::Path;

use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{LabError, LabResult};

pub const RESULTS_FILE: &str = "results.csv";
pub const SUMMARY_FILE: &str = "summary.json";

/// One metric value. Column order is fixed by field order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportRow {
    pub recipe: String,
    /// Flattened `key=value` pairs joined by `;`.
    pub params: String,
    pub metric: String,
    pub value: f64,
    pub n: Option<u64>,
    pub epoch: Option<usize>,
}

pub const RESULT_COLUMNS: [&str; 6] = ["recipe", "params", "metric", "value", "n", "epoch"];

/// Flatten `key=value` pairs.
pub fn params(pairs: &[(&str, String)]) -> String {
    pairs
        .iter()
        .map(|(k, v)| format!("{k}={v}"))
        .collect::<Vec<_>>()
        .join(";")
}

/// A recipe-specific CSV written next to the results.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub file: String,
    pub header: Vec<String>,
    pub records: Vec<Vec<String>>,
}

impl Table {
    pub fn new(file: &str, header: &[&str]) -> Self {
        Self {
            file: file.into(),
            header: header.iter().map(|h| h.to_string()).collect(),
            records: Vec::new(),
        }
    }

    pub fn with_header(file: &str, header: Vec<String>) -> Self {
        Self {
            file: file.into(),
            header,
            records: Vec::new(),
        }
    }

    pub fn push(&mut self, record: Vec<String>) {
        debug_assert_eq!(record.len(), self.header.len());
        self.records.push(record);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub recipe: String,
    pub rows: Vec<ReportRow>,
    /// Headline values; keys are fixed per recipe by the schema.
    pub summary: Map<String, Value>,
    pub tables: Vec<Table>,
}

impl Report {
    pub fn new(recipe: &str) -> Self {
        Self {
            recipe: recipe.into(),
            rows: Vec::new(),
            summary: Map::new(),
            tables: Vec::new(),
        }
    }

    pub fn row(&mut self, params: &str, metric: &str, value: f64, n: Option<u64>, epoch: Option<usize>) {
        self.rows.push(ReportRow {
            recipe: self.recipe.clone(),
            params: params.into(),
            metric: metric.into(),
            value,
            n,
            epoch,
        });
    }

    pub fn summarize(&mut self, key: &str, value: impl Serialize) {
        let v = serde_json::to_value(value).expect("summary values serialize");
        self.summary.insert(key.into(), v);
    }

    /// Sort rows by `(params, metric, epoch, n)` so parallel grid runs merge
    /// into one canonical order.
    pub fn sort_rows(&mut self) {
        self.rows
            .sort_by(|a, b| (&a.params, &a.metric, a.epoch, a.n).cmp(&(&b.params, &b.metric, b.epoch, b.n)));
    }

    pub fn results_csv(&self) -> LabResult<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            w.serialize(row).map_err(io)?;
        }
        if self.rows.is_empty() {
            w.write_record(RESULT_COLUMNS).map_err(io)?;
        }
        w.into_inner().map_err(|e| LabError::Io(e.to_string()))
    }

    pub fn table_csv(table: &Table) -> LabResult<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&table.header).map_err(io)?;
        for r in &table.records {
            w.write_record(r).map_err(io)?;
        }
        w.into_inner().map_err(|e| LabError::Io(e.to_string()))
    }

    /// Write `results.csv`, every auxiliary table and `summary.json`
    /// (wrapping the summary with run metadata).
    pub fn write(&self, dir: &Path, seed: u64, resolved_params: &Value) -> LabResult<Vec<String>> {
        std::fs::create_dir_all(dir).map_err(|e| LabError::Io(format!("{}: {e}", dir.display())))?;
        let mut written = Vec::new();
        let mut put = |name: &str, bytes: Vec<u8>| -> LabResult<()> {
            let path = dir.join(name);
            std::fs::write(&path, bytes).map_err(|e| LabError::Io(format!("{}: {e}", path.display())))?;
            written.push(name.to_string());
            Ok(())
        };
        put(RESULTS_FILE, self.results_csv()?)?;
        for t in &self.tables {
            put(&t.file, Self::table_csv(t)?)?;
        }
        let mut doc = Map::new();
        doc.insert("recipe".into(), Value::from(self.recipe.clone()));
        doc.insert("seed".into(), Value::from(seed));
        doc.insert("params".into(), resolved_params.clone());
        doc.insert("row_count".into(), Value::from(self.rows.len()));
        doc.insert("metrics".into(), Value::Object(self.summary.clone()));
        let mut text = serde_json::to_string_pretty(&Value::Object(doc)).map_err(io)?;
        text.push('\n');
        put(SUMMARY_FILE, text.into_bytes())?;
        Ok(written)
    }
}

fn io(e: impl std::fmt::Display) -> LabError {
    LabError::Io(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_has_stable_columns_and_blank_optionals() {
        let mut r = Report::new("demo");
        r.row(
            &params(&[("loss", "ce".into()), ("lr", "8".into())]),
            "coverage",
            0.5,
            Some(4),
            None,
        );
        let text = String::from_utf8(r.results_csv().unwrap()).unwrap();
        assert_eq!(
            text,
            "recipe,params,metric,value,n,epoch\ndemo,loss=ce;lr=8,coverage,0.5,4,\n"
        );
        let empty = String::from_utf8(Report::new("demo").results_csv().unwrap()).unwrap();
        assert_eq!(empty, "recipe,params,metric,value,n,epoch\n");
    }

    #[test]
    fn sort_is_canonical() {
        let mut a = Report::new("x");
        a.row("b", "m", 1.0, Some(2), Some(1));
        a.row("a", "m", 2.0, Some(4), Some(1));
        a.row("a", "m", 3.0, Some(1), Some(1));
        a.sort_rows();
        let order: Vec<f64> = a.rows.iter().map(|r| r.value).collect();
        assert_eq!(order, vec![3.0, 2.0, 1.0]);
    }
}
