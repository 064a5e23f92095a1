//! Validation of recipe outputs against `schemas/recipes.json`.

use std::collections::BTreeMap;

use serde::Deserialize;

use crate::error::{LabError, LabResult};
use crate::report::{Report, RESULT_COLUMNS};

/// The checked-in output schema.
pub const SCHEMA_JSON: &str = include_str!("../schemas/recipes.json");

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemaFile {
    pub columns: Vec<String>,
    pub recipes: BTreeMap<String, RecipeSchema>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecipeSchema {
    /// Allowed metric names and whether rows carry `n` / `epoch`.
    pub metrics: BTreeMap<String, MetricSchema>,
    /// Exact set of summary keys.
    pub summary: Vec<String>,
    /// Auxiliary CSV files and their headers. A column ending in `*`
    /// matches one or more columns with that prefix.
    #[serde(default)]
    pub tables: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricSchema {
    pub n: bool,
    pub epoch: bool,
}

pub fn load() -> LabResult<SchemaFile> {
    serde_json::from_str(SCHEMA_JSON).map_err(|e| LabError::Schema(format!("schema file: {e}")))
}

fn violation(recipe: &str, msg: String) -> LabError {
    LabError::Schema(format!("{recipe}: {msg}"))
}

fn header_matches(pattern: &[String], header: &[String]) -> bool {
    let mut i = 0;
    for p in pattern {
        match p.strip_suffix('*') {
            Some(prefix) => {
                let start = i;
                while i < header.len() && header[i].starts_with(prefix) {
                    i += 1;
                }
                if i == start {
                    return false;
                }
            }
            None => {
                if header.get(i) != Some(p) {
                    return false;
                }
                i += 1;
            }
        }
    }
    i == header.len()
}

/// Check rows, summary keys and tables of `report`.
pub fn validate(schema: &SchemaFile, report: &Report) -> LabResult<()> {
    let name = report.recipe.as_str();
    if schema.columns != RESULT_COLUMNS {
        return Err(violation(
            name,
            format!("result columns {:?} differ from the writer", schema.columns),
        ));
    }
    let rs = schema
        .recipes
        .get(name)
        .ok_or_else(|| violation(name, "no schema entry".into()))?;
    for row in &report.rows {
        let m = rs
            .metrics
            .get(&row.metric)
            .ok_or_else(|| violation(name, format!("unexpected metric {:?}", row.metric)))?;
        if m.n != row.n.is_some() || m.epoch != row.epoch.is_some() {
            return Err(violation(
                name,
                format!("metric {:?} has wrong n/epoch columns", row.metric),
            ));
        }
        if !row.value.is_finite() {
            return Err(violation(
                name,
                format!("non-finite {:?} in {:?}", row.metric, row.params),
            ));
        }
    }
    let mut want: Vec<&str> = rs.summary.iter().map(String::as_str).collect();
    want.sort_unstable();
    let have: Vec<&str> = report.summary.keys().map(String::as_str).collect();
    if want != have {
        return Err(violation(name, format!("summary keys {have:?}, expected {want:?}")));
    }
    if report.tables.len() != rs.tables.len() {
        return Err(violation(
            name,
            format!("{} tables, expected {}", report.tables.len(), rs.tables.len()),
        ));
    }
    for t in &report.tables {
        let pattern = rs
            .tables
            .get(&t.file)
            .ok_or_else(|| violation(name, format!("unexpected table {}", t.file)))?;
        if !header_matches(pattern, &t.header) {
            return Err(violation(
                name,
                format!("{} header {:?} does not match {pattern:?}", t.file, t.header),
            ));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(v: &[&str]) -> Vec<String> {
        v.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn wildcard_headers() {
        let p = s(&["n", "n_train_*", "frontier"]);
        assert!(header_matches(&p, &s(&["n", "n_train_1", "n_train_16", "frontier"])));
        assert!(!header_matches(&p, &s(&["n", "frontier"])));
        assert!(!header_matches(&p, &s(&["n", "n_train_1", "frontier", "extra"])));
    }

    #[test]
    fn schema_covers_registry() {
        let schema = load().unwrap();
        let names: Vec<String> = crate::recipes::list().iter().map(|r| r.name.to_string()).collect();
        let mut sorted = names.clone();
        sorted.sort();
        assert_eq!(schema.recipes.keys().cloned().collect::<Vec<_>>(), sorted);
    }

    #[test]
    fn rejects_unknown_metric_and_missing_summary() {
        let schema = load().unwrap();
        let mut r = Report::new("toy_models");
        r.row("model=x", "bogus", 1.0, Some(1), None);
        assert!(matches!(validate(&schema, &r), Err(LabError::Schema(_))));
        let mut ok_rows = Report::new("toy_models");
        ok_rows.row("model=x", "coverage", 1.0, Some(1), None);
        assert!(validate(&schema, &ok_rows).is_err());
    }
}
