use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::run::Column;
use crate::error::{LabError, Result};

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MetricDiff {
    pub name: String,
    pub max_abs_diff: f64,
    pub max_rel_diff: f64,
    /// `max |a|` over the rows of the first run.
    pub max_abs_a: f64,
    pub max_abs_b: f64,
    /// `max |a| / max |b|`; above 1 when the second run has smaller values.
    pub shrink_factor: Option<f64>,
    pub tolerance: f64,
    pub flagged: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Comparison {
    pub kind: String,
    pub rows: usize,
    pub metrics: Vec<MetricDiff>,
    pub flagged: usize,
}

fn load(dir: &Path) -> Result<(Value, Vec<Column>)> {
    let results: Value = serde_json::from_str(&std::fs::read_to_string(dir.join("results.json"))?)?;
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(dir.join("schema.json"))?)?;
    let columns: Vec<Column> = serde_json::from_value(schema["columns"].clone())?;
    Ok((results, columns))
}

fn num(v: &Value) -> Option<f64> {
    v.as_f64()
}

/// Per-metric differences between two result directories of the same
/// experiment kind and row layout.
pub fn compare_runs(dir_a: &Path, dir_b: &Path) -> Result<Comparison> {
    let (ra, ca) = load(dir_a)?;
    let (rb, cb) = load(dir_b)?;
    let kind = ra["kind"].as_str().unwrap_or_default().to_string();
    if ra["kind"] != rb["kind"] {
        return Err(LabError::Mismatch(format!("kind mismatch: {} vs {}", ra["kind"], rb["kind"])));
    }
    let names = |c: &[Column]| c.iter().map(|c| c.name.clone()).collect::<Vec<_>>();
    if names(&ca) != names(&cb) {
        return Err(LabError::Mismatch("shape mismatch: column sets differ".into()));
    }
    let empty = Vec::new();
    let rows_a = ra["rows"].as_array().unwrap_or(&empty);
    let rows_b = rb["rows"].as_array().unwrap_or(&empty);
    if rows_a.len() != rows_b.len() {
        return Err(LabError::Mismatch(format!("shape mismatch: {} rows vs {} rows", rows_a.len(), rows_b.len())));
    }
    for (i, (a, b)) in rows_a.iter().zip(rows_b).enumerate() {
        for c in ca.iter().filter(|c| c.key) {
            let same = match (num(&a[&c.name]), num(&b[&c.name])) {
                (Some(x), Some(y)) => (x - y).abs() <= 1e-12 * x.abs().max(y.abs()).max(1e-300),
                _ => a[&c.name] == b[&c.name],
            };
            if !same {
                return Err(LabError::Mismatch(format!(
                    "shape mismatch: row {i} has {} = {} vs {}",
                    c.name, a[&c.name], b[&c.name]
                )));
            }
        }
    }
    let metrics: Vec<MetricDiff> = ca
        .iter()
        .filter(|c| !c.key)
        .filter_map(|c| {
            let pairs: Vec<(f64, f64)> =
                rows_a.iter().zip(rows_b).filter_map(|(a, b)| Some((num(&a[&c.name])?, num(&b[&c.name])?))).collect();
            if pairs.is_empty() {
                return None;
            }
            let mut d = MetricDiff {
                name: c.name.clone(),
                max_abs_diff: 0.0,
                max_rel_diff: 0.0,
                max_abs_a: 0.0,
                max_abs_b: 0.0,
                shrink_factor: None,
                tolerance: c.tolerance,
                flagged: false,
            };
            for (x, y) in pairs {
                let diff = (x - y).abs();
                let scale = x.abs().max(y.abs());
                d.max_abs_diff = d.max_abs_diff.max(diff);
                if scale > 0.0 {
                    d.max_rel_diff = d.max_rel_diff.max(diff / scale);
                }
                d.max_abs_a = d.max_abs_a.max(x.abs());
                d.max_abs_b = d.max_abs_b.max(y.abs());
            }
            d.shrink_factor = (d.max_abs_b > 0.0).then(|| d.max_abs_a / d.max_abs_b);
            d.flagged = d.max_rel_diff > c.tolerance;
            Some(d)
        })
        .collect();
    let flagged = metrics.iter().filter(|m| m.flagged).count();
    Ok(Comparison { kind, rows: rows_a.len(), metrics, flagged })
}
