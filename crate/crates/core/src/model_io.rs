//! Text model files.
//!
//! ```text
//! hazardboost-model
//! version=1
//! p=1
//! schema=x:continuous
//! f0=-1.386
//! nu=0.1
//! M=2
//! L=2
//! grid_hash=9ae16a3b2f90404f
//! grid.time=0.1,0.5
//! grid.1=0.3,0.7
//! risk=1.2,1.1,1.05
//! tree 0
//! 0,split,0,0.5,-0.01
//! 1,leaf,,,0.2
//! 2,leaf,,,-0.1
//! tree 1
//! 0,leaf,,,0
//! ```
//!
//! Floats use Rust's shortest round-trip formatting, so a reloaded model
//! predicts bit-identically.

use std::fmt::Write as _;
use std::path::Path;

use crate::boosting::BoostedHazardModel;
use crate::data::{Column, ColumnKind, Schema};
use crate::error::{Error, Result};
use crate::grid::{AxisCuts, SplitCandidateGrid};
use crate::tree::RegressionTree;

const MAGIC: &str = "hazardboost-model";
const VERSION: u32 = 1;
const RESERVED: &[char] = &[',', ';', ':', '|', '[', ']', '=', '\n', '\r'];

fn join(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v}")).collect::<Vec<_>>().join(",")
}

fn schema_to_text(schema: &Schema) -> Result<String> {
    let mut parts = Vec::with_capacity(schema.len());
    for column in &schema.columns {
        if column.name.contains(RESERVED) || column.name.is_empty() {
            return Err(Error::Schema(format!("column name `{}` cannot be stored", column.name)));
        }
        match &column.kind {
            ColumnKind::Continuous => parts.push(format!("{}:continuous", column.name)),
            ColumnKind::Categorical(labels) => {
                if let Some(bad) = labels.iter().find(|l| l.contains(RESERVED) || l.is_empty()) {
                    return Err(Error::Schema(format!("label `{bad}` cannot be stored")));
                }
                parts.push(format!("{}:categorical[{}]", column.name, labels.join("|")));
            }
        }
    }
    Ok(parts.join(";"))
}

fn schema_from_text(text: &str, line: usize) -> Result<Schema> {
    let err = |message: String| Error::ModelFormat { line, message };
    if text.is_empty() {
        return Ok(Schema::default());
    }
    let mut columns = Vec::new();
    for part in text.split(';') {
        let (name, kind) = part
            .split_once(':')
            .ok_or_else(|| err(format!("bad column `{part}`")))?;
        if kind == "continuous" {
            columns.push(Column::continuous(name));
        } else if let Some(labels) = kind.strip_prefix("categorical[").and_then(|k| k.strip_suffix(']')) {
            let labels = if labels.is_empty() {
                Vec::new()
            } else {
                labels.split('|').map(str::to_string).collect()
            };
            columns.push(Column::categorical(name, labels));
        } else {
            return Err(err(format!("bad column kind `{kind}`")));
        }
    }
    Ok(Schema::new(columns))
}

pub fn model_to_text(model: &BoostedHazardModel) -> Result<String> {
    let mut out = String::new();
    let _ = writeln!(out, "{MAGIC}");
    let _ = writeln!(out, "version={VERSION}");
    let _ = writeln!(out, "p={}", model.schema.len());
    let _ = writeln!(out, "schema={}", schema_to_text(&model.schema)?);
    let _ = writeln!(out, "f0={}", model.f0);
    let _ = writeln!(out, "nu={}", model.learning_rate);
    let _ = writeln!(out, "M={}", model.trees.len());
    let _ = writeln!(out, "L={}", model.max_splits);
    let _ = writeln!(out, "grid_hash={:016x}", model.grid.fingerprint());
    let _ = writeln!(out, "grid.time={}", join(&model.grid.time_cuts));
    for (j, axis) in model.grid.covariates.iter().enumerate() {
        match axis {
            AxisCuts::Continuous(cuts) => {
                let _ = writeln!(out, "grid.{}={}", j + 1, join(cuts));
            }
            AxisCuts::Categorical(n) => {
                let _ = writeln!(out, "grid.{}=categorical:{n}", j + 1);
            }
        }
    }
    let _ = writeln!(out, "risk={}", join(&model.risk_trace));
    for (m, tree) in model.trees.iter().enumerate() {
        let _ = writeln!(out, "tree {m}");
        out.push_str(&tree.to_text());
    }
    Ok(out)
}

pub fn write_model(model: &BoostedHazardModel, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path.as_ref(), model_to_text(model)?)?;
    Ok(())
}

pub fn read_model(path: impl AsRef<Path>) -> Result<BoostedHazardModel> {
    model_from_text(&std::fs::read_to_string(path.as_ref())?)
}

pub fn model_from_text(text: &str) -> Result<BoostedHazardModel> {
    let lines: Vec<&str> = text.lines().collect();
    let err = |line: usize, message: String| Error::ModelFormat { line, message };
    if lines.first().map(|l| l.trim()) != Some(MAGIC) {
        return Err(err(1, "not a hazardboost model file".into()));
    }
    let mut header: Vec<(usize, &str, &str)> = Vec::new();
    let mut idx = 1;
    while idx < lines.len() && !lines[idx].starts_with("tree ") {
        let line = lines[idx].trim();
        if !line.is_empty() {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| err(idx + 1, format!("expected key=value, got `{line}`")))?;
            header.push((idx + 1, k, v));
        }
        idx += 1;
    }
    let get = |key: &str| -> Result<(usize, &str)> {
        header
            .iter()
            .find(|(_, k, _)| *k == key)
            .map(|(l, _, v)| (*l, *v))
            .ok_or_else(|| err(0, format!("missing header key `{key}`")))
    };
    let number = |key: &str| -> Result<f64> {
        let (line, v) = get(key)?;
        v.parse().map_err(|_| err(line, format!("bad number for `{key}`: `{v}`")))
    };
    let integer = |key: &str| -> Result<usize> {
        let (line, v) = get(key)?;
        v.parse().map_err(|_| err(line, format!("bad integer for `{key}`: `{v}`")))
    };
    let list = |key: &str| -> Result<Vec<f64>> {
        let (line, v) = get(key)?;
        if v.is_empty() {
            return Ok(Vec::new());
        }
        v.split(',')
            .map(|s| s.parse().map_err(|_| err(line, format!("bad number `{s}` in `{key}`"))))
            .collect()
    };

    let version = integer("version")?;
    if version != VERSION as usize {
        return Err(err(get("version")?.0, format!("unsupported version {version}")));
    }
    let p = integer("p")?;
    let (schema_line, schema_text) = get("schema")?;
    let schema = schema_from_text(schema_text, schema_line)?;
    if schema.len() != p {
        return Err(err(schema_line, format!("schema has {} columns, p = {p}", schema.len())));
    }
    let mut covariates = Vec::with_capacity(p);
    for j in 1..=p {
        let key = format!("grid.{j}");
        let (line, v) = get(&key)?;
        if let Some(n) = v.strip_prefix("categorical:") {
            let n = n.parse().map_err(|_| err(line, format!("bad label count `{n}`")))?;
            covariates.push(AxisCuts::Categorical(n));
        } else {
            covariates.push(AxisCuts::Continuous(list(&key)?));
        }
    }
    let grid = SplitCandidateGrid {
        time_cuts: list("grid.time")?,
        covariates,
    };
    let (hash_line, hash) = get("grid_hash")?;
    if u64::from_str_radix(hash, 16).ok() != Some(grid.fingerprint()) {
        return Err(err(hash_line, "grid hash does not match the stored grid".into()));
    }
    let m = integer("M")?;
    let mut trees = Vec::with_capacity(m);
    let mut iter = lines[idx..].iter().copied();
    let mut line_no = idx + 1;
    for expected in 0..m {
        let marker = iter.next().ok_or_else(|| err(line_no, format!("missing tree {expected}")))?;
        if marker.trim() != format!("tree {expected}") {
            return Err(err(line_no, format!("expected `tree {expected}`, got `{marker}`")));
        }
        line_no += 1;
        let tree = RegressionTree::from_lines(&mut iter, &grid, line_no)?;
        line_no += tree.nodes().len();
        trees.push(tree);
    }
    if let Some(extra) = iter.find(|l| !l.trim().is_empty()) {
        return Err(err(line_no, format!("unexpected trailing line `{extra}`")));
    }
    Ok(BoostedHazardModel {
        f0: number("f0")?,
        learning_rate: number("nu")?,
        max_splits: integer("L")?,
        trees,
        schema,
        grid,
        risk_trace: list("risk")?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boosting::{fit, FitConfig};
    use crate::data::{Dataset, Epoch, FunctionalSample};
    use crate::grid::{build_grid, QuantileWeighting};

    #[test]
    fn round_trip_with_categorical() {
        let schema = Schema::new(vec![
            Column::continuous("x"),
            Column::categorical("g", vec!["lo".into(), "hi".into()]),
        ]);
        let samples = (0..60)
            .map(|i| {
                let x = (i % 10) as f64 / 10.0;
                let g = (i % 2) as f64;
                let t = 0.5 + (i % 7) as f64 * 0.2 + g;
                FunctionalSample::new(
                    format!("{i}"),
                    vec![Epoch::new(0.0, t / 2.0, vec![x, g]), Epoch::new(t / 2.0, t, vec![1.0 - x, g])],
                    t,
                    i % 3 != 0,
                )
            })
            .collect();
        let ds = Dataset::new(schema, samples);
        let grid = build_grid(&ds, 5, QuantileWeighting::Duration);
        let model = fit(&ds, &grid, FitConfig::new(8, 3)).unwrap();
        let text = model_to_text(&model).unwrap();
        let back = model_from_text(&text).unwrap();
        assert_eq!(back, model);
        assert_eq!(model_to_text(&back).unwrap(), text);
    }

    #[test]
    fn rejects_tampered_grid() {
        let schema = Schema::continuous(1);
        let grid = SplitCandidateGrid {
            time_cuts: vec![0.5],
            covariates: vec![AxisCuts::Continuous(vec![0.25])],
        };
        let model = BoostedHazardModel::constant(-1.0, schema, grid);
        let text = model_to_text(&model).unwrap().replace("grid.1=0.25", "grid.1=0.3");
        assert!(matches!(model_from_text(&text), Err(Error::ModelFormat { .. })));
    }
}
