//! Score files: CSV with a `family,model,benchmark,value` header, one cell
//! per row, `N/A` (or empty) for a missing value. Extra columns are ignored.

use std::path::Path;

use prism_core::stats::{ModelKey, ScoreTable};
use serde::Deserialize;

use crate::error::{Error, Result};

pub const MISSING: &str = "N/A";

#[derive(Debug, Deserialize)]
struct Row {
    family: String,
    model: String,
    benchmark: String,
    value: String,
}

type Cell = (ModelKey, String, Option<f64>);

fn parse_cells(text: &str, origin: &Path) -> Result<Vec<Cell>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut cells = Vec::new();
    for (i, row) in reader.deserialize::<Row>().enumerate() {
        // header is line 1
        let line = i + 2;
        let row = row.map_err(|e| Error::format(origin, line, e))?;
        let v = row.value.trim();
        let value = if v.is_empty() || v == MISSING {
            None
        } else {
            let x: f64 = v
                .parse()
                .map_err(|_| Error::format(origin, line, format!("value `{v}` is not a number")))?;
            if !x.is_finite() {
                return Err(Error::format(origin, line, format!("value `{v}` is not finite")));
            }
            Some(x)
        };
        cells.push((ModelKey::new(row.family, row.model), row.benchmark, value));
    }
    Ok(cells)
}

fn table(cells: &[Cell]) -> Result<ScoreTable> {
    Ok(ScoreTable::from_rows(cells.iter().map(|(m, b, v)| (m, b.as_str(), *v)))?)
}

pub fn parse_scores(text: &str, origin: &Path) -> Result<ScoreTable> {
    table(&parse_cells(text, origin)?)
}

/// One table over the cells of several score texts `(text, origin)`.
pub fn merge_scores(sources: &[(&str, &Path)]) -> Result<ScoreTable> {
    let mut cells = Vec::new();
    for (text, origin) in sources {
        cells.extend(parse_cells(text, origin)?);
    }
    table(&cells)
}

/// Reads several score files into one table.
pub fn read_scores(paths: &[impl AsRef<Path>]) -> Result<ScoreTable> {
    let texts = paths
        .iter()
        .map(|p| std::fs::read_to_string(p.as_ref()).map_err(Error::io(p.as_ref())))
        .collect::<Result<Vec<_>>>()?;
    let sources: Vec<(&str, &Path)> = texts.iter().map(|t| t.as_str()).zip(paths.iter().map(|p| p.as_ref())).collect();
    merge_scores(&sources)
}

/// Every cell of `t`, model-major, missing values as `N/A`.
pub fn write_scores(t: &ScoreTable) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["family", "model", "benchmark", "value"]).expect("in-memory write");
    for (m, b, v) in t.rows() {
        let value = v.map(|x| x.to_string()).unwrap_or_else(|| MISSING.into());
        w.write_record([m.family.as_str(), m.name.as_str(), b, value.as_str()])
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

/// Resolves `family/name` or a bare model name that is unique in `t`.
pub fn resolve_model(t: &ScoreTable, spec: &str) -> Result<ModelKey> {
    if let Some((family, name)) = spec.split_once('/') {
        let key = ModelKey::new(family, name);
        if t.model_index(&key).is_some() {
            return Ok(key);
        }
    }
    match t.find_by_name(spec).as_slice() {
        [one] => Ok((*one).clone()),
        [] => Err(Error::Config(format!("no model named `{spec}`"))),
        many => Err(Error::Config(format!(
            "`{spec}` is ambiguous; qualify it as one of: {}",
            many.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(", ")
        ))),
    }
}
