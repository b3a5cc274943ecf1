//! Z-score analysis of a score table and its renderings.

use std::fmt::Write as _;
use std::str::FromStr;

use prism_core::stats::{aggregate, compare, zscores_pooled, Aggregate, ModelKey, Pool, ScoreTable, SignificanceResult};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scores::MISSING;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReportFormat {
    /// Aligned z table with aggregates and significance results.
    #[default]
    TableText,
    /// `family,model,benchmark,value,z`; re-parses as a score file.
    Delimited,
    /// Per present cell: raw value, z and the benchmark axis range.
    RadarData,
}

impl ReportFormat {
    pub const ALL: [ReportFormat; 3] = [ReportFormat::TableText, ReportFormat::Delimited, ReportFormat::RadarData];

    pub fn name(self) -> &'static str {
        match self {
            ReportFormat::TableText => "table-text",
            ReportFormat::Delimited => "delimited",
            ReportFormat::RadarData => "radar-data",
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            ReportFormat::TableText => "txt",
            ReportFormat::Delimited | ReportFormat::RadarData => "csv",
        }
    }
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ReportFormat::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown report format `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Analysis {
    pub raw: ScoreTable,
    pub z: ScoreTable,
    pub pool: Pool,
    /// Benchmarks entering the aggregates.
    pub benchmarks: Vec<String>,
    pub aggregates: Vec<Aggregate>,
    pub comparisons: Vec<SignificanceResult>,
}

/// Normalizes `raw`, aggregates over `benchmarks` (all when empty) and runs
/// each `(base, alternate)` comparison.
pub fn analyze(
    raw: &ScoreTable,
    pool: Pool,
    benchmarks: &[String],
    comparisons: &[(Vec<ModelKey>, Vec<ModelKey>)],
) -> Result<Analysis> {
    if raw.is_empty() {
        return Err(Error::Config("the score table is empty".into()));
    }
    let benchmarks = if benchmarks.is_empty() {
        raw.benchmarks().to_vec()
    } else {
        benchmarks.to_vec()
    };
    let z = zscores_pooled(raw, pool)?;
    let aggregates = aggregate(&z, Some(&benchmarks))?;
    let comparisons = comparisons
        .iter()
        .map(|(b, a)| compare(b, a, &z, Some(&benchmarks)))
        .collect::<prism_core::Result<Vec<_>>>()?;
    Ok(Analysis {
        raw: raw.clone(),
        z,
        pool,
        benchmarks,
        aggregates,
        comparisons,
    })
}

fn csv_text(header: &[&str], rows: Vec<Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_else(|| MISSING.into())
}

pub fn emit_report(a: &Analysis, format: ReportFormat) -> String {
    match format {
        ReportFormat::TableText => table_text(a),
        ReportFormat::Delimited => {
            let rows = a
                .raw
                .rows()
                .map(|(m, b, v)| {
                    let z = a.z.value(m, b);
                    vec![m.family.clone(), m.name.clone(), b.to_string(), opt(v), opt(z)]
                })
                .collect();
            csv_text(&["family", "model", "benchmark", "value", "z"], rows)
        }
        ReportFormat::RadarData => {
            let ranges: Vec<(f64, f64)> = (0..a.raw.benchmarks().len())
                .map(|c| {
                    a.raw
                        .column(c)
                        .into_iter()
                        .flatten()
                        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
                })
                .collect();
            let rows = a
                .raw
                .rows()
                .filter_map(|(m, b, v)| {
                    let v = v?;
                    let (lo, hi) = ranges[a.raw.benchmark_index(b).expect("own benchmark")];
                    Some(vec![
                        m.family.clone(),
                        m.name.clone(),
                        b.to_string(),
                        v.to_string(),
                        opt(a.z.value(m, b)),
                        lo.to_string(),
                        hi.to_string(),
                    ])
                })
                .collect();
            csv_text(&["family", "model", "benchmark", "value", "z", "axis_min", "axis_max"], rows)
        }
    }
}

fn table_text(a: &Analysis) -> String {
    let mut out = String::new();
    let pool = match a.pool {
        Pool::Global => "global",
        Pool::Family => "family",
    };
    writeln!(out, "z-scores (pool: {pool}; aggregate over {} benchmarks)", a.benchmarks.len()).unwrap();
    let names: Vec<String> = a.z.models().iter().map(|m| m.to_string()).collect();
    let width = names.iter().map(|n| n.chars().count()).max().unwrap_or(5).max(5);
    let cols: Vec<usize> = a.z.benchmarks().iter().map(|b| b.chars().count().max(7)).collect();
    write!(out, "{:width$}", "model").unwrap();
    for (b, w) in a.z.benchmarks().iter().zip(&cols) {
        write!(out, "  {b:>w$}").unwrap();
    }
    writeln!(out, "  {:>9}", "aggregate").unwrap();
    for (m, name) in names.iter().enumerate() {
        write!(out, "{name:width$}").unwrap();
        for (c, w) in cols.iter().enumerate() {
            match a.z.get(m, c) {
                Some(v) => write!(out, "  {v:>+w$.3}").unwrap(),
                None => write!(out, "  {MISSING:>w$}").unwrap(),
            }
        }
        writeln!(out, "  {:>+9.3}", a.aggregates[m].score).unwrap();
    }
    for c in &a.comparisons {
        let keys = |ks: &[ModelKey]| ks.iter().map(|k| k.to_string()).collect::<Vec<_>>().join(", ");
        writeln!(out).unwrap();
        writeln!(out, "{}", c.test).unwrap();
        writeln!(out, "  base:      {}", keys(&c.base)).unwrap();
        writeln!(out, "  alternate: {}", keys(&c.alternate)).unwrap();
        let mean = c.differences.iter().sum::<f64>() / c.differences.len() as f64;
        write!(out, "  pairs: {}  mean difference: {mean:+.4}", c.differences.len()).unwrap();
        if let (Some(t), Some(df), Some(p)) = (c.t, c.df, c.p) {
            write!(out, "  t: {t:.4}  df: {df}  p: {p:.3e}").unwrap();
        }
        writeln!(out, "  verdict: {}", c.verdict.name()).unwrap();
    }
    out
}
