use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use super::table::{ModelKey, ScoreTable};
use crate::error::{Error, Result};

/// Which models share the mean and standard deviation of a column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Pool {
    /// Every row of the table.
    Global,
    /// Rows of the same experiment family.
    #[default]
    Family,
}

/// Per-column `(v - mean) / std` with the population std over present
/// values; a zero-variance column maps to all zeros.
pub fn zscores(table: &ScoreTable) -> Result<ScoreTable> {
    let mut out = table.clone();
    for b in 0..table.benchmarks().len() {
        let present: Vec<f64> = table.column(b).into_iter().flatten().collect();
        if present.len() < 2 {
            return Err(Error::InsufficientData(format!(
                "benchmark {} has {} present value(s); z-scores need 2",
                table.benchmarks()[b],
                present.len()
            )));
        }
        let n = present.len() as f64;
        let mean = present.iter().sum::<f64>() / n;
        let var = present.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let std = libm::sqrt(var);
        for m in 0..table.models().len() {
            let z = table.get(m, b).map(|v| if std > 0.0 { (v - mean) / std } else { 0.0 });
            out.set(m, b, z)?;
        }
    }
    Ok(out)
}

pub fn zscores_pooled(table: &ScoreTable, pool: Pool) -> Result<ScoreTable> {
    match pool {
        Pool::Global => zscores(table),
        Pool::Family => {
            let mut out = table.clone();
            for family in table.families() {
                let sub = zscores(&table.select_models(|m| m.family == family)?)?;
                for (m, b, v) in sub.rows() {
                    let (mi, bi) = (out.model_index(m).expect("same models"), out.benchmark_index(b).expect("same"));
                    out.set(mi, bi, v)?;
                }
            }
            Ok(out)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Aggregate {
    pub model: ModelKey,
    pub score: f64,
    pub present: usize,
    /// Benchmarks without a value for this model.
    pub missing: Vec<String>,
}

/// Mean z over the selected benchmarks (all when `subset` is `None`),
/// skipping missing entries.
pub fn aggregate(z: &ScoreTable, subset: Option<&[String]>) -> Result<Vec<Aggregate>> {
    let names: Vec<String> = match subset {
        Some([]) => return Err(Error::InvalidArgument("empty benchmark subset".into())),
        Some(s) => s.to_vec(),
        None => z.benchmarks().to_vec(),
    };
    let cols = names
        .iter()
        .map(|n| {
            z.benchmark_index(n).ok_or_else(|| Error::Unknown {
                kind: "benchmark",
                name: n.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    z.models()
        .iter()
        .enumerate()
        .map(|(m, key)| {
            let mut sum = 0.0;
            let mut present = 0;
            let mut missing = Vec::new();
            for (&c, name) in cols.iter().zip(&names) {
                match z.get(m, c) {
                    Some(v) => {
                        sum += v;
                        present += 1;
                    }
                    None => missing.push(name.clone()),
                }
            }
            if present == 0 {
                return Err(Error::InsufficientData(format!("{key} has no values on the selected benchmarks")));
            }
            Ok(Aggregate {
                model: key.clone(),
                score: sum / present as f64,
                present,
                missing,
            })
        })
        .collect()
}
