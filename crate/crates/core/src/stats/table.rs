use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

/// A model row, namespaced by the experiment family it was reported in.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModelKey {
    pub family: String,
    pub name: String,
}

impl ModelKey {
    pub fn new(family: impl Into<String>, name: impl Into<String>) -> Self {
        ModelKey {
            family: family.into(),
            name: name.into(),
        }
    }
}

impl fmt::Display for ModelKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.family, self.name)
    }
}

/// Models × benchmarks with missing entries.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    models: Vec<ModelKey>,
    benchmarks: Vec<String>,
    values: Vec<Option<f64>>,
}

impl ScoreTable {
    pub fn new(models: Vec<ModelKey>, benchmarks: Vec<String>) -> Result<Self> {
        for (i, m) in models.iter().enumerate() {
            if models[..i].contains(m) {
                return Err(Error::InvalidArgument(format!("duplicate model {m}")));
            }
        }
        for (i, b) in benchmarks.iter().enumerate() {
            if benchmarks[..i].contains(b) {
                return Err(Error::InvalidArgument(format!("duplicate benchmark {b}")));
            }
        }
        let values = vec![None; models.len() * benchmarks.len()];
        Ok(ScoreTable {
            models,
            benchmarks,
            values,
        })
    }

    /// Builds a table from `(model, benchmark, value)` rows; models and
    /// benchmarks keep first-seen order.
    pub fn from_rows<'a>(rows: impl IntoIterator<Item = (&'a ModelKey, &'a str, Option<f64>)> + Clone) -> Result<Self> {
        let mut models: Vec<ModelKey> = Vec::new();
        let mut benchmarks: Vec<String> = Vec::new();
        for (m, b, _) in rows.clone() {
            if !models.contains(m) {
                models.push(m.clone());
            }
            if !benchmarks.iter().any(|x| x == b) {
                benchmarks.push(b.into());
            }
        }
        let mut table = ScoreTable::new(models, benchmarks)?;
        let mut seen = vec![false; table.values.len()];
        for (m, b, v) in rows {
            let (mi, bi) = (table.model_index(m).expect("added"), table.benchmark_index(b).expect("added"));
            let k = mi * table.benchmarks.len() + bi;
            if seen[k] {
                return Err(Error::InvalidArgument(format!("duplicate entry for {m} on {b}")));
            }
            seen[k] = true;
            table.set(mi, bi, v)?;
        }
        Ok(table)
    }

    pub fn models(&self) -> &[ModelKey] {
        &self.models
    }

    pub fn benchmarks(&self) -> &[String] {
        &self.benchmarks
    }

    pub fn model_index(&self, key: &ModelKey) -> Option<usize> {
        self.models.iter().position(|m| m == key)
    }

    pub fn benchmark_index(&self, name: &str) -> Option<usize> {
        self.benchmarks.iter().position(|b| b == name)
    }

    /// Models whose name (in any family) is `name`.
    pub fn find_by_name(&self, name: &str) -> Vec<&ModelKey> {
        self.models.iter().filter(|m| m.name == name).collect()
    }

    pub fn get(&self, model: usize, benchmark: usize) -> Option<f64> {
        self.values[model * self.benchmarks.len() + benchmark]
    }

    pub fn value(&self, model: &ModelKey, benchmark: &str) -> Option<f64> {
        self.get(self.model_index(model)?, self.benchmark_index(benchmark)?)
    }

    pub fn set(&mut self, model: usize, benchmark: usize, value: Option<f64>) -> Result<()> {
        if let Some(v) = value {
            if !v.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "non-finite value for {} on {}",
                    self.models[model], self.benchmarks[benchmark]
                )));
            }
        }
        self.values[model * self.benchmarks.len() + benchmark] = value;
        Ok(())
    }

    pub fn column(&self, benchmark: usize) -> Vec<Option<f64>> {
        (0..self.models.len()).map(|m| self.get(m, benchmark)).collect()
    }

    /// `(model, benchmark, value)` in row-major order.
    pub fn rows(&self) -> impl Iterator<Item = (&ModelKey, &str, Option<f64>)> {
        self.models.iter().enumerate().flat_map(move |(mi, m)| {
            self.benchmarks
                .iter()
                .enumerate()
                .map(move |(bi, b)| (m, b.as_str(), self.get(mi, bi)))
        })
    }

    /// Sub-table over the given benchmarks, in the given order.
    pub fn select_benchmarks(&self, names: &[String]) -> Result<Self> {
        let idx = names
            .iter()
            .map(|n| {
                self.benchmark_index(n)
                    .ok_or_else(|| Error::Unknown {
                        kind: "benchmark",
                        name: n.clone(),
                    })
            })
            .collect::<Result<Vec<_>>>()?;
        let mut out = ScoreTable::new(self.models.clone(), names.to_vec())?;
        for m in 0..self.models.len() {
            for (j, &b) in idx.iter().enumerate() {
                out.values[m * names.len() + j] = self.get(m, b);
            }
        }
        Ok(out)
    }

    pub fn select_models(&self, keep: impl Fn(&ModelKey) -> bool) -> Result<Self> {
        let idx: Vec<usize> = (0..self.models.len()).filter(|&i| keep(&self.models[i])).collect();
        let mut out = ScoreTable::new(idx.iter().map(|&i| self.models[i].clone()).collect(), self.benchmarks.clone())?;
        let nb = self.benchmarks.len();
        for (j, &i) in idx.iter().enumerate() {
            out.values[j * nb..(j + 1) * nb].copy_from_slice(&self.values[i * nb..(i + 1) * nb]);
        }
        Ok(out)
    }

    /// Stack two tables with the same benchmarks and disjoint models.
    pub fn concat(&self, other: &ScoreTable) -> Result<Self> {
        if self.benchmarks != other.benchmarks {
            return Err(Error::InvalidArgument("tables cover different benchmarks".into()));
        }
        let mut models = self.models.clone();
        models.extend(other.models.iter().cloned());
        let mut out = ScoreTable::new(models, self.benchmarks.clone())?;
        out.values = self.values.iter().chain(&other.values).copied().collect();
        Ok(out)
    }

    /// Families in first-seen order.
    pub fn families(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for m in &self.models {
            if !out.contains(&m.family.as_str()) {
                out.push(&m.family);
            }
        }
        out
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty() || self.benchmarks.is_empty()
    }
}
