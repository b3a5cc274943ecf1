//! Experiment configuration: one TOML tree with sections `image`, `model`,
//! `data`, `train`, `eval` and `analysis`, plus `--set key=value` overrides.

use std::path::Path;

use prism_core::data::{MixtureConfig, SourceEntry, SynthConfig};
use prism_core::image::patch_grid;
use prism_core::model::{BackboneConfig, ImageSettings, LmConfig, VlmConfig};
use prism_core::stats::Pool;
use prism_core::train::{Hyperparameters, Procedure};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::report::ReportFormat;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub output: String,
    pub image: ImageSettings,
    pub model: ModelSection,
    pub data: DataSection,
    pub train: TrainSection,
    pub eval: EvalSection,
    pub analysis: AnalysisSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            output: "runs/default".into(),
            image: ImageSettings::default(),
            model: ModelSection::default(),
            data: DataSection::default(),
            train: TrainSection::default(),
            eval: EvalSection::default(),
            analysis: AnalysisSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub backbones: Vec<BackboneConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub projector_hidden: Option<usize>,
    pub lm: LmConfig,
}

impl Default for ModelSection {
    fn default() -> Self {
        let v = VlmConfig::default();
        ModelSection {
            backbones: v.backbones,
            projector_hidden: v.projector_hidden,
            lm: v.lm,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    pub include_language_only: bool,
    /// Passes over the mixture; fractional values allowed.
    pub epochs: f64,
    pub synth: SynthSection,
    pub sources: Vec<SourceSpec>,
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection {
            include_language_only: true,
            epochs: 1.0,
            synth: SynthSection::default(),
            sources: vec![SourceSpec {
                name: "synth".into(),
                path: None,
                include: true,
            }],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthSection {
    pub images: usize,
    /// Defaults to `image.resolution`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub canvas: Option<usize>,
    pub min_objects: usize,
    pub max_objects: usize,
    pub language_only: usize,
}

impl Default for SynthSection {
    fn default() -> Self {
        SynthSection {
            images: 16,
            canvas: None,
            min_objects: 2,
            max_objects: 4,
            language_only: 0,
        }
    }
}

/// A mixture entry: a dataset directory, or (without `path`) the synthetic
/// generator configured under `data.synth`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceSpec {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    #[serde(default = "yes")]
    pub include: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSection {
    pub procedure: Procedure,
    pub batch_size: usize,
    pub max_grad_norm: f64,
    pub weight_decay: f64,
    pub learning_rate: f64,
    pub warmup_ratio: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub align_batch_size: usize,
    pub align_learning_rate: f64,
    /// Print a progress line every this many steps; 0 disables.
    pub log_every: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        TrainSection::from_hyperparameters(Procedure::SingleStage, &Hyperparameters::default())
    }
}

impl TrainSection {
    pub fn from_hyperparameters(procedure: Procedure, h: &Hyperparameters) -> Self {
        TrainSection {
            procedure,
            batch_size: h.batch_size,
            max_grad_norm: h.max_grad_norm,
            weight_decay: h.weight_decay,
            learning_rate: h.learning_rate,
            warmup_ratio: h.warmup_ratio,
            adam_beta1: h.adam_beta1,
            adam_beta2: h.adam_beta2,
            adam_epsilon: h.adam_epsilon,
            align_batch_size: h.align_batch_size,
            align_learning_rate: h.align_learning_rate,
            log_every: 10,
        }
    }

    pub fn hyperparameters(&self) -> Hyperparameters {
        Hyperparameters {
            batch_size: self.batch_size,
            max_grad_norm: self.max_grad_norm,
            weight_decay: self.weight_decay,
            learning_rate: self.learning_rate,
            warmup_ratio: self.warmup_ratio,
            adam_beta1: self.adam_beta1,
            adam_beta2: self.adam_beta2,
            adam_epsilon: self.adam_epsilon,
            align_batch_size: self.align_batch_size,
            align_learning_rate: self.align_learning_rate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub max_new_tokens: usize,
    pub workers: usize,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            max_new_tokens: 32,
            workers: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisSection {
    pub pool: Pool,
    /// Benchmarks entering the aggregate; empty means every column.
    pub benchmarks: Vec<String>,
    pub format: ReportFormat,
    pub base: Vec<String>,
    pub alt: Vec<String>,
}

impl ExperimentConfig {
    /// Defaults, overlaid with the file (if any), then with each `key=value`.
    pub fn load(path: Option<&Path>, sets: &[String]) -> Result<Self> {
        let mut tree = toml::Value::try_from(ExperimentConfig::default()).expect("defaults serialize");
        if let Some(path) = path {
            let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
            let file: toml::Table =
                toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
            merge(&mut tree, toml::Value::Table(file));
        }
        for s in sets {
            apply_set(&mut tree, s)?;
        }
        let cfg: ExperimentConfig = tree.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.model.backbones.is_empty() || self.model.backbones.len() > 2 {
            return bad(format!("model.backbones needs one or two entries, got {}", self.model.backbones.len()));
        }
        for b in &self.model.backbones {
            patch_grid(self.image.resolution, b.patch_size).map_err(|e| Error::Config(e.to_string()))?;
        }
        if !(self.data.epochs.is_finite() && self.data.epochs > 0.0) {
            return bad(format!("data.epochs must be positive, got {}", self.data.epochs));
        }
        if self.data.sources.is_empty() {
            return bad("data.sources needs at least one entry".into());
        }
        if self.data.synth.images == 0 {
            return bad("data.synth.images must be at least 1".into());
        }
        if self.eval.workers == 0 || self.eval.max_new_tokens == 0 {
            return bad("eval.workers and eval.max_new_tokens must be at least 1".into());
        }
        self.train
            .hyperparameters()
            .validate()
            .map_err(|e| Error::Config(format!("train: {e}")))
    }

    pub fn vlm_config(&self) -> VlmConfig {
        VlmConfig {
            image: self.image.clone(),
            backbones: self.model.backbones.clone(),
            projector_hidden: self.model.projector_hidden,
            lm: self.model.lm.clone(),
        }
    }

    pub fn synth_config(&self) -> SynthConfig {
        let s = &self.data.synth;
        SynthConfig {
            seed: self.seed,
            images: s.images,
            canvas: s.canvas.unwrap_or(self.image.resolution),
            min_objects: s.min_objects,
            max_objects: s.max_objects,
            language_only: s.language_only,
        }
    }

    pub fn mixture(&self) -> MixtureConfig {
        MixtureConfig {
            sources: self
                .data
                .sources
                .iter()
                .map(|s| SourceEntry {
                    name: s.name.clone(),
                    include: s.include,
                })
                .collect(),
            include_language_only: self.data.include_language_only,
            epoch_count: self.data.epochs,
            seed: self.seed,
        }
    }

    /// SHA-256 of the canonical JSON rendering of the resolved config.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }
}

fn merge(base: &mut toml::Value, over: toml::Value) {
    match (base, over) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Applies `a.b.c=value`. Numeric segments index arrays; the value is read
/// as a TOML literal and falls back to a bare string.
fn apply_set(tree: &mut toml::Value, assignment: &str) -> Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{assignment}` is not of the form key=value")))?;
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let segments: Vec<&str> = key.trim().split('.').collect();
    if segments.iter().any(|s| s.is_empty()) {
        return Err(Error::Config(format!("malformed key `{key}`")));
    }
    let mut node = tree;
    for (i, seg) in segments.iter().enumerate() {
        let last = i + 1 == segments.len();
        node = match node {
            toml::Value::Table(t) => {
                if last {
                    t.insert(seg.to_string(), value);
                    return Ok(());
                }
                t.entry(seg.to_string())
                    .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            }
            toml::Value::Array(a) => {
                let idx: usize = seg
                    .parse()
                    .map_err(|_| Error::Config(format!("`{seg}` in `{key}` must be an array index")))?;
                let len = a.len();
                let slot = a
                    .get_mut(idx)
                    .ok_or_else(|| Error::Config(format!("index {idx} in `{key}` is out of range (len {len})")))?;
                if last {
                    *slot = value;
                    return Ok(());
                }
                slot
            }
            _ => return Err(Error::Config(format!("`{key}` descends into a non-table value"))),
        };
    }
    unreachable!("loop returns on the last segment")
}
