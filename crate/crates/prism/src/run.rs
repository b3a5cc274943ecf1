//! The commands behind the CLI, callable in-process.

use std::path::{Path, PathBuf};

use prism_core::data::{synth_generate, Dataset};
use prism_core::eval::{evaluate_example, EvalRecord, EvalTask, GreedyPredictor, TranscriptEntry};
use prism_core::model::Vlm;
use prism_core::stats::{ModelKey, ScoreTable};
use prism_core::train::{cost_report, make_stage_plan, train, CostReport, StepReport, TrainLedger};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::checkpoint::{load_checkpoint, save_checkpoint};
use crate::config::ExperimentConfig;
use crate::dataset::{load_dataset, load_task, write_synth, ImageStore, DATA_FILE};
use crate::error::{Error, Result};
use crate::manifest::{sidecar, write_manifest, Manifest, MANIFEST};
use crate::report::{analyze, emit_report, Analysis};
use crate::scores::{resolve_model, write_scores};

/// Directory where generated mixture sources are materialized and reused.
pub const CACHE_ENV: &str = "PRISM_CACHE_DIR";

pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const LEDGER_FILE: &str = "ledger.json";
pub const COST_FILE: &str = "cost.json";
pub const CONFIG_FILE: &str = "config.toml";

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(Error::io(dir))?;
    }
    std::fs::write(path, contents).map_err(Error::io(path))
}

fn pretty<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializes") + "\n"
}

/// Generates the configured synthetic dataset into `out`.
pub fn cmd_synth(cfg: &ExperimentConfig, out: &Path) -> Result<Manifest> {
    let ds = synth_generate(&cfg.synth_config())?;
    let files = write_synth(out, &ds)?;
    write_manifest(&out.join(MANIFEST), "synth", cfg, &files)
}

fn generated_source(cfg: &ExperimentConfig, name: &str, images: &mut ImageStore) -> Result<Dataset> {
    let synth = cfg.synth_config();
    if let Some(cache) = std::env::var_os(CACHE_ENV) {
        let key = hex::encode(Sha256::digest(format!("{synth:?}").as_bytes()));
        let dir = PathBuf::from(cache).join(format!("synth-{}", &key[..16]));
        if !dir.join(DATA_FILE).exists() {
            write_synth(&dir, &synth_generate(&synth)?)?;
        }
        return load_dataset(&dir, name, images);
    }
    let ds = synth_generate(&synth)?;
    images.extend(ds.images);
    Ok(Dataset {
        name: name.into(),
        examples: ds.examples,
    })
}

/// Loads every mixture source named in the config.
pub fn resolve_sources(cfg: &ExperimentConfig) -> Result<(Vec<Dataset>, ImageStore)> {
    let mut images = ImageStore::new();
    let datasets = cfg
        .data
        .sources
        .iter()
        .map(|s| match &s.path {
            Some(p) => load_dataset(Path::new(p), &s.name, &mut images),
            None => generated_source(cfg, &s.name, &mut images),
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((datasets, images))
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutput {
    pub ledger: TrainLedger,
    pub cost: CostReport,
    pub manifest: Manifest,
}

/// Trains from scratch and writes checkpoint, ledger, cost report, the
/// resolved config and a manifest into `out`.
pub fn cmd_train(cfg: &ExperimentConfig, out: &Path, on_step: &mut dyn FnMut(&StepReport)) -> Result<TrainOutput> {
    let (datasets, images) = resolve_sources(cfg)?;
    let h = cfg.train.hyperparameters();
    let plan = make_stage_plan(cfg.train.procedure, &h);
    let mut model = Vlm::new(cfg.vlm_config(), cfg.seed)?;
    let ledger = train(&mut model, &plan, &cfg.mixture(), &datasets, &images, &h, on_step)?;
    let cost = cost_report(&ledger);
    save_checkpoint(&out.join(CHECKPOINT_FILE), cfg, &model)?;
    write_file(&out.join(LEDGER_FILE), pretty(&ledger))?;
    write_file(&out.join(COST_FILE), pretty(&cost))?;
    write_file(&out.join(CONFIG_FILE), cfg.to_toml())?;
    let files = [CHECKPOINT_FILE, LEDGER_FILE, COST_FILE, CONFIG_FILE].map(PathBuf::from);
    let manifest = write_manifest(&out.join(MANIFEST), "train", cfg, &files)?;
    Ok(TrainOutput { ledger, cost, manifest })
}

/// Greedy evaluation of every example, spread over `workers` threads; the
/// transcript keeps the task's example order.
pub fn evaluate_task(model: &Vlm, task: &EvalTask, images: &ImageStore, max_new: usize, workers: usize) -> EvalRecord {
    let predictor = GreedyPredictor { vlm: model, max_new };
    let n = task.examples.len();
    let workers = workers.clamp(1, n.max(1));
    let mut slots: Vec<Option<TranscriptEntry>> = vec![None; n];
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let predictor = &predictor;
                s.spawn(move || {
                    (w..n)
                        .step_by(workers)
                        .map(|i| (i, evaluate_example(predictor, task, i, images)))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            for (i, e) in h.join().expect("evaluation worker panicked") {
                slots[i] = Some(e);
            }
        }
    });
    EvalRecord::from_entries(task, slots.into_iter().map(|e| e.expect("every index evaluated")).collect())
}

/// One transcript line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TranscriptLine {
    pub task: String,
    pub id: String,
    pub prompt: String,
    pub prediction: String,
    pub score: f64,
    pub flags: Vec<String>,
}

pub fn read_transcript(path: &Path) -> Result<Vec<TranscriptLine>> {
    let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::format(path, i + 1, e)))
        .collect()
}

#[derive(Debug, Clone, Default)]
pub struct EvalOptions {
    pub workers: Option<usize>,
    pub max_new_tokens: Option<usize>,
    /// Also write accuracies as a score file under this model key.
    pub scores: Option<(PathBuf, ModelKey)>,
}

pub fn cmd_evaluate(checkpoint: &Path, tasks: &[PathBuf], out: &Path, opts: &EvalOptions) -> Result<Vec<EvalRecord>> {
    let (mut cfg, model) = load_checkpoint(checkpoint)?;
    if let Some(w) = opts.workers {
        cfg.eval.workers = w;
    }
    if let Some(m) = opts.max_new_tokens {
        cfg.eval.max_new_tokens = m;
    }
    cfg.validate()?;
    if tasks.is_empty() {
        return Err(Error::Config("at least one task file is required".into()));
    }
    let mut records = Vec::with_capacity(tasks.len());
    let mut text = String::new();
    for path in tasks {
        let (task, images) = load_task(path)?;
        let record = evaluate_task(&model, &task, &images, cfg.eval.max_new_tokens, cfg.eval.workers);
        for e in &record.transcript {
            let line = TranscriptLine {
                task: record.task.clone(),
                id: e.id.clone(),
                prompt: e.prompt.clone(),
                prediction: e.prediction.clone(),
                score: e.score,
                flags: e.flags.clone(),
            };
            text.push_str(&serde_json::to_string(&line).expect("serializes"));
            text.push('\n');
        }
        records.push(record);
    }
    write_file(out, &text)?;
    let name = |p: &Path| PathBuf::from(p.file_name().expect("file path"));
    write_manifest(&sidecar(out), "evaluate", &cfg, &[name(out)])?;
    if let Some((path, key)) = &opts.scores {
        let cells: Vec<(ModelKey, String, Option<f64>)> = records
            .iter()
            .map(|r| (key.clone(), r.task.clone(), Some(r.accuracy)))
            .collect();
        let table = ScoreTable::from_rows(cells.iter().map(|(m, b, v)| (m, b.as_str(), *v)))?;
        write_file(path, write_scores(&table))?;
        write_manifest(&sidecar(path), "evaluate", &cfg, &[name(path)])?;
    }
    Ok(records)
}

/// Runs the configured analysis over `raw`; with `out`, writes the report
/// in the configured format, the comparisons and a manifest.
pub fn cmd_analyze(cfg: &ExperimentConfig, raw: &ScoreTable, out: Option<&Path>) -> Result<Analysis> {
    let a = &cfg.analysis;
    let comparisons = match (a.base.is_empty(), a.alt.is_empty()) {
        (true, true) => vec![],
        (false, false) => {
            let keys = |specs: &[String]| specs.iter().map(|s| resolve_model(raw, s)).collect::<Result<Vec<_>>>();
            vec![(keys(&a.base)?, keys(&a.alt)?)]
        }
        _ => return Err(Error::Config("analysis needs both base and alternate models, or neither".into())),
    };
    let analysis = analyze(raw, a.pool, &a.benchmarks, &comparisons)?;
    if let Some(out) = out {
        let report = PathBuf::from(format!("report.{}", a.format.extension()));
        write_file(&out.join(&report), emit_report(&analysis, a.format))?;
        let comps = PathBuf::from("comparisons.json");
        write_file(&out.join(&comps), pretty(&analysis.comparisons))?;
        write_manifest(&out.join(MANIFEST), "analyze", cfg, &[report, comps])?;
    }
    Ok(analysis)
}
