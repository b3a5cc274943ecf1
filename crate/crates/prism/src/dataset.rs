//! Dataset directories: `data.jsonl` (one record per line) with PNG images
//! beside it, plus `<task>.task.jsonl` evaluation files.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use prism_core::data::{Dataset, InstructExample, SynthDataset, TaskKind};
use prism_core::eval::{synth_tasks, EvalExample, EvalTask, TaskHeader};
use prism_core::image::RawImage;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::png::{read_png, write_png};

pub const DATA_FILE: &str = "data.jsonl";
pub const TASK_SUFFIX: &str = ".task.jsonl";

/// Images keyed by the (resolved) reference stored in records.
pub type ImageStore = BTreeMap<String, RawImage>;

fn create(path: &Path) -> Result<BufWriter<fs::File>> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(Error::io(dir))?;
    }
    Ok(BufWriter::new(fs::File::create(path).map_err(Error::io(path))?))
}

fn write_lines<T: Serialize>(path: &Path, head: Option<String>, rows: &[T]) -> Result<()> {
    let mut text = head.map(|h| h + "\n").unwrap_or_default();
    for r in rows {
        text.push_str(&serde_json::to_string(r).expect("records serialize"));
        text.push('\n');
    }
    let mut w = create(path)?;
    w.write_all(text.as_bytes()).and_then(|_| w.flush()).map_err(Error::io(path))
}

/// Non-empty lines with their 1-based line numbers.
fn read_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let f = fs::File::open(path).map_err(Error::io(path))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(Error::io(path))?;
        if !line.trim().is_empty() {
            out.push((i + 1, line));
        }
    }
    Ok(out)
}

pub fn write_examples(path: &Path, examples: &[InstructExample]) -> Result<()> {
    write_lines(path, None, examples)
}

pub fn read_examples(path: &Path) -> Result<Vec<InstructExample>> {
    read_lines(path)?
        .into_iter()
        .map(|(n, line)| {
            let ex: InstructExample = serde_json::from_str(&line).map_err(|e| Error::format(path, n, e))?;
            ex.validate().map_err(|e| Error::format(path, n, e))?;
            Ok(ex)
        })
        .collect()
}

/// One line of a task file: the record format plus optional references
/// (defaulting to `[response]`). `prompt` holds the bare question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskRecord {
    pub id: String,
    pub image: Option<String>,
    pub task_kind: TaskKind,
    pub prompt: String,
    pub response: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub references: Option<Vec<String>>,
}

pub fn write_task(path: &Path, task: &EvalTask) -> Result<()> {
    let kind = task.trigger();
    let rows: Vec<TaskRecord> = task
        .examples
        .iter()
        .map(|ex| TaskRecord {
            id: ex.id.clone(),
            image: ex.image.clone(),
            task_kind: kind,
            prompt: ex.question.clone(),
            response: ex.references[0].clone(),
            references: (ex.references.len() > 1).then(|| ex.references.clone()),
        })
        .collect();
    let head = serde_json::to_string(&task.header).expect("header serializes");
    write_lines(path, Some(head), &rows)
}

/// Reads a task file; image references are left as written.
pub fn read_task(path: &Path) -> Result<EvalTask> {
    let lines = read_lines(path)?;
    let Some(((n, head), rest)) = lines.split_first() else {
        return Err(Error::format(path, 1, "empty task file"));
    };
    let header: TaskHeader = serde_json::from_str(head).map_err(|e| Error::format(path, *n, e))?;
    let examples = rest
        .iter()
        .map(|(n, line)| {
            let r: TaskRecord = serde_json::from_str(line).map_err(|e| Error::format(path, *n, e))?;
            Ok(EvalExample {
                id: r.id,
                image: r.image,
                question: r.prompt,
                references: r.references.unwrap_or_else(|| vec![r.response]),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalTask::new(header, examples)?)
}

/// Writes a generated dataset into `dir`; returns the written paths relative
/// to `dir`, in a fixed order.
pub fn write_synth(dir: &Path, ds: &SynthDataset) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    write_examples(&dir.join(DATA_FILE), &ds.examples)?;
    written.push(PathBuf::from(DATA_FILE));
    for (reference, img) in &ds.images {
        write_png(&dir.join(reference), img)?;
        written.push(PathBuf::from(reference));
    }
    for task in synth_tasks(ds)? {
        let name = format!("{}{TASK_SUFFIX}", task.name());
        write_task(&dir.join(&name), &task)?;
        written.push(PathBuf::from(name));
    }
    Ok(written)
}

fn data_file(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join(DATA_FILE)
    } else {
        path.to_path_buf()
    }
}

fn resolve(base: &Path, reference: &str) -> String {
    base.join(reference).to_string_lossy().into_owned()
}

/// Loads `path` (a dataset directory or its `data.jsonl`) and every image it
/// references. References are rewritten relative to the working directory so
/// several datasets can share one [`ImageStore`].
pub fn load_dataset(path: &Path, name: &str, images: &mut ImageStore) -> Result<Dataset> {
    let file = data_file(path);
    let base = file.parent().unwrap_or(Path::new("")).to_path_buf();
    let mut examples = read_examples(&file)?;
    for ex in &mut examples {
        if let Some(r) = &mut ex.image {
            *r = resolve(&base, r);
            if !images.contains_key(r.as_str()) {
                images.insert(r.clone(), read_png(Path::new(r.as_str()))?);
            }
        }
    }
    Ok(Dataset {
        name: name.into(),
        examples,
    })
}

/// Reads a task file and the images it references, resolved against the
/// file's directory.
pub fn load_task(path: &Path) -> Result<(EvalTask, ImageStore)> {
    let task = read_task(path)?;
    let base = path.parent().unwrap_or(Path::new("")).to_path_buf();
    let mut images = ImageStore::new();
    for r in task.examples.iter().filter_map(|ex| ex.image.as_ref()) {
        if !images.contains_key(r) {
            // Missing files are left to the evaluator, which flags them.
            if let Ok(img) = read_png(&base.join(r)) {
                images.insert(r.clone(), img);
            }
        }
    }
    Ok((task, images))
}
