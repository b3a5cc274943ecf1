use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::data::synth::Probe;
use crate::data::{decode_bbox, BBox, SynthDataset, TaskKind};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum TaskFamily {
    Vqa,
    Localization,
    ClosedSet,
}

impl TaskFamily {
    pub fn name(self) -> &'static str {
        match self {
            TaskFamily::Vqa => "vqa",
            TaskFamily::Localization => "localization",
            TaskFamily::ClosedSet => "closed-set",
        }
    }

    /// Trigger applied to questions when the task header names none.
    pub fn default_trigger(self) -> TaskKind {
        match self {
            TaskFamily::Vqa | TaskFamily::ClosedSet => TaskKind::Vqa,
            TaskFamily::Localization => TaskKind::Localization,
        }
    }
}

impl fmt::Display for TaskFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TaskFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [TaskFamily::Vqa, TaskFamily::Localization, TaskFamily::ClosedSet]
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::Unknown {
                kind: "task family",
                name: s.into(),
            })
    }
}

/// Task-level settings; the first line of a task file.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct TaskHeader {
    pub name: String,
    pub family: TaskFamily,
    /// IoU threshold; localization only.
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub threshold: Option<f64>,
    /// Answer options; closed-set only.
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub options: Option<Vec<String>>,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub trigger: Option<TaskKind>,
}

/// A question with its references: acceptable answers (vqa), the encoded
/// ground-truth box (localization) or the gold option (closed-set).
#[derive(Debug, Clone, PartialEq)]
pub struct EvalExample {
    pub id: String,
    pub image: Option<String>,
    pub question: String,
    pub references: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalTask {
    pub header: TaskHeader,
    pub examples: Vec<EvalExample>,
    boxes: Vec<Option<BBox>>,
}

impl EvalTask {
    pub fn new(header: TaskHeader, examples: Vec<EvalExample>) -> Result<Self> {
        let invalid = |msg: String| Err(Error::InvalidArgument(format!("task {}: {msg}", header.name)));
        match header.family {
            TaskFamily::Localization => match header.threshold {
                Some(t) if t > 0.0 && t <= 1.0 => {}
                _ => return invalid("localization needs a threshold in (0, 1]".into()),
            },
            _ if header.threshold.is_some() => return invalid("only localization tasks take a threshold".into()),
            _ => {}
        }
        match (&header.family, &header.options) {
            (TaskFamily::ClosedSet, Some(o)) if o.len() >= 2 => {}
            (TaskFamily::ClosedSet, _) => return invalid("closed-set tasks need at least two options".into()),
            (_, Some(_)) => return invalid("only closed-set tasks take options".into()),
            _ => {}
        }
        if examples.is_empty() {
            return invalid("no examples".into());
        }
        let mut boxes = Vec::with_capacity(examples.len());
        for ex in &examples {
            if ex.references.is_empty() {
                return invalid(format!("example {} has no reference", ex.id));
            }
            if ex.question.is_empty() {
                return invalid(format!("example {} has an empty question", ex.id));
            }
            match header.family {
                TaskFamily::Localization => boxes.push(Some(decode_bbox(&ex.references[0])?)),
                TaskFamily::ClosedSet => {
                    let options = header.options.as_ref().expect("checked");
                    if !options.contains(&ex.references[0]) {
                        return invalid(format!("gold answer of {} is not an option", ex.id));
                    }
                    boxes.push(None);
                }
                TaskFamily::Vqa => boxes.push(None),
            }
        }
        Ok(EvalTask {
            header,
            examples,
            boxes,
        })
    }

    pub fn name(&self) -> &str {
        &self.header.name
    }

    pub fn family(&self) -> TaskFamily {
        self.header.family
    }

    pub fn options(&self) -> &[String] {
        self.header.options.as_deref().unwrap_or(&[])
    }

    pub fn trigger(&self) -> TaskKind {
        self.header.trigger.unwrap_or(self.header.family.default_trigger())
    }

    pub(crate) fn gt_box(&self, index: usize) -> Option<&BBox> {
        self.boxes[index].as_ref()
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TranscriptEntry {
    pub id: String,
    pub prompt: String,
    pub prediction: String,
    pub score: f64,
    pub flags: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvalRecord {
    pub task: String,
    pub family: TaskFamily,
    /// Mean per-example score in percent.
    pub accuracy: f64,
    pub transcript: Vec<TranscriptEntry>,
}

impl EvalRecord {
    pub fn from_entries(task: &EvalTask, transcript: Vec<TranscriptEntry>) -> Self {
        let n = transcript.len().max(1) as f64;
        let accuracy = 100.0 * transcript.iter().map(|e| e.score).sum::<f64>() / n;
        EvalRecord {
            task: task.name().into(),
            family: task.family(),
            accuracy,
            transcript,
        }
    }

    pub fn scores(&self) -> Vec<f64> {
        self.transcript.iter().map(|e| e.score).collect()
    }
}

/// Evaluation splits over a synthetic dataset: color (open-ended), count
/// (16 options), spatial True/False, presence Yes/No, and localization at
/// IoU 0.5 and 0.25.
pub fn synth_tasks(ds: &SynthDataset) -> Result<Vec<EvalTask>> {
    let pick = |probe: Probe| -> Vec<EvalExample> {
        ds.questions
            .iter()
            .filter(|q| q.probe == probe)
            .map(|q| {
                let ex = &ds.examples[q.example];
                EvalExample {
                    id: ex.id.clone(),
                    image: ex.image.clone(),
                    question: q.question.clone(),
                    references: vec![q.answer.clone()],
                }
            })
            .collect()
    };
    let header = |name: &str, family, threshold, options: Option<Vec<String>>| TaskHeader {
        name: name.into(),
        family,
        threshold,
        options,
        trigger: None,
    };
    let strings = |xs: &[&str]| xs.iter().map(|s| String::from(*s)).collect::<Vec<_>>();
    let counts: Vec<String> = (0..16).map(|i| format!("{i}")).collect();
    let loc = pick(Probe::Localization);
    Ok(vec![
        EvalTask::new(header("synth-color", TaskFamily::Vqa, None, None), pick(Probe::Color))?,
        EvalTask::new(header("synth-count", TaskFamily::ClosedSet, None, Some(counts)), pick(Probe::Count))?,
        EvalTask::new(
            header("synth-spatial", TaskFamily::ClosedSet, None, Some(strings(&["True", "False"]))),
            pick(Probe::Spatial),
        )?,
        EvalTask::new(
            header("synth-presence", TaskFamily::ClosedSet, None, Some(strings(&["Yes", "No"]))),
            pick(Probe::Presence),
        )?,
        EvalTask::new(header("synth-loc", TaskFamily::Localization, Some(0.5), None), loc.clone())?,
        EvalTask::new(header("synth-loc-loose", TaskFamily::Localization, Some(0.25), None), loc)?,
    ])
}
