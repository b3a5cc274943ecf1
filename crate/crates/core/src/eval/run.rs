use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::data::{apply_trigger_prompt, ImageSource, TaskKind};
use crate::error::Result;
use crate::image::RawImage;
use crate::model::Vlm;

use super::score::{score_closed_set, score_localization, score_vqa};
use super::task::{EvalRecord, EvalTask, TranscriptEntry};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prediction {
    pub text: String,
    pub truncated: bool,
}

/// Anything that answers a prompt about an optional image.
pub trait Predictor {
    fn predict(&self, image: Option<&RawImage>, prompt: &str) -> Result<Prediction>;
}

/// Greedy decoding with a fixed token budget.
#[derive(Debug, Clone, Copy)]
pub struct GreedyPredictor<'a> {
    pub vlm: &'a Vlm,
    pub max_new: usize,
}

impl Predictor for GreedyPredictor<'_> {
    fn predict(&self, image: Option<&RawImage>, prompt: &str) -> Result<Prediction> {
        let processed = image.map(|i| self.vlm.preprocess(i)).transpose()?;
        let g = self.vlm.generate_greedy(processed.as_ref(), prompt, self.max_new)?;
        Ok(Prediction {
            text: g.text,
            truncated: g.truncated,
        })
    }
}

/// Scores one example. Failures to load, prompt or generate score 0 and
/// are flagged rather than propagated.
pub fn evaluate_example(
    predictor: &dyn Predictor,
    task: &EvalTask,
    index: usize,
    images: &dyn ImageSource,
) -> TranscriptEntry {
    let ex = &task.examples[index];
    let trigger = task.trigger();
    let options = (trigger == TaskKind::MultipleChoice).then(|| task.options());
    let mut flags = Vec::new();
    let prompt = match apply_trigger_prompt(trigger, &ex.question, options) {
        Ok(p) => p,
        Err(e) => {
            return TranscriptEntry {
                id: ex.id.clone(),
                prompt: ex.question.clone(),
                prediction: String::new(),
                score: 0.0,
                flags: vec![format!("prompt-failure: {e}")],
            }
        }
    };
    let prediction = match &ex.image {
        Some(r) => images.image(r).and_then(|img| predictor.predict(Some(&img), &prompt)),
        None => predictor.predict(None, &prompt),
    };
    let prediction = match prediction {
        Ok(p) => p,
        Err(e) => {
            return TranscriptEntry {
                id: ex.id.clone(),
                prompt,
                prediction: String::new(),
                score: 0.0,
                flags: vec![format!("generation-failure: {e}")],
            }
        }
    };
    if prediction.truncated {
        flags.push(String::from("truncated"));
    }
    let score = match task.family() {
        super::TaskFamily::Vqa => score_vqa(&prediction.text, &ex.references),
        super::TaskFamily::ClosedSet => score_closed_set(&prediction.text, &ex.references[0], task.options()),
        super::TaskFamily::Localization => {
            let gt = task.gt_box(index).expect("validated");
            let s = score_localization(&prediction.text, gt, task.header.threshold.expect("validated"));
            if s.parse_failure {
                flags.push(String::from("parse-failure"));
            }
            s.score
        }
    };
    TranscriptEntry {
        id: ex.id.clone(),
        prompt,
        prediction: prediction.text,
        score,
        flags,
    }
}

pub fn run_benchmark(predictor: &dyn Predictor, task: &EvalTask, images: &dyn ImageSource) -> EvalRecord {
    let transcript = (0..task.examples.len())
        .map(|i| evaluate_example(predictor, task, i, images))
        .collect();
    EvalRecord::from_entries(task, transcript)
}
