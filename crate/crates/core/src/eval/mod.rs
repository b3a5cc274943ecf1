//! Evaluation protocol: greedy predictions scored per task family.

mod run;
mod score;
mod task;

pub use run::{evaluate_example, run_benchmark, GreedyPredictor, Prediction, Predictor};
pub use score::{iou, normalize_answer, resolve_option, score_closed_set, score_localization, score_vqa, LocalizationScore};
pub use task::{synth_tasks, EvalExample, EvalRecord, EvalTask, TaskFamily, TaskHeader, TranscriptEntry};
