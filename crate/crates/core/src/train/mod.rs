//! Staged optimization: stage plans with per-component freezing, a
//! warmup-cosine schedule, AdamW with global-norm clipping, and a ledger of
//! steps and trainable-parameter-steps.

mod ledger;
mod optim;
mod plan;
mod run;
mod schedule;

pub use ledger::{cost_report, planned_ledger, CostReport, StageLedger, StageShare, TrainLedger};
pub use optim::{clip_grad_norm, global_norm, AdamW};
pub use plan::{make_stage_plan, DataSubset, Hyperparameters, Procedure, Stage, StagePlan};
pub use run::{train, StepReport};
pub use schedule::{lr_at, warmup_steps};
