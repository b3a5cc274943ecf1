use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::params::{ComponentSet, ParamStore};

use super::plan::{DataSubset, Procedure, StagePlan};

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StageLedger {
    pub name: String,
    pub subset: DataSubset,
    pub trainable: ComponentSet,
    pub examples: usize,
    pub batch_size: usize,
    pub steps: usize,
    /// Trainable parameters updated at every step of the stage.
    pub trainable_params: usize,
    /// `steps × trainable_params`, the compute proxy.
    pub param_steps: u64,
    pub final_loss: Option<f64>,
    /// Token-weighted mean loss of each (possibly partial) pass over the data.
    pub epoch_losses: Vec<f64>,
    /// Examples dropped because they did not fit in the context window.
    pub skipped: usize,
    /// Steps whose gradient norm exceeded the clip threshold.
    pub clipped_steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainLedger {
    pub procedure: Procedure,
    pub stages: Vec<StageLedger>,
}

impl TrainLedger {
    pub fn total_steps(&self) -> usize {
        self.stages.iter().map(|s| s.steps).sum()
    }

    pub fn total_param_steps(&self) -> u64 {
        self.stages.iter().map(|s| s.param_steps).sum()
    }
}

/// Ledger a plan would produce for the given per-stage example counts,
/// without running it.
pub fn planned_ledger(plan: &StagePlan, examples: &[usize], params: &ParamStore) -> Result<TrainLedger> {
    if examples.len() != plan.stages.len() {
        return Err(Error::InvalidArgument(format!(
            "{} example counts for {} stages",
            examples.len(),
            plan.stages.len()
        )));
    }
    let stages = plan
        .stages
        .iter()
        .zip(examples)
        .map(|(s, &n)| {
            let steps = n.div_ceil(s.batch_size);
            let trainable_params = params.count(s.trainable);
            StageLedger {
                name: s.name.clone(),
                subset: s.subset,
                trainable: s.trainable,
                examples: n,
                batch_size: s.batch_size,
                steps,
                trainable_params,
                param_steps: steps as u64 * trainable_params as u64,
                final_loss: None,
                epoch_losses: Vec::new(),
                skipped: 0,
                clipped_steps: 0,
            }
        })
        .collect();
    Ok(TrainLedger {
        procedure: plan.procedure,
        stages,
    })
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StageShare {
    pub name: String,
    pub steps: usize,
    pub step_share: f64,
    pub param_steps: u64,
    pub param_step_share: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CostReport {
    pub stages: Vec<StageShare>,
    /// Fraction of all steps spent in align stages (0 for single-stage plans).
    pub align_step_share: f64,
    pub align_param_step_share: f64,
}

pub fn cost_report(ledger: &TrainLedger) -> CostReport {
    let steps = ledger.total_steps().max(1) as f64;
    let param_steps = ledger.total_param_steps().max(1) as f64;
    let stages: Vec<StageShare> = ledger
        .stages
        .iter()
        .map(|s| StageShare {
            name: s.name.clone(),
            steps: s.steps,
            step_share: s.steps as f64 / steps,
            param_steps: s.param_steps,
            param_step_share: s.param_steps as f64 / param_steps,
        })
        .collect();
    let (mut align_step_share, mut align_param_step_share) = (0.0, 0.0);
    for (s, share) in ledger.stages.iter().zip(&stages) {
        if s.subset == DataSubset::Align {
            align_step_share += share.step_share;
            align_param_step_share += share.param_step_share;
        }
    }
    CostReport {
        stages,
        align_step_share,
        align_param_step_share,
    }
}
