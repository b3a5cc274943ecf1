use alloc::format;
use alloc::vec::Vec;

use crate::data::{build_mixture_filtered, Dataset, ImageSource, MixtureConfig};
use crate::error::{Error, Result};
use crate::model::Vlm;
use crate::params::Grads;
use crate::rng;

use super::ledger::{StageLedger, TrainLedger};
use super::optim::{clip_grad_norm, AdamW};
use super::plan::{Hyperparameters, StagePlan};
use super::schedule::lr_at;

/// Progress of one optimizer step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    pub stage: usize,
    pub step: usize,
    pub total_steps: usize,
    pub loss: f64,
    pub lr: f64,
    pub grad_norm: f64,
}

/// Runs every stage of `plan` in order. Each stage streams its subset of the
/// mixture in a fixed, seed-determined order; parameters outside the stage's
/// trainable set are never written.
pub fn train(
    model: &mut Vlm,
    plan: &StagePlan,
    mixture: &MixtureConfig,
    datasets: &[Dataset],
    images: &dyn ImageSource,
    h: &Hyperparameters,
    on_step: &mut dyn FnMut(&StepReport),
) -> Result<TrainLedger> {
    plan.validate()?;
    h.validate()?;
    let mut ledger = TrainLedger {
        procedure: plan.procedure,
        stages: Vec::with_capacity(plan.stages.len()),
    };
    for (si, stage) in plan.stages.iter().enumerate() {
        let cfg = MixtureConfig {
            seed: rng::derive_seed(mixture.seed, si as u64),
            ..mixture.clone()
        };
        let stream = build_mixture_filtered(&cfg, datasets, |ex| stage.subset.accepts(ex))?;
        let total_steps = stream.len().div_ceil(stage.batch_size);
        let trainable_params = model.params.count(stage.trainable);
        let mut opt = AdamW::new(
            &model.params,
            stage.trainable,
            h.adam_beta1,
            h.adam_beta2,
            h.adam_epsilon,
            h.weight_decay,
        );
        let mut g = Grads::new(&model.params, stage.trainable);
        let mut epoch_nll: Vec<(f64, usize)> = Vec::new();
        let mut record = StageLedger {
            name: stage.name.clone(),
            subset: stage.subset,
            trainable: stage.trainable,
            examples: stream.len(),
            batch_size: stage.batch_size,
            steps: total_steps,
            trainable_params,
            param_steps: total_steps as u64 * trainable_params as u64,
            final_loss: None,
            epoch_losses: Vec::new(),
            skipped: 0,
            clipped_steps: 0,
        };

        for (step, batch) in stream.chunks(stage.batch_size).enumerate() {
            let mut prepared = Vec::with_capacity(batch.len());
            for item in batch {
                let ex = &item.example;
                let img = match &ex.image {
                    Some(r) => Some(model.preprocess(&*images.image(r)?)?),
                    None => None,
                };
                match model.format(&ex.prompt, Some(&ex.response), img.is_some()) {
                    Ok(prompt) => prepared.push((item.epoch as usize, img, prompt)),
                    Err(Error::ContextOverflow { .. }) => record.skipped += 1,
                    Err(e) => return Err(e),
                }
            }
            let scored: usize = prepared.iter().map(|(_, _, p)| p.scored_positions()).sum();
            let lr = lr_at(stage.peak_lr, h.warmup_ratio, step, total_steps)?;
            if scored == 0 {
                continue;
            }
            g.zero();
            let mut batch_nll = 0.0;
            for (epoch, img, prompt) in &prepared {
                let ls = model.accumulate_gradients(img.as_ref(), prompt, &mut g, 1.0 / scored as f64)?;
                if epoch_nll.len() <= *epoch {
                    epoch_nll.resize(epoch + 1, (0.0, 0));
                }
                epoch_nll[*epoch].0 += ls.nll_sum;
                epoch_nll[*epoch].1 += ls.scored;
                batch_nll += ls.nll_sum;
            }
            let loss = batch_nll / scored as f64;
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss {
                    stage: si,
                    step,
                    detail: format!("loss {loss} at lr {lr:e}"),
                });
            }
            let grad_norm = clip_grad_norm(&model.params, &mut g, h.max_grad_norm);
            if !grad_norm.is_finite() {
                return Err(Error::NonFiniteLoss {
                    stage: si,
                    step,
                    detail: format!("gradient norm {grad_norm} with loss {loss}"),
                });
            }
            if grad_norm > h.max_grad_norm {
                record.clipped_steps += 1;
            }
            opt.step(&mut model.params, &g, lr);
            record.final_loss = Some(loss);
            on_step(&StepReport {
                stage: si,
                step,
                total_steps,
                loss,
                lr,
                grad_norm,
            });
        }
        record.epoch_losses = epoch_nll
            .into_iter()
            .filter(|(_, n)| *n > 0)
            .map(|(s, n)| s / n as f64)
            .collect();
        ledger.stages.push(record);
    }
    Ok(ledger)
}
