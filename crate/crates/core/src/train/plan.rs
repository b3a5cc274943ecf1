use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::data::{InstructExample, TaskKind};
use crate::error::{Error, Result};
use crate::params::{Component, ComponentSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Procedure {
    MultiStage,
    SingleStage,
    SingleStageFullFinetune,
    MultiStageFullFinetune,
}

impl Procedure {
    pub const ALL: [Procedure; 4] = [
        Procedure::MultiStage,
        Procedure::SingleStage,
        Procedure::SingleStageFullFinetune,
        Procedure::MultiStageFullFinetune,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Procedure::MultiStage => "multi-stage",
            Procedure::SingleStage => "single-stage",
            Procedure::SingleStageFullFinetune => "single-stage-full-finetune",
            Procedure::MultiStageFullFinetune => "multi-stage-full-finetune",
        }
    }
}

impl fmt::Display for Procedure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Procedure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Procedure::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Unknown {
                kind: "procedure",
                name: s.into(),
            })
    }
}

/// Which records a stage draws from the mixture.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum DataSubset {
    /// Image-caption pairs only.
    Align,
    /// The full instruct mixture.
    Instruct,
}

impl DataSubset {
    pub fn accepts(self, ex: &InstructExample) -> bool {
        match self {
            DataSubset::Align => ex.task_kind == TaskKind::Caption,
            DataSubset::Instruct => true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct Hyperparameters {
    pub batch_size: usize,
    pub max_grad_norm: f64,
    pub weight_decay: f64,
    pub learning_rate: f64,
    pub warmup_ratio: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    /// Batch size and peak learning rate of the projector-only align stage.
    pub align_batch_size: usize,
    pub align_learning_rate: f64,
}

impl Default for Hyperparameters {
    fn default() -> Self {
        Hyperparameters {
            batch_size: 128,
            max_grad_norm: 1.0,
            weight_decay: 0.1,
            learning_rate: 2e-5,
            warmup_ratio: 0.03,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            align_batch_size: 256,
            align_learning_rate: 1e-3,
        }
    }
}

impl Hyperparameters {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("max_grad_norm", self.max_grad_norm),
            ("learning_rate", self.learning_rate),
            ("adam_epsilon", self.adam_epsilon),
            ("align_learning_rate", self.align_learning_rate),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(Error::InvalidArgument(format!(
                "weight_decay must be non-negative, got {}",
                self.weight_decay
            )));
        }
        if self.batch_size == 0 || self.align_batch_size == 0 {
            return Err(Error::InvalidArgument("batch sizes must be positive".into()));
        }
        if !(self.warmup_ratio > 0.0 && self.warmup_ratio < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "warmup_ratio must lie in (0, 1), got {}",
                self.warmup_ratio
            )));
        }
        for (name, b) in [("adam_beta1", self.adam_beta1), ("adam_beta2", self.adam_beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::InvalidArgument(format!("{name} must lie in [0, 1), got {b}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Stage {
    pub name: String,
    pub trainable: ComponentSet,
    pub batch_size: usize,
    pub peak_lr: f64,
    pub subset: DataSubset,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StagePlan {
    pub procedure: Procedure,
    pub stages: Vec<Stage>,
}

impl StagePlan {
    pub fn validate(&self) -> Result<()> {
        if self.stages.is_empty() {
            return Err(Error::InvalidArgument("a stage plan needs at least one stage".into()));
        }
        for s in &self.stages {
            if !s.trainable.contains(Component::Projector) {
                return Err(Error::InvalidArgument(format!("stage {} must train the projector", s.name)));
            }
            if s.batch_size == 0 || s.peak_lr.is_nan() || s.peak_lr <= 0.0 {
                return Err(Error::InvalidArgument(format!("stage {} has a degenerate batch or lr", s.name)));
            }
        }
        Ok(())
    }
}

pub fn make_stage_plan(procedure: Procedure, h: &Hyperparameters) -> StagePlan {
    let finetune_set = match procedure {
        Procedure::MultiStage | Procedure::SingleStage => ComponentSet::of(&[Component::Projector, Component::Lm]),
        Procedure::SingleStageFullFinetune | Procedure::MultiStageFullFinetune => ComponentSet::all(),
    };
    let finetune = Stage {
        name: "finetune".into(),
        trainable: finetune_set,
        batch_size: h.batch_size,
        peak_lr: h.learning_rate,
        subset: DataSubset::Instruct,
    };
    let stages = match procedure {
        Procedure::SingleStage | Procedure::SingleStageFullFinetune => vec![finetune],
        Procedure::MultiStage | Procedure::MultiStageFullFinetune => vec![
            Stage {
                name: "align".into(),
                trainable: ComponentSet::of(&[Component::Projector]),
                batch_size: h.align_batch_size,
                peak_lr: h.align_learning_rate,
                subset: DataSubset::Align,
            },
            finetune,
        ],
    };
    StagePlan { procedure, stages }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plans() {
        let h = Hyperparameters::default();
        let single = make_stage_plan(Procedure::SingleStage, &h);
        assert_eq!(single.stages.len(), 1);
        assert_eq!(single.stages[0].trainable, ComponentSet::of(&[Component::Projector, Component::Lm]));
        assert_eq!((single.stages[0].batch_size, single.stages[0].peak_lr), (128, 2e-5));

        let multi = make_stage_plan(Procedure::MultiStage, &h);
        assert_eq!(multi.stages[0].trainable, ComponentSet::of(&[Component::Projector]));
        assert_eq!((multi.stages[0].batch_size, multi.stages[0].peak_lr), (256, 1e-3));
        assert_eq!(multi.stages[0].subset, DataSubset::Align);
        assert_eq!(multi.stages[1].trainable, ComponentSet::of(&[Component::Projector, Component::Lm]));

        let full = make_stage_plan(Procedure::SingleStageFullFinetune, &h);
        assert_eq!(full.stages[0].trainable, ComponentSet::all());
        let multi_full = make_stage_plan(Procedure::MultiStageFullFinetune, &h);
        assert_eq!(multi_full.stages[0].trainable, ComponentSet::of(&[Component::Projector]));
        assert_eq!(multi_full.stages[1].trainable, ComponentSet::all());
        for p in Procedure::ALL {
            make_stage_plan(p, &h).validate().unwrap();
            assert_eq!(p.name().parse::<Procedure>().unwrap(), p);
        }
        assert!("two-stage".parse::<Procedure>().is_err());
    }

    #[test]
    fn hyperparameter_validation() {
        Hyperparameters::default().validate().unwrap();
        let bad = Hyperparameters {
            warmup_ratio: 1.0,
            ..Hyperparameters::default()
        };
        assert!(bad.validate().is_err());
        let bad = Hyperparameters {
            batch_size: 0,
            ..Hyperparameters::default()
        };
        assert!(bad.validate().is_err());
    }
}
