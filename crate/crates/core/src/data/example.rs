use alloc::string::String;
use core::fmt;
use core::str::FromStr;

use super::bbox::decode_bbox;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum TaskKind {
    Caption,
    Vqa,
    MultipleChoice,
    Localization,
    RegionCaption,
    Conversation,
    LanguageOnly,
}

impl TaskKind {
    pub const ALL: [TaskKind; 7] = [
        TaskKind::Caption,
        TaskKind::Vqa,
        TaskKind::MultipleChoice,
        TaskKind::Localization,
        TaskKind::RegionCaption,
        TaskKind::Conversation,
        TaskKind::LanguageOnly,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TaskKind::Caption => "caption",
            TaskKind::Vqa => "vqa",
            TaskKind::MultipleChoice => "multiple-choice",
            TaskKind::Localization => "localization",
            TaskKind::RegionCaption => "region-caption",
            TaskKind::Conversation => "conversation",
            TaskKind::LanguageOnly => "language-only",
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TaskKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TaskKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Unknown {
                kind: "task kind",
                name: s.into(),
            })
    }
}

/// One training or evaluation record. `prompt` already carries its trigger.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields))]
pub struct InstructExample {
    pub id: String,
    pub image: Option<String>,
    pub task_kind: TaskKind,
    pub prompt: String,
    pub response: String,
}

impl InstructExample {
    pub fn validate(&self) -> Result<()> {
        let language_only = self.task_kind == TaskKind::LanguageOnly;
        if language_only != self.image.is_none() {
            return Err(Error::InvalidArgument(alloc::format!(
                "example {}: image reference must be absent exactly for language-only records",
                self.id
            )));
        }
        if self.task_kind == TaskKind::Localization {
            decode_bbox(&self.response)?;
        }
        Ok(())
    }
}
