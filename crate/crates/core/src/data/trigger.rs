use alloc::format;
use alloc::string::String;

use super::TaskKind;
use crate::error::{Error, Result};

/// Trigger instructions appended per task kind.
pub mod triggers {
    pub const VQA: &str = "Answer the question using a single word or phrase.";
    pub const MULTIPLE_CHOICE: &str = "Answer with the option's letter from the given choices directly.";
    pub const CAPTION: &str = "Provide a one-sentence caption for the provided image.";
    pub const LOCALIZATION: &str = "Provide the bounding box coordinates of the region this sentence describes.";
    pub const REGION_CAPTION: &str = "Provide the bounding box coordinate of the region this sentence describes.";
}

/// Letter label for option `index` (`A`, `B`, ...).
pub fn option_letter(index: usize) -> char {
    (b'A' + index as u8) as char
}

/// Build the user prompt for `kind` from a question, referring expression
/// or box string. Multiple-choice options render as `A. x B. y ...`.
pub fn apply_trigger_prompt(kind: TaskKind, text: &str, options: Option<&[String]>) -> Result<String> {
    match (kind, options) {
        (TaskKind::MultipleChoice, None) => {
            return Err(Error::InvalidArgument("multiple-choice prompts need options".into()))
        }
        (TaskKind::MultipleChoice, Some(opts)) if opts.is_empty() || opts.len() > 26 => {
            return Err(Error::InvalidArgument(format!("{} options cannot be lettered", opts.len())))
        }
        (TaskKind::MultipleChoice, Some(_)) => {}
        (_, Some(_)) => {
            return Err(Error::InvalidArgument(format!("options are only valid for multiple-choice, not {kind}")))
        }
        _ => {}
    }
    let joined = |trigger: &str| {
        if text.is_empty() {
            String::from(trigger)
        } else {
            format!("{text} {trigger}")
        }
    };
    Ok(match kind {
        TaskKind::Vqa => joined(triggers::VQA),
        TaskKind::MultipleChoice => {
            let mut out = String::from(text);
            for (i, opt) in options.unwrap_or_default().iter().enumerate() {
                if !out.is_empty() {
                    out.push(' ');
                }
                out.push(option_letter(i));
                out.push_str(". ");
                out.push_str(opt);
            }
            out.push(' ');
            out.push_str(triggers::MULTIPLE_CHOICE);
            out
        }
        TaskKind::Caption => String::from(triggers::CAPTION),
        TaskKind::Localization => joined(triggers::LOCALIZATION),
        TaskKind::RegionCaption => joined(triggers::REGION_CAPTION),
        TaskKind::Conversation | TaskKind::LanguageOnly => String::from(text),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn vqa_trigger() {
        assert_eq!(
            apply_trigger_prompt(TaskKind::Vqa, "What color is the car?", None).unwrap(),
            "What color is the car? Answer the question using a single word or phrase."
        );
    }

    #[test]
    fn multiple_choice_letters_in_order() {
        let opts = vec![String::from("cat"), String::from("dog")];
        assert_eq!(
            apply_trigger_prompt(TaskKind::MultipleChoice, "Which animal?", Some(&opts)).unwrap(),
            "Which animal? A. cat B. dog Answer with the option's letter from the given choices directly."
        );
        assert!(apply_trigger_prompt(TaskKind::MultipleChoice, "Which?", None).is_err());
        assert!(apply_trigger_prompt(TaskKind::Vqa, "Which?", Some(&opts)).is_err());
    }

    #[test]
    fn other_kinds() {
        assert_eq!(apply_trigger_prompt(TaskKind::Conversation, "Tell me more.", None).unwrap(), "Tell me more.");
        assert_eq!(apply_trigger_prompt(TaskKind::Caption, "", None).unwrap(), triggers::CAPTION);
        assert_eq!(
            apply_trigger_prompt(TaskKind::Localization, "the red circle", None).unwrap(),
            "the red circle Provide the bounding box coordinates of the region this sentence describes."
        );
        assert_ne!(
            apply_trigger_prompt(TaskKind::RegionCaption, "[0.1, 0.1, 0.2, 0.2]", None).unwrap(),
            apply_trigger_prompt(TaskKind::Localization, "[0.1, 0.1, 0.2, 0.2]", None).unwrap()
        );
    }
}
