//! Chat templates for base and instruct-tuned language models.
//!
//! Declared renderings (between BOS and EOS):
//!
//! * base: `In: {user} Out: {response}`
//! * instruct: `{SYSTEM_PROMPT} USER: {user} ASSISTANT: {response}`

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::error::{Error, Result};
use crate::tokenizer::{ByteTokenizer, TokenId};

pub const SYSTEM_PROMPT: &str = "A chat between a curious user and an artificial intelligence assistant. \
The assistant gives helpful, detailed, and polite answers to the user's questions.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum PromptStyle {
    #[default]
    Base,
    Instruct,
}

impl PromptStyle {
    pub fn name(self) -> &'static str {
        match self {
            PromptStyle::Base => "base",
            PromptStyle::Instruct => "instruct",
        }
    }

    /// Text preceding the response, i.e. everything up to the role cue.
    pub fn render_prefix(self, user: &str) -> String {
        match self {
            PromptStyle::Base => format!("In: {user} Out: "),
            PromptStyle::Instruct => format!("{SYSTEM_PROMPT} USER: {user} ASSISTANT: "),
        }
    }
}

impl fmt::Display for PromptStyle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PromptStyle {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "base" => Ok(PromptStyle::Base),
            "instruct" => Ok(PromptStyle::Instruct),
            _ => Err(Error::Unknown {
                kind: "prompt style",
                name: s.into(),
            }),
        }
    }
}

/// Token sequence with a loss mask that is true exactly on the response
/// tokens and the closing EOS.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FormattedPrompt {
    pub tokens: Vec<TokenId>,
    pub loss_mask: Vec<bool>,
}

impl FormattedPrompt {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn scored_positions(&self) -> usize {
        self.loss_mask.iter().filter(|m| **m).count()
    }
}

/// Render and tokenize a prompt. `max_tokens` bounds the total sequence
/// length including BOS/EOS.
pub fn format_prompt(
    style: PromptStyle,
    user: &str,
    response: Option<&str>,
    max_tokens: usize,
) -> Result<FormattedPrompt> {
    if user.is_empty() {
        return Err(Error::InvalidArgument("user text must be nonempty".into()));
    }
    let tok = ByteTokenizer;
    let mut tokens = Vec::new();
    tokens.push(ByteTokenizer::BOS);
    tokens.extend(tok.encode(&style.render_prefix(user)));
    let mut loss_mask = alloc::vec![false; tokens.len()];
    if let Some(response) = response {
        let reply = tok.encode(response);
        loss_mask.extend(core::iter::repeat_n(true, reply.len() + 1));
        tokens.extend(reply);
        tokens.push(ByteTokenizer::EOS);
    }
    if tokens.len() > max_tokens {
        return Err(Error::ContextOverflow {
            needed: tokens.len(),
            max: max_tokens,
        });
    }
    Ok(FormattedPrompt { tokens, loss_mask })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn visible(p: &FormattedPrompt) -> String {
        ByteTokenizer.decode(&p.tokens)
    }

    #[test]
    fn base_template_renders_exactly() {
        let p = format_prompt(PromptStyle::Base, "What is this?", Some("A cat."), 512).unwrap();
        assert_eq!(visible(&p), "In: What is this? Out: A cat.");
        assert_eq!(p.tokens[0], ByteTokenizer::BOS);
        assert_eq!(*p.tokens.last().unwrap(), ByteTokenizer::EOS);
        // "A cat." + EOS
        assert_eq!(p.scored_positions(), 7);
        let first = p.loss_mask.iter().position(|m| *m).unwrap();
        assert_eq!(ByteTokenizer.decode(&p.tokens[first..]), "A cat.");
    }

    #[test]
    fn instruct_template_renders_exactly() {
        let p = format_prompt(PromptStyle::Instruct, "What is this?", Some("A cat."), 512).unwrap();
        let want = format!("{SYSTEM_PROMPT} USER: What is this? ASSISTANT: A cat.");
        assert_eq!(visible(&p), want);
        assert!(visible(&p).starts_with("A chat between a curious user and an artificial intelligence assistant."));
    }

    #[test]
    fn inference_prompt_ends_at_role_cue() {
        let p = format_prompt(PromptStyle::Base, "Hi", None, 512).unwrap();
        assert!(p.loss_mask.iter().all(|m| !m));
        assert!(visible(&p).ends_with("Out: "));
        let p = format_prompt(PromptStyle::Instruct, "Hi", None, 512).unwrap();
        assert!(visible(&p).ends_with("ASSISTANT: "));
    }

    #[test]
    fn errors() {
        assert!(format_prompt(PromptStyle::Base, "", None, 512).is_err());
        assert!(matches!(
            format_prompt(PromptStyle::Base, "long question", Some("x"), 10),
            Err(Error::ContextOverflow { .. })
        ));
    }
}
