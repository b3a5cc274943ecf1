use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::image::{NormStats, Scheme};
use crate::prompt::PromptStyle;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct BackboneConfig {
    pub id: String,
    pub patch_size: usize,
    pub dim: usize,
    pub layers: usize,
    pub heads: usize,
}

impl Default for BackboneConfig {
    fn default() -> Self {
        BackboneConfig {
            id: String::from("toy-vit"),
            patch_size: 14,
            dim: 64,
            layers: 4,
            heads: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct LmConfig {
    pub dim: usize,
    pub layers: usize,
    pub heads: usize,
    pub max_context: usize,
    pub style: PromptStyle,
    pub tie_embeddings: bool,
}

impl Default for LmConfig {
    fn default() -> Self {
        LmConfig {
            dim: 128,
            layers: 4,
            heads: 4,
            max_context: 512,
            style: PromptStyle::Base,
            tie_embeddings: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct ImageSettings {
    pub scheme: Scheme,
    pub resolution: usize,
    pub norm: NormStats,
}

impl Default for ImageSettings {
    fn default() -> Self {
        ImageSettings {
            scheme: Scheme::NaiveResize,
            resolution: 224,
            norm: NormStats::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(deny_unknown_fields, default))]
pub struct VlmConfig {
    pub image: ImageSettings,
    /// One backbone, or two whose patch features are fused channel-wise.
    pub backbones: Vec<BackboneConfig>,
    /// Projector hidden width; defaults to the LM width.
    pub projector_hidden: Option<usize>,
    pub lm: LmConfig,
}

impl Default for VlmConfig {
    fn default() -> Self {
        VlmConfig {
            image: ImageSettings::default(),
            backbones: vec![BackboneConfig::default()],
            projector_hidden: None,
            lm: LmConfig::default(),
        }
    }
}
