//! The three-part model: visual backbone(s), per-patch projector, and a
//! causal language model that reads projected patches as a prefix.

mod backbone;
mod config;
mod features;
mod lm;
mod projector;
mod vlm;

pub use backbone::{patchify, visual_forward, VisualBackbone};
pub use config::{BackboneConfig, ImageSettings, LmConfig, VlmConfig};
pub use features::{fuse_features, PatchFeatures};
pub use lm::ToyLm;
pub use projector::{project, Projector};
pub use vlm::{token_nll, Generation, LossSum, Vlm, VlmOutput};
