//! Instruction-tuning records, trigger prompts, the box-as-text codec, the
//! synthetic shapes dataset and deterministic mixture streams.

mod bbox;
mod example;
mod mixture;
mod source;
pub mod synth;
mod trigger;

pub use bbox::{decode_bbox, encode_bbox, BBox};
pub use example::{InstructExample, TaskKind};
pub use mixture::{build_mixture, build_mixture_filtered, Dataset, MixtureConfig, SourceEntry, StreamItem};
pub use source::ImageSource;
pub use synth::{synth_generate, SynthConfig, SynthDataset};
pub use trigger::{apply_trigger_prompt, triggers};
