//! Core of a miniature patch-as-token vision-language model.
//!
//! Everything here is pure computation over in-memory buffers: image
//! preprocessing, a hand-differentiated toy ViT / projector / decoder LM,
//! the instruction-data mixture, staged training, evaluation scorers and
//! the Z-score / significance statistics used to compare models. File
//! formats, configuration and the command line live in the `prism` crate.

#![no_std]

extern crate alloc;

pub mod data;
pub mod error;
pub mod eval;
pub mod image;
pub mod math;
pub mod model;
pub mod nn;
pub mod params;
pub mod prompt;
pub mod rng;
pub mod stats;
pub mod tokenizer;
pub mod train;

pub use error::{Error, Result};
