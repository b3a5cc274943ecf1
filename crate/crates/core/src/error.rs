use alloc::string::String;

/// Errors raised by the core pipeline.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error("unknown {kind} `{name}`")]
    Unknown { kind: &'static str, name: String },
    #[error("patch granularity mismatch: {0}")]
    Granularity(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("context overflow: {needed} positions exceed the maximum of {max}")]
    ContextOverflow { needed: usize, max: usize },
    #[error("loss is undefined: no response positions are scored")]
    EmptyLoss,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("parse failure: {0}")]
    Parse(String),
    #[error("missing data source `{0}`")]
    MissingSource(String),
    #[error("missing image `{0}`")]
    MissingImage(String),
    #[error("non-finite loss in stage {stage} at step {step}: {detail}")]
    NonFiniteLoss {
        stage: usize,
        step: usize,
        detail: String,
    },
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("only {produced} unique layouts could be drawn, {requested} requested")]
    LayoutExhausted { requested: usize, produced: usize },
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
