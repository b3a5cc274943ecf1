//! Checkpoint container.
//!
//! ```text
//! magic "PRISMCKP" | version: u32 LE | header length: u64 LE | header (JSON)
//! | parameters: f64 LE, concatenated in tensor-index order
//! ```
//!
//! The header echoes the experiment config (and its hash), the tokenizer
//! table and the tensor index. Saving a loaded checkpoint reproduces the
//! original bytes.

use std::path::Path;

use prism_core::model::Vlm;
use prism_core::tokenizer::ByteTokenizer;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"PRISMCKP";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TokenizerTable {
    pub kind: String,
    pub vocab_size: usize,
    pub special: Vec<(String, u32)>,
}

impl TokenizerTable {
    pub fn byte_level() -> Self {
        let t = ByteTokenizer;
        TokenizerTable {
            kind: "byte".into(),
            vocab_size: t.vocab_size(),
            special: t.special_tokens().iter().map(|(n, id)| (n.to_string(), *id)).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Header {
    pub config_hash: String,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub tokenizer: TokenizerTable,
    pub tensors: Vec<TensorEntry>,
}

fn tensor_index(model: &Vlm) -> Vec<TensorEntry> {
    model
        .params
        .specs()
        .iter()
        .map(|s| TensorEntry {
            name: s.name.clone(),
            shape: s.shape.clone(),
            offset: s.offset,
            len: s.len,
        })
        .collect()
}

pub fn to_bytes(cfg: &ExperimentConfig, model: &Vlm) -> Vec<u8> {
    let header = Header {
        config_hash: cfg.hash(),
        seed: cfg.seed,
        config: cfg.clone(),
        tokenizer: TokenizerTable::byte_level(),
        tensors: tensor_index(model),
    };
    let json = serde_json::to_vec(&header).expect("header serializes");
    let data = model.params.data();
    let mut out = Vec::with_capacity(8 + 4 + 8 + json.len() + 8 * data.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for v in data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn save_checkpoint(path: &Path, cfg: &ExperimentConfig, model: &Vlm) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(Error::io(dir))?;
    }
    std::fs::write(path, to_bytes(cfg, model)).map_err(Error::io(path))
}

pub fn is_checkpoint(bytes: &[u8]) -> bool {
    bytes.starts_with(MAGIC)
}

/// Splits a checkpoint into its header and parameter bytes, checking the
/// framing and the config hash.
pub fn read_header<'a>(bytes: &'a [u8], path: &Path) -> Result<(Header, &'a [u8])> {
    let bad = |msg: String| Error::Checkpoint {
        path: path.to_path_buf(),
        msg,
    };
    if bytes.len() < 20 || !is_checkpoint(bytes) {
        return Err(bad("not a checkpoint (bad magic)".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(bad(format!("unsupported format version {version}")));
    }
    let len = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
    let body = &bytes[20..];
    if body.len() < len {
        return Err(bad("truncated header".into()));
    }
    let header: Header = serde_json::from_slice(&body[..len]).map_err(|e| bad(format!("header: {e}")))?;
    let hash = header.config.hash();
    if hash != header.config_hash {
        return Err(bad(format!("config hash {} does not match recorded {}", hash, header.config_hash)));
    }
    if header.seed != header.config.seed {
        return Err(bad("header seed differs from the config echo".into()));
    }
    Ok((header, &body[len..]))
}

pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<(ExperimentConfig, Vlm)> {
    let bad = |msg: String| Error::Checkpoint {
        path: path.to_path_buf(),
        msg,
    };
    let (header, blob) = read_header(bytes, path)?;
    if header.tokenizer != TokenizerTable::byte_level() {
        return Err(bad("tokenizer table differs from the byte-level tokenizer".into()));
    }
    let mut model = Vlm::new(header.config.vlm_config(), header.seed)?;
    if header.tensors != tensor_index(&model) {
        return Err(bad("tensor index does not match the configured architecture".into()));
    }
    let n = model.params.len();
    if blob.len() != 8 * n {
        return Err(bad(format!("expected {} parameter bytes, found {}", 8 * n, blob.len())));
    }
    let values: Vec<f64> = blob
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    model.params.load_values(&values)?;
    Ok((header.config, model))
}

pub fn load_checkpoint(path: &Path) -> Result<(ExperimentConfig, Vlm)> {
    let bytes = std::fs::read(path).map_err(Error::io(path))?;
    from_bytes(&bytes, path)
}
