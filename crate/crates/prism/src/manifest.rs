//! Run manifests: the resolved config, its hash and seed, and a SHA-256 per
//! emitted file. `verify` recomputes all of them.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::checkpoint::{is_checkpoint, read_header};
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};

pub const MANIFEST: &str = "manifest.json";
const SIDECAR_SUFFIX: &str = ".manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Artifact {
    /// Relative to the manifest's directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub artifacts: Vec<Artifact>,
}

pub fn sha256_file(path: &Path) -> Result<(String, u64)> {
    let bytes = std::fs::read(path).map_err(Error::io(path))?;
    Ok((hex::encode(Sha256::digest(&bytes)), bytes.len() as u64))
}

/// Where the manifest for a single-file artifact lives.
pub fn sidecar(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(SIDECAR_SUFFIX);
    path.with_file_name(name)
}

/// Hashes `files` (relative to the manifest's directory) and writes the
/// manifest to `manifest_path`.
pub fn write_manifest(
    manifest_path: &Path,
    command: &str,
    cfg: &ExperimentConfig,
    files: &[PathBuf],
) -> Result<Manifest> {
    let base = manifest_path.parent().unwrap_or(Path::new(""));
    let artifacts = files
        .iter()
        .map(|f| {
            let (sha256, bytes) = sha256_file(&base.join(f))?;
            Ok(Artifact {
                path: f.to_string_lossy().replace('\\', "/"),
                sha256,
                bytes,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let m = Manifest {
        command: command.into(),
        config_hash: cfg.hash(),
        seed: cfg.seed,
        config: cfg.clone(),
        artifacts,
    };
    let text = serde_json::to_string_pretty(&m).expect("manifest serializes") + "\n";
    std::fs::write(manifest_path, text).map_err(Error::io(manifest_path))?;
    Ok(m)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verified {
    pub manifest: PathBuf,
    pub config_hash: String,
    pub artifacts: usize,
}

fn verify_manifest(path: &Path) -> Result<Verified> {
    let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
    let m: Manifest =
        serde_json::from_str(&text).map_err(|e| Error::Verify(format!("{}: {e}", path.display())))?;
    let hash = m.config.hash();
    if hash != m.config_hash {
        return Err(Error::Verify(format!(
            "{}: config hash {hash} does not match recorded {}",
            path.display(),
            m.config_hash
        )));
    }
    if m.seed != m.config.seed {
        return Err(Error::Verify(format!("{}: seed differs from the config echo", path.display())));
    }
    let base = path.parent().unwrap_or(Path::new(""));
    for a in &m.artifacts {
        let file = base.join(&a.path);
        let (sha, bytes) = sha256_file(&file)?;
        if sha != a.sha256 || bytes != a.bytes {
            return Err(Error::Verify(format!("{} changed since it was written", file.display())));
        }
        if is_checkpoint(&std::fs::read(&file).map_err(Error::io(&file))?) {
            verify_checkpoint(&file, Some(&m.config_hash))?;
        }
    }
    Ok(Verified {
        manifest: path.to_path_buf(),
        config_hash: m.config_hash,
        artifacts: m.artifacts.len(),
    })
}

fn verify_checkpoint(path: &Path, expected: Option<&str>) -> Result<Verified> {
    let bytes = std::fs::read(path).map_err(Error::io(path))?;
    let (header, _) = read_header(&bytes, path).map_err(|e| Error::Verify(e.to_string()))?;
    if let Some(h) = expected {
        if h != header.config_hash {
            return Err(Error::Verify(format!(
                "{} was written under config {} but the manifest records {h}",
                path.display(),
                header.config_hash
            )));
        }
    }
    Ok(Verified {
        manifest: path.to_path_buf(),
        config_hash: header.config_hash,
        artifacts: 1,
    })
}

/// Accepts a run directory, a manifest, a checkpoint, or a file with a
/// sidecar manifest.
pub fn verify(path: &Path) -> Result<Verified> {
    if path.is_dir() {
        return verify_manifest(&path.join(MANIFEST));
    }
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    if name == MANIFEST || name.ends_with(SIDECAR_SUFFIX) {
        return verify_manifest(path);
    }
    let side = sidecar(path);
    if side.exists() {
        return verify_manifest(&side);
    }
    let bytes = std::fs::read(path).map_err(Error::io(path))?;
    if is_checkpoint(&bytes) {
        return verify_checkpoint(path, None);
    }
    Err(Error::Verify(format!("no manifest found for {}", path.display())))
}
