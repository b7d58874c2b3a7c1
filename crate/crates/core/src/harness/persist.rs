//! Run directories: artifacts plus a `manifest.json` with checksums.
//!
//! Manifests carry no timestamps, so identical runs produce identical bytes.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::config::RunConfig;
use crate::zeta::sha256_hex;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

impl Artifact {
    pub fn new(name: impl Into<String>, bytes: impl Into<Vec<u8>>) -> Self {
        Artifact {
            name: name.into(),
            bytes: bytes.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputRecord {
    pub name: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactRecord {
    pub name: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub config_hash: String,
    pub seed: u64,
    pub version: String,
    pub inputs: Vec<InputRecord>,
    pub artifacts: Vec<ArtifactRecord>,
}

/// Writes every artifact into `dir`, creating it if needed, then the manifest.
pub fn persist_run(config: &RunConfig, inputs: &[InputRecord], outputs: &[Artifact], dir: &Path) -> Result<Manifest> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut artifacts = Vec::with_capacity(outputs.len());
    for artifact in outputs {
        if artifact.name == MANIFEST || artifact.name.contains(['/', '\\']) || artifact.name.is_empty() {
            return Err(Error::InvalidInput(format!("invalid artifact name '{}'", artifact.name)));
        }
        let path = dir.join(&artifact.name);
        fs::write(&path, &artifact.bytes).map_err(|e| Error::io(&path, e))?;
        artifacts.push(ArtifactRecord {
            name: artifact.name.clone(),
            sha256: sha256_hex(&artifact.bytes),
            bytes: artifact.bytes.len() as u64,
        });
    }
    let manifest = Manifest {
        config_hash: config.hash(),
        seed: config.run.seed,
        version: config.run.version.clone(),
        inputs: inputs.to_vec(),
        artifacts,
    };
    let path = dir.join(MANIFEST);
    let mut text = serde_json::to_string_pretty(&manifest)?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Ok(serde_json::from_str(&text)?)
}
