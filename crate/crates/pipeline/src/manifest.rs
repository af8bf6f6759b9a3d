//! `manifest.json`: what each command wrote into the output directory.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{PipelineError, Result};
use crate::io::write_json;

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Relative to the output directory when possible.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
    pub command: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub entries: Vec<ManifestEntry>,
}

pub fn sha256_file(path: &Path) -> Result<(u64, String)> {
    let bytes = fs::read(path).map_err(|e| PipelineError::io(path, e))?;
    let digest = Sha256::digest(&bytes);
    Ok((bytes.len() as u64, digest.iter().map(|b| format!("{b:02x}")).collect()))
}

/// Adds or replaces entries for `files` and rewrites the manifest.
pub fn record_outputs(dir: &Path, command: &str, files: &[impl AsRef<Path>]) -> Result<Manifest> {
    let path = dir.join(MANIFEST_NAME);
    let mut manifest: Manifest = if path.exists() {
        crate::io::read_json(&path)?
    } else {
        Manifest::default()
    };
    manifest.tool = "embinv".into();
    manifest.version = env!("CARGO_PKG_VERSION").into();
    for f in files {
        let f = f.as_ref();
        let (bytes, sha256) = sha256_file(f)?;
        let rel = f.strip_prefix(dir).unwrap_or(f).to_string_lossy().into_owned();
        manifest.entries.retain(|e| e.path != rel);
        manifest.entries.push(ManifestEntry {
            path: rel,
            bytes,
            sha256,
            command: command.into(),
        });
    }
    manifest.entries.sort_by(|a, b| a.path.cmp(&b.path));
    write_json(&path, &manifest)?;
    Ok(manifest)
}
