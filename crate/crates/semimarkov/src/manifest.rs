//! Provenance record attached to every output.
//!
//! A manifest holds the tool versions, the seed, the effective configuration
//! and its SHA-256 hash, and digests of the input files. It deliberately
//! contains no timestamps or absolute paths, so identical runs produce
//! identical manifests.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    /// File name without its directory.
    pub name: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub core_version: String,
    pub command: String,
    pub seed: u64,
    /// SHA-256 of the compact JSON form of `config`.
    pub config_hash: String,
    pub config: serde_json::Value,
    pub inputs: Vec<FileDigest>,
    /// Output file names, relative to the output location.
    pub outputs: Vec<String>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn file_digest(path: &Path) -> Result<FileDigest> {
    let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    Ok(FileDigest {
        name: path
            .file_name()
            .map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned()),
        sha256: sha256_hex(&bytes),
    })
}

impl Manifest {
    pub fn new<C: Serialize>(command: &str, seed: u64, config: &C) -> Result<Self> {
        let config = serde_json::to_value(config)?;
        let config_hash = sha256_hex(serde_json::to_string(&config)?.as_bytes());
        Ok(Self {
            tool: env!("CARGO_PKG_NAME").into(),
            version: env!("CARGO_PKG_VERSION").into(),
            core_version: semimarkov_core::VERSION.into(),
            command: command.into(),
            seed,
            config_hash,
            config,
            inputs: Vec::new(),
            outputs: Vec::new(),
            warnings: Vec::new(),
        })
    }

    pub fn add_inputs<'a, I: IntoIterator<Item = &'a Path>>(&mut self, paths: I) -> Result<()> {
        for p in paths {
            self.inputs.push(file_digest(p)?);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sha256_known_vector() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn hash_depends_only_on_config() {
        let a = Manifest::new("fit", 3, &serde_json::json!({"burn_in": 10})).unwrap();
        let b = Manifest::new("fit", 4, &serde_json::json!({"burn_in": 10})).unwrap();
        let c = Manifest::new("fit", 3, &serde_json::json!({"burn_in": 11})).unwrap();
        assert_eq!(a.config_hash, b.config_hash);
        assert_ne!(a.config_hash, c.config_hash);
        assert_eq!(a.core_version, semimarkov_core::VERSION);
    }
}
