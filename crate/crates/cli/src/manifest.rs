//! Run manifests: enough to re-run a command and check it saw the same inputs.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub manifest_version: u32,
    pub command: String,
    /// Arguments after the program name; `perspectra replay` feeds them back to the parser.
    pub argv: Vec<String>,
    pub working_dir: PathBuf,
    pub config: RunConfig,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
    pub versions: BTreeMap<String, String>,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
}

/// Inputs and outputs a command touched, fingerprinted after it finishes.
#[derive(Debug, Default)]
pub struct Touched {
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
}

impl Touched {
    pub fn input(&mut self, p: impl AsRef<Path>) {
        self.inputs.push(p.as_ref().to_path_buf());
    }

    pub fn output(&mut self, p: impl AsRef<Path>) {
        self.outputs.push(p.as_ref().to_path_buf());
    }
}

pub fn now_ms() -> u128 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

/// SHA-256 of a file, or of a directory's sorted relative paths and file digests.
pub fn fingerprint(path: &Path) -> Result<String> {
    if path.is_dir() {
        let mut files = Vec::new();
        collect_files(path, path, &mut files)?;
        files.sort();
        let mut h = Sha256::new();
        for rel in files {
            h.update(rel.to_string_lossy().as_bytes());
            h.update([0]);
            h.update(fingerprint(&path.join(&rel))?.as_bytes());
        }
        Ok(hex::encode(h.finalize()))
    } else {
        let bytes = std::fs::read(path).with_context(|| format!("fingerprinting {}", path.display()))?;
        Ok(hex::encode(Sha256::digest(&bytes)))
    }
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in std::fs::read_dir(dir).with_context(|| format!("listing {}", dir.display()))? {
        let path = entry?.path();
        if path.is_dir() {
            collect_files(root, &path, out)?;
        } else {
            out.push(path.strip_prefix(root).expect("under root").to_path_buf());
        }
    }
    Ok(())
}

fn fingerprints(paths: &[PathBuf]) -> Result<BTreeMap<String, String>> {
    paths
        .iter()
        .filter(|p| p.exists())
        .map(|p| Ok((p.display().to_string(), fingerprint(p)?)))
        .collect()
}

pub fn versions() -> BTreeMap<String, String> {
    [
        ("perspectra-cli", env!("CARGO_PKG_VERSION")),
        ("perspectra-core", perspectra::VERSION),
        ("perspectra-survey", survey::VERSION),
        ("tokenization", perspectra::eval::TOKENIZATION),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect()
}

impl Manifest {
    pub fn build(command: &str, argv: Vec<String>, config: &RunConfig, touched: &Touched, started: u128) -> Result<Self> {
        Ok(Self {
            manifest_version: MANIFEST_VERSION,
            command: command.to_string(),
            argv,
            working_dir: std::env::current_dir().unwrap_or_default(),
            config: config.clone(),
            inputs: fingerprints(&touched.inputs)?,
            outputs: fingerprints(&touched.outputs)?,
            versions: versions(),
            started_unix_ms: started,
            finished_unix_ms: now_ms(),
        })
    }

    /// Write under `{output_dir}/manifests/` and return the path.
    pub fn write(&self, output_dir: &Path) -> Result<PathBuf> {
        let path = output_dir
            .join("manifests")
            .join(format!("{}-{}.json", self.started_unix_ms, self.command));
        let bytes = serde_json::to_vec_pretty(self)?;
        perspectra::io::write_atomic(&path, &bytes).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_slice(&text).with_context(|| format!("parsing manifest {}", path.display()))
    }

    /// Inputs whose current fingerprint differs from the recorded one.
    pub fn changed_inputs(&self) -> Vec<String> {
        self.inputs
            .iter()
            .filter(|(path, digest)| fingerprint(Path::new(path)).ok().as_ref() != Some(*digest))
            .map(|(path, _)| path.clone())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn directory_fingerprint_tracks_content() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir(dir.path().join("sub")).unwrap();
        std::fs::write(dir.path().join("a"), "1").unwrap();
        std::fs::write(dir.path().join("sub/b"), "2").unwrap();
        let first = fingerprint(dir.path()).unwrap();
        assert_eq!(first, fingerprint(dir.path()).unwrap());
        std::fs::write(dir.path().join("sub/b"), "3").unwrap();
        assert_ne!(first, fingerprint(dir.path()).unwrap());
    }
}
