use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

pub const MANIFEST_TOOL: &str = "crawl";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Serialize)]
pub struct Artifact {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Record of one command invocation: enough to replay it and to verify its
/// inputs and outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub argv: Vec<String>,
    pub seed: Option<u64>,
    pub config: Value,
    pub inputs: Vec<Artifact>,
    pub artifacts: Vec<Artifact>,
}

impl RunManifest {
    pub fn new(command: &str, seed: Option<u64>, config: Value) -> Self {
        Self {
            tool: MANIFEST_TOOL,
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            argv: std::env::args().collect(),
            seed,
            config,
            inputs: Vec::new(),
            artifacts: Vec::new(),
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs.extend(hash_tree(path, path.parent().unwrap_or(Path::new("")))?);
        Ok(())
    }

    /// Hashes `path` (a file or a directory tree) relative to `root`.
    pub fn output(&mut self, path: &Path, root: &Path) -> Result<()> {
        self.artifacts.extend(hash_tree(path, root)?);
        Ok(())
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?).with_context(|| format!("writing {}", path.display()))
    }
}

pub fn sha256_file(path: &Path) -> Result<(String, u64)> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok((hex::encode(Sha256::digest(&bytes)), bytes.len() as u64))
}

fn hash_tree(path: &Path, root: &Path) -> Result<Vec<Artifact>> {
    let mut files = Vec::new();
    collect(path, &mut files)?;
    files.sort();
    files
        .into_iter()
        .map(|f| {
            let (sha256, bytes) = sha256_file(&f)?;
            let rel = f.strip_prefix(root).unwrap_or(&f);
            Ok(Artifact {
                path: rel.to_string_lossy().replace('\\', "/"),
                sha256,
                bytes,
            })
        })
        .collect()
}

fn collect(path: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    if path.is_dir() {
        for entry in fs::read_dir(path).with_context(|| format!("listing {}", path.display()))? {
            collect(&entry?.path(), out)?;
        }
    } else {
        out.push(path.to_path_buf());
    }
    Ok(())
}
