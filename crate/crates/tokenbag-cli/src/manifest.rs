//! Run manifests and atomic file writes.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub fn sha256_bytes(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    let mut out = String::with_capacity(64);
    for b in digest {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(sha256_bytes(&bytes))
}

/// Writes via a temporary file in the target directory plus rename, so an
/// interrupted run never leaves a half-written output.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    if let Some(dir) = dir {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    let mut tmp = tempfile::NamedTempFile::new_in(dir.unwrap_or(Path::new(".")))
        .context("creating temporary file")?;
    tmp.write_all(bytes).context("writing temporary file")?;
    tmp.persist(path)
        .with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct FileDigest {
    path: String,
    sha256: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestFile {
    tool: String,
    version: String,
    command: String,
    seeds: BTreeMap<String, u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    config_digest: Option<String>,
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
    wall_time_s: f64,
}

/// Collects inputs/outputs during a run and writes the manifest last.
pub struct RunManifest {
    command: String,
    seeds: BTreeMap<String, u64>,
    config_digest: Option<String>,
    inputs: Vec<FileDigest>,
    outputs: Vec<PathBuf>,
    start: Instant,
}

impl RunManifest {
    pub fn new(command: &str) -> Self {
        RunManifest {
            command: command.to_string(),
            seeds: BTreeMap::new(),
            config_digest: None,
            inputs: Vec::new(),
            outputs: Vec::new(),
            start: Instant::now(),
        }
    }

    pub fn seed(&mut self, name: &str, value: u64) {
        self.seeds.insert(name.to_string(), value);
    }

    pub fn config_digest(&mut self, digest: &str) {
        self.config_digest = Some(digest.to_string());
    }

    /// Records an input file; hashes it now.
    pub fn input(&mut self, path: &Path) -> Result<()> {
        let sha256 = sha256_file(path)?;
        self.inputs.push(FileDigest {
            path: path.display().to_string(),
            sha256,
        });
        Ok(())
    }

    /// Records an output file; hashed when the manifest is written.
    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    /// Writes the manifest beside the outputs.
    pub fn write(self, manifest_path: &Path) -> Result<()> {
        let outputs = self
            .outputs
            .iter()
            .map(|p| {
                Ok(FileDigest {
                    path: p.display().to_string(),
                    sha256: sha256_file(p)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let file = ManifestFile {
            tool: "tokenbag".to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: self.command,
            seeds: self.seeds,
            config_digest: self.config_digest,
            inputs: self.inputs,
            outputs,
            wall_time_s: self.start.elapsed().as_secs_f64(),
        };
        let json = serde_json::to_string_pretty(&file)?;
        write_atomic(manifest_path, json.as_bytes())
    }
}

/// `<output>.manifest.json` beside a file output.
pub fn manifest_path_for(output: &Path) -> PathBuf {
    let mut name = output.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    output.with_file_name(name)
}
