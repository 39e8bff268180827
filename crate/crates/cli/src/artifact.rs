//! Atomic output files and the run manifest that accompanies them.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Serialize)]
struct FileDigest {
    path: String,
    sha256: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    version: u32,
    command: &'a str,
    run: &'a serde_json::Value,
    inputs: &'a [FileDigest],
    outputs: &'a [FileDigest],
}

fn digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes `bytes` to a temporary file next to `path`, then renames it into
/// place so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("cannot create a temporary file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

/// `model.json` → `model.json.<suffix>`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".");
    s.push(suffix);
    PathBuf::from(s)
}

/// Collects a command's inputs and outputs; [`Run::finish`] writes every
/// output followed by `<primary>.manifest.json`.
pub struct Run {
    command: &'static str,
    config: serde_json::Value,
    inputs: Vec<FileDigest>,
    outputs: Vec<(PathBuf, Vec<u8>)>,
}

impl Run {
    pub fn new(command: &'static str, config: &impl Serialize) -> Result<Self> {
        Ok(Self {
            command,
            config: serde_json::to_value(config)?,
            inputs: Vec::new(),
            outputs: Vec::new(),
        })
    }

    /// The configuration echo stored in the manifest and embedded in model
    /// files.
    pub fn config(&self) -> &serde_json::Value {
        &self.config
    }

    /// Reads an input file, recording its hash.
    pub fn read(&mut self, path: &Path) -> Result<String> {
        let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
        self.inputs.push(FileDigest {
            path: path.display().to_string(),
            sha256: digest(&bytes),
        });
        String::from_utf8(bytes).with_context(|| format!("{} is not UTF-8", path.display()))
    }

    pub fn output(&mut self, path: PathBuf, bytes: impl Into<Vec<u8>>) {
        self.outputs.push((path, bytes.into()));
    }

    pub fn output_json(&mut self, path: PathBuf, value: &impl Serialize) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.output(path, text);
        Ok(())
    }

    pub fn finish(self) -> Result<()> {
        let Some((primary, _)) = self.outputs.first() else {
            return Ok(());
        };
        let manifest_path = sibling(primary, "manifest.json");
        let mut outputs = Vec::with_capacity(self.outputs.len());
        for (path, bytes) in &self.outputs {
            write_atomic(path, bytes)?;
            outputs.push(FileDigest {
                path: path.display().to_string(),
                sha256: digest(bytes),
            });
        }
        let manifest = Manifest {
            version: MANIFEST_VERSION,
            command: self.command,
            run: &self.config,
            inputs: &self.inputs,
            outputs: &outputs,
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        write_atomic(&manifest_path, text.as_bytes())
    }
}
