use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use sha2::{Digest, Sha256};

pub const TOOL_VERSION: &str = concat!("xmc ", env!("CARGO_PKG_VERSION"));

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(sha256_hex(&bytes))
}

/// Provenance record written before a command produces any output. Output
/// paths are relative to the command's output root, so identical runs into
/// different directories write identical records.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunManifest {
    pub command: String,
    pub seed: u64,
    pub config: Vec<(String, String)>,
    pub inputs: Vec<(String, String)>,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64) -> Self {
        Self {
            command: command.into(),
            seed,
            ..Self::default()
        }
    }

    pub fn config(mut self, key: &str, value: impl ToString) -> Self {
        self.config.push((key.into(), value.to_string()));
        self
    }

    /// Add every `key = value` line of a rendered config.
    pub fn config_text(mut self, text: &str) -> Self {
        for line in text.lines() {
            if let Some((k, v)) = line.split_once('=') {
                self.config.push((k.trim().into(), v.trim().into()));
            }
        }
        self
    }

    pub fn input(mut self, path: &Path) -> Result<Self> {
        let digest = sha256_file(path)?;
        self.inputs.push((path.display().to_string(), digest));
        Ok(self)
    }

    pub fn output(mut self, relative: &str) -> Self {
        self.outputs.push(relative.into());
        self
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "command={}", self.command);
        let _ = writeln!(out, "tool_version={TOOL_VERSION}");
        let _ = writeln!(out, "seed={}", self.seed);
        for (k, v) in &self.config {
            let _ = writeln!(out, "config.{k}={v}");
        }
        for (p, d) in &self.inputs {
            let _ = writeln!(out, "input={p} sha256={d}");
        }
        for o in &self.outputs {
            let _ = writeln!(out, "output={o}");
        }
        out
    }

    /// Write `run-<command>.txt` into `root`, creating it if needed.
    pub fn write(&self, root: &Path, name: &str) -> Result<()> {
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        let path = root.join(format!("run-{name}.txt"));
        fs::write(&path, self.render()).with_context(|| format!("writing {}", path.display()))
    }
}
