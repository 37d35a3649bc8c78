//! Report envelopes and file output.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::CliError;

pub const TOOL: &str = "specdep";

/// Canonical JSON: object keys sorted, two-space indent, trailing newline.
pub fn canonical_json<T: Serialize>(value: &T) -> Result<String, CliError> {
    // serde_json's default map is ordered by key, so the round trip sorts
    let v: Value = serde_json::to_value(value).map_err(|e| CliError::Runtime(e.to_string()))?;
    let mut s = serde_json::to_string_pretty(&v).map_err(|e| CliError::Runtime(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Wraps a command result with the tool, version, seed and resolved config.
pub fn envelope<T: Serialize>(command: &str, cfg: &RunConfig, result: &T) -> Result<Value, CliError> {
    Ok(json!({
        "tool": TOOL,
        "version": specdep::VERSION,
        "command": command,
        "seed": cfg.seed,
        "config": serde_json::to_value(cfg).map_err(|e| CliError::Runtime(e.to_string()))?,
        "result": serde_json::to_value(result).map_err(|e| CliError::Runtime(e.to_string()))?,
    }))
}

/// Collects the files a command writes under the output directory.
pub struct Output {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Output {
    pub fn new(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn text(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let p = self.path(name);
        std::fs::write(&p, contents).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", p.display())))?;
        self.written.push(p);
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let s = canonical_json(value)?;
        self.text(name, &s)
    }

    pub fn record(&mut self, p: PathBuf) {
        self.written.push(p);
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }
}
