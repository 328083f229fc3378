//! Artifact files. JSON and CSV contents depend only on the configuration;
//! timestamps live in the `run.meta.json` sidecar.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::error::CliError;

pub struct Artifacts {
    dir: PathBuf,
    json_only: bool,
    written: Vec<String>,
}

impl Artifacts {
    pub fn new(dir: &Path, json_only: bool) -> Result<Self, CliError> {
        fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        Ok(Artifacts {
            dir: dir.to_path_buf(),
            json_only,
            written: Vec::new(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }

    fn put(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        fs::write(&path, bytes).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        self.written.push(name.to_string());
        Ok(path)
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let mut text = serde_json::to_string_pretty(value)
            .map_err(|e| CliError::Runtime(format!("{name}: {e}")))?;
        text.push('\n');
        self.put(name, text.as_bytes())
    }

    /// Skipped under `--json-only`.
    pub fn csv<T: Serialize>(&mut self, name: &str, rows: &[T]) -> Result<(), CliError> {
        if self.json_only {
            return Ok(());
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in rows {
            w.serialize(row)
                .map_err(|e| CliError::Runtime(format!("{name}: {e}")))?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| CliError::Runtime(format!("{name}: {e}")))?;
        self.put(name, &bytes)?;
        Ok(())
    }

    /// Skipped under `--json-only`.
    pub fn text(&mut self, name: &str, body: &str) -> Result<(), CliError> {
        if self.json_only {
            return Ok(());
        }
        self.put(name, body.as_bytes())?;
        Ok(())
    }

    /// Written even under `--json-only`: failures point at it.
    pub fn transcript(&mut self, name: &str, lines: &[String]) -> Result<PathBuf, CliError> {
        let mut body = lines.join("\n");
        body.push('\n');
        self.put(name, body.as_bytes())
    }
}

#[derive(Serialize)]
pub struct RunMeta<'a> {
    pub command: &'a str,
    pub config: String,
    pub version: &'a str,
    pub started_unix_ms: u128,
    pub finished_unix_ms: u128,
    pub exit_code: i32,
    pub outputs: &'a [String],
}

pub fn unix_ms() -> u128 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis())
        .unwrap_or(0)
}

pub fn write_meta(dir: &Path, meta: &RunMeta<'_>) -> Result<(), CliError> {
    let path = dir.join("run.meta.json");
    let text = serde_json::to_string_pretty(meta).map_err(|e| CliError::Runtime(e.to_string()))?;
    fs::write(&path, text + "\n").map_err(|source| CliError::Io { path, source })
}
