use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::Serialize;

/// Record of one invocation, written before any output and rewritten when
/// the command ends.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub tool_version: String,
    pub argv: Vec<String>,
    /// Parsed flags, including defaults.
    pub config: serde_json::Value,
    pub started_at: DateTime<Utc>,
    pub finished_at: Option<DateTime<Utc>>,
    pub exit_code: Option<i32>,
    #[serde(skip)]
    path: Option<PathBuf>,
}

impl RunManifest {
    pub fn new(subcommand: &str, config: &impl Serialize, path: Option<PathBuf>) -> Self {
        Self {
            subcommand: subcommand.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            argv: std::env::args().collect(),
            config: serde_json::to_value(config).expect("flags serialize"),
            started_at: Utc::now(),
            finished_at: None,
            exit_code: None,
            path,
        }
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn write(&self) -> std::io::Result<()> {
        let Some(path) = &self.path else {
            return Ok(());
        };
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, serde_json::to_string_pretty(self).expect("manifest serializes") + "\n")
    }

    pub fn finish(&mut self, code: i32) -> std::io::Result<()> {
        self.finished_at = Some(Utc::now());
        self.exit_code = Some(code);
        self.write()
    }
}
