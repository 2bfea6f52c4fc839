//! Output directory handling and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use toml::{Table, Value};

use crate::config::Config;
use crate::error::CliError;

/// Collects files written to one output directory.
pub struct ArtifactDir {
    root: PathBuf,
    written: Vec<String>,
}

impl ArtifactDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| CliError::io(&format!("creating {}", root.display()), e))?;
        Ok(Self { root: root.to_path_buf(), written: Vec::new() })
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<PathBuf, CliError> {
        let path = self.root.join(name);
        fs::write(&path, contents).map_err(|e| CliError::io(&format!("writing {}", path.display()), e))?;
        self.written.push(name.to_string());
        Ok(path)
    }

    /// Writes `manifest.toml`: tool version, command, command-specific
    /// settings, the artifact list and the fully resolved configuration.
    pub fn finish(mut self, command: &str, extra: Table, config: Option<&Config>) -> Result<(), CliError> {
        let mut m = Table::new();
        m.insert("tool".into(), Value::String(env!("CARGO_PKG_NAME").into()));
        m.insert("version".into(), Value::String(env!("CARGO_PKG_VERSION").into()));
        m.insert("command".into(), Value::String(command.into()));
        let mut names = self.written.clone();
        names.push("manifest.toml".into());
        m.insert("artifacts".into(), Value::Array(names.into_iter().map(Value::String).collect()));
        if !extra.is_empty() {
            m.insert("settings".into(), Value::Table(extra));
        }
        if let Some(cfg) = config {
            let v = Value::try_from(cfg).map_err(|e| CliError::Runtime(format!("manifest: {e}")))?;
            m.insert("config".into(), v);
        }
        let text = toml::to_string(&m).map_err(|e| CliError::Runtime(format!("manifest: {e}")))?;
        self.write("manifest.toml", &text)?;
        Ok(())
    }
}

/// CSV with a header row and LF endings; values use shortest round-trip
/// decimal formatting.
pub fn csv_table(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    out
}
