use std::path::{Path, PathBuf};

use reporter_core::io::ExperimentConfig;
use reporter_core::Error;
use serde::{Deserialize, Serialize};

pub const MANIFEST_FILE: &str = "manifest.toml";

/// Record of one run, written next to its outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub command: String,
    pub argv: Vec<String>,
    /// Directory relative input paths in `argv` are resolved against.
    pub working_dir: String,
    pub seed: Option<u64>,
    pub constants_version: u32,
    /// Constants file from the environment; None means the built-in one.
    pub constants_file: Option<String>,
    /// Output files, relative to the output directory.
    pub outputs: Vec<String>,
    pub wall_time_s: f64,
    /// Config after defaults and command-line overrides.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<ExperimentConfig>,
}

impl RunManifest {
    pub fn save(&self, dir: &Path) -> Result<PathBuf, Error> {
        let path = dir.join(MANIFEST_FILE);
        let text = toml::to_string(self).map_err(|e| Error::Schema {
            message: e.to_string(),
            line: None,
            field: None,
        })?;
        std::fs::write(&path, text)?;
        Ok(path)
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path)?;
        let m: Self = toml::from_str(&text).map_err(|e| Error::Schema {
            message: e.message().to_string(),
            line: e
                .span()
                .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1),
            field: None,
        })?;
        if let Some(cfg) = &m.config {
            cfg.validate()?;
        }
        Ok(m)
    }
}
