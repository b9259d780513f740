//! Service configuration: an optional TOML file plus environment overrides.

use std::path::{Path, PathBuf};

use cellreach::armkin::catalog::Catalog;
use cellreach::feastool::AnalysisParams;
use serde::{Deserialize, Serialize};

use crate::error::{GatewayError, Result};

/// Overrides `data_dir` from the config file.
pub const DATA_DIR_ENV: &str = "CELLREACH_DATA_DIR";
/// Path of the config file when `--config` is not given.
pub const CONFIG_ENV: &str = "CELLREACH_CONFIG";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Session store root.
    pub data_dir: PathBuf,
    /// Extra robot TOML files; entries override built-ins of the same name.
    pub catalog_dir: Option<PathBuf>,
    /// Static UI assets served at `/`.
    pub static_dir: Option<PathBuf>,
    pub bind: String,
    /// Analyze jobs allowed to run at once.
    pub max_jobs: usize,
    /// Analysis parameters given to new sessions.
    pub defaults: AnalysisParams,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            data_dir: PathBuf::from("cellreach-data"),
            catalog_dir: None,
            static_dir: None,
            bind: "127.0.0.1:8080".into(),
            max_jobs: 2,
            defaults: AnalysisParams::default(),
        }
    }
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| GatewayError::parse("config", e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path` (or `$CELLREACH_CONFIG`, or nothing) and applies
    /// `$CELLREACH_DATA_DIR`.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let path = path
            .map(Path::to_path_buf)
            .or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from));
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(&p)
                    .map_err(|e| GatewayError::validation("config", format!("{}: {e}", p.display())))?;
                Self::from_toml(&text)?
            }
            None => Self::default(),
        };
        if let Some(dir) = std::env::var_os(DATA_DIR_ENV) {
            cfg.data_dir = PathBuf::from(dir);
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_jobs == 0 {
            return Err(GatewayError::validation("max_jobs", "max_jobs must be at least 1"));
        }
        self.defaults.validate()?;
        Ok(())
    }

    /// Built-in robots plus everything in `catalog_dir`.
    pub fn catalog(&self) -> Result<Catalog> {
        let mut cat = Catalog::builtin();
        if let Some(dir) = &self.catalog_dir {
            cat.extend_from_dir(dir)?;
        }
        Ok(cat)
    }
}
