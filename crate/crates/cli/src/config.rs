//! Operator settings. Each key is taken from the command-line flag if given,
//! else from the TOML config file, else from the environment, else a
//! built-in default. API keys are never read from here; the gateway reads
//! `FACTSEL_API_KEY` itself.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use factsel_core::gateway::QueryConfig;
use serde::Deserialize;

pub const CONFIG_ENV: &str = "FACTSEL_CONFIG";
pub const ENDPOINT_ENV: &str = "FACTSEL_ENDPOINT";
pub const MODEL_ID_ENV: &str = "FACTSEL_MODEL_ID";
pub const CACHE_DIR_ENV: &str = "FACTSEL_CACHE_DIR";
pub const SANDBOX_DIR_ENV: &str = "FACTSEL_SANDBOX_DIR";
pub const JOBS_ENV: &str = "FACTSEL_JOBS";

pub const DEFAULT_CACHE_DIR: &str = ".factsel/cache";
pub const DEFAULT_JOBS: usize = 4;

/// Keys accepted in the config file.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub endpoint: Option<String>,
    pub model_id: Option<String>,
    pub cache_dir: Option<PathBuf>,
    pub sandbox_dir: Option<PathBuf>,
    pub jobs: Option<usize>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<FileConfig> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

/// The same keys as given on the command line.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub endpoint: Option<String>,
    pub model_id: Option<String>,
    pub cache_dir: Option<PathBuf>,
    pub sandbox_dir: Option<PathBuf>,
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub endpoint: String,
    pub model_id: String,
    pub cache_dir: PathBuf,
    /// System temp directory when unset.
    pub sandbox_dir: Option<PathBuf>,
    pub jobs: usize,
}

impl Settings {
    pub fn resolve(flags: &Overrides, file: &FileConfig, env: impl Fn(&str) -> Option<String>) -> Result<Settings> {
        let defaults = QueryConfig::default();
        let jobs = match flags.jobs.or(file.jobs) {
            Some(j) => j,
            None => match env(JOBS_ENV) {
                Some(v) => v.trim().parse().with_context(|| format!("{JOBS_ENV}={v:?} is not a count"))?,
                None => DEFAULT_JOBS,
            },
        };
        if jobs == 0 {
            anyhow::bail!("jobs must be at least 1");
        }
        Ok(Settings {
            endpoint: flags
                .endpoint
                .clone()
                .or_else(|| file.endpoint.clone())
                .or_else(|| env(ENDPOINT_ENV))
                .unwrap_or(defaults.endpoint_url),
            model_id: flags
                .model_id
                .clone()
                .or_else(|| file.model_id.clone())
                .or_else(|| env(MODEL_ID_ENV))
                .unwrap_or(defaults.model_id),
            cache_dir: flags
                .cache_dir
                .clone()
                .or_else(|| file.cache_dir.clone())
                .or_else(|| env(CACHE_DIR_ENV).map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from(DEFAULT_CACHE_DIR)),
            sandbox_dir: flags
                .sandbox_dir
                .clone()
                .or_else(|| file.sandbox_dir.clone())
                .or_else(|| env(SANDBOX_DIR_ENV).map(PathBuf::from)),
            jobs,
        })
    }

    /// Load the config file named by `--config` or `FACTSEL_CONFIG` (if
    /// any) and resolve against the process environment.
    pub fn from_process(config: Option<&Path>, flags: &Overrides) -> Result<Settings> {
        let path = config.map(Path::to_path_buf).or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from));
        let file = match path {
            Some(p) => FileConfig::load(&p)?,
            None => FileConfig::default(),
        };
        Settings::resolve(flags, &file, |k| std::env::var(k).ok())
    }
}
