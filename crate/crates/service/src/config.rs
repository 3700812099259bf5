//! Service configuration loaded from a TOML file.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use garden_core::agents::{AgentBackend, RemoteBackend, RemoteBackendConfig, RuleBackend};
use garden_core::assets::{AssetError, AssetLibrary};
use garden_core::pipeline::PipelineConfig;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config {path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
    #[error(transparent)]
    Library(#[from] AssetError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendChoice {
    #[default]
    Rule,
    Llm,
}

impl FromStr for BackendChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rule" => Ok(BackendChoice::Rule),
            "llm" => Ok(BackendChoice::Llm),
            other => Err(format!("unknown backend {other:?} (expected rule or llm)")),
        }
    }
}

/// Every key is optional; missing keys take their defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    /// Asset library file; the bundled fixture when absent.
    pub library: Option<PathBuf>,
    pub pipeline: PipelineConfig,
    pub remote: RemoteBackendConfig,
}

impl ServiceConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        let mut cfg: ServiceConfig =
            toml::from_str(&text).map_err(|e| ConfigError::Parse { path: path.into(), message: e.to_string() })?;
        if let (Some(lib), Some(dir)) = (&cfg.library, path.parent()) {
            if lib.is_relative() {
                cfg.library = Some(dir.join(lib));
            }
        }
        cfg.pipeline.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(cfg)
    }

    pub fn library(&self) -> Result<AssetLibrary, ConfigError> {
        Ok(match &self.library {
            Some(p) => AssetLibrary::load(p)?,
            None => AssetLibrary::bundled(),
        })
    }

    pub fn backend(&self, choice: BackendChoice) -> Box<dyn AgentBackend> {
        match choice {
            BackendChoice::Rule => Box::new(RuleBackend::default()),
            BackendChoice::Llm => Box::new(RemoteBackend::new(self.remote.clone().with_env_key(), RuleBackend::default())),
        }
    }

    /// The pipeline config with a JSON merge patch applied.
    pub fn pipeline_with(&self, patch: Option<&Value>) -> Result<PipelineConfig, ConfigError> {
        let Some(patch) = patch else {
            return Ok(self.pipeline.clone());
        };
        let mut base = serde_json::to_value(&self.pipeline).expect("config serializes");
        merge_patch(&mut base, patch);
        let cfg: PipelineConfig = serde_json::from_value(base).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        cfg.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Ok(cfg)
    }
}

/// JSON merge patch: objects merge recursively, `null` deletes, anything
/// else replaces.
pub fn merge_patch(target: &mut Value, patch: &Value) {
    let Value::Object(p) = patch else {
        *target = patch.clone();
        return;
    };
    if !target.is_object() {
        *target = Value::Object(Default::default());
    }
    let t = target.as_object_mut().expect("object");
    for (k, v) in p {
        if v.is_null() {
            t.remove(k);
        } else {
            merge_patch(t.entry(k.clone()).or_insert(Value::Null), v);
        }
    }
}
