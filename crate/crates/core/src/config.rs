//! Engine configuration file (TOML) and backend selection.
//!
//! ```toml
//! [expansion]
//! beam = 30
//! mu = 0.5
//! lambda = 0.9
//!
//! [backend]
//! kind = "remote"
//! server_url = "http://127.0.0.1:8000"
//! ```

use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{ApConvention, DEFAULT_KS};
use crate::expand::ExpansionConfig;
use crate::lm::{LmBackend, RemoteLm, RemoteLmConfig, ToyLm};
use crate::prompt::PromptConfig;

pub const ENV_SERVER_URL: &str = "SETEXPAND_SERVER_URL";
pub const ENV_CACHE_DIR: &str = "SETEXPAND_CACHE_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    #[default]
    Toy,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    /// Saved toy model (see `train-toy`).
    pub toy_model: Option<PathBuf>,
    pub server_url: Option<String>,
    pub max_in_flight: usize,
    pub retries: u32,
    pub timeout_secs: u64,
    pub binary_logprobs: bool,
}

impl Default for BackendConfig {
    fn default() -> Self {
        let remote = RemoteLmConfig::default();
        Self {
            kind: BackendKind::Toy,
            toy_model: None,
            server_url: None,
            max_in_flight: remote.max_in_flight,
            retries: remote.retries,
            timeout_secs: remote.timeout.as_secs(),
            binary_logprobs: remote.binary_logprobs,
        }
    }
}

impl BackendConfig {
    pub fn open(&self) -> Result<Box<dyn LmBackend>> {
        match self.kind {
            BackendKind::Toy => {
                let path = self.toy_model.as_ref().ok_or_else(|| {
                    Error::InvalidConfig("the toy backend needs a model file (backend.toy_model or --toy-model)".into())
                })?;
                Ok(Box::new(ToyLm::load(path)?))
            }
            BackendKind::Remote => {
                let url = self
                    .server_url
                    .clone()
                    .ok_or_else(|| Error::InvalidConfig(format!("the remote backend needs a server URL ({ENV_SERVER_URL})")))?;
                let cfg = RemoteLmConfig {
                    base_url: url,
                    max_in_flight: self.max_in_flight,
                    retries: self.retries,
                    timeout: Duration::from_secs(self.timeout_secs),
                    binary_logprobs: self.binary_logprobs,
                    ..RemoteLmConfig::default()
                };
                Ok(Box::new(RemoteLm::connect(cfg)?))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub convention: ApConvention,
    pub ks: Vec<usize>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            convention: ApConvention::HitCount,
            ks: DEFAULT_KS.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineConfig {
    pub prompt: PromptConfig,
    pub expansion: ExpansionConfig,
    pub backend: BackendConfig,
    pub eval: EvalConfig,
    pub cache_dir: Option<PathBuf>,
}

impl EngineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::InvalidConfig(m) => Error::InvalidConfig(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Environment overrides sit between the file and command-line flags.
    pub fn apply_env(&mut self) {
        if let Ok(url) = std::env::var(ENV_SERVER_URL) {
            if !url.is_empty() {
                self.backend.server_url = Some(url);
            }
        }
        if let Ok(dir) = std::env::var(ENV_CACHE_DIR) {
            if !dir.is_empty() {
                self.cache_dir = Some(PathBuf::from(dir));
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.expansion.validate()?;
        self.prompt.validate()?;
        if self.eval.ks.is_empty() || self.eval.ks.contains(&0) {
            return Err(Error::InvalidConfig("eval.ks must be non-empty positive integers".into()));
        }
        if self.backend.max_in_flight == 0 {
            return Err(Error::InvalidConfig("backend.max_in_flight must be at least 1".into()));
        }
        Ok(())
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}
