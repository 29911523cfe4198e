//! JSON configuration file; command-line flags override its values.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use splatwright::broker::BrokerConfig;
use splatwright::genmod::{Backend, HttpBackend, MockBackend};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BackendConfig {
    #[default]
    Mock,
    Http {
        base_url: String,
    },
}

impl BackendConfig {
    pub fn build(&self, broker: &BrokerConfig) -> Arc<dyn Backend> {
        match self {
            Self::Mock => Arc::new(MockBackend::new()),
            Self::Http { base_url } => {
                Arc::new(HttpBackend::new(base_url.clone()).with_timeouts(broker.online_timeout(), broker.offline_timeout()))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CliConfig {
    pub backend: BackendConfig,
    pub scene_path: Option<PathBuf>,
    /// Defaults to `assets/` next to the scene file.
    pub asset_dir: Option<PathBuf>,
    pub port: u16,
    pub broker: BrokerConfig,
}

impl Default for CliConfig {
    fn default() -> Self {
        Self {
            backend: BackendConfig::Mock,
            scene_path: None,
            asset_dir: None,
            port: 8080,
            broker: BrokerConfig::default(),
        }
    }
}

impl CliConfig {
    pub fn load(path: &Path) -> Result<CliConfig> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn asset_dir(&self) -> PathBuf {
        if let Some(dir) = &self.asset_dir {
            return dir.clone();
        }
        match self.scene_path.as_deref().and_then(Path::parent) {
            Some(parent) if !parent.as_os_str().is_empty() => parent.join("assets"),
            _ => PathBuf::from("assets"),
        }
    }
}
