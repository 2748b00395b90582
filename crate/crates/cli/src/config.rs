//! Optional TOML configuration file.
//!
//! ```toml
//! provider = "mock"
//!
//! [llm]
//! base_url = "https://api.openai.com/v1"
//! model_name = "gpt-4o"
//!
//! [engine]
//! question_cap = 10
//!
//! [ingest]
//! max_body_chars = 20000
//!
//! [service]
//! ttl_seconds = 86400
//! cors_origins = ["http://localhost:5173"]
//! ```
//!
//! The API key is only ever read from `QAREPLY_API_KEY`.

use std::path::Path;

use clap::ValueEnum;
use qareply_core::{EngineConfig, IngestConfig, ProviderConfig};
use qareply_service::ServiceConfig;
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProviderKind {
    Live,
    Mock,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum)]
pub enum OutputFormat {
    Json,
    #[default]
    Pretty,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub provider: Option<ProviderKind>,
    pub llm: ProviderConfig,
    pub engine: EngineConfig,
    pub ingest: IngestConfig,
    pub service: ServiceConfig,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let mut config: Self = toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        config.service.engine = config.engine.clone();
        config.service.ingest = config.ingest.clone();
        Ok(config)
    }
}
