use serde::{Deserialize, Serialize};

use crate::anchor::DEFAULT_FUZZY_THRESHOLD;
use crate::domain::DEFAULT_LOCALE;

/// Tunables for question validation and draft generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EngineConfig {
    pub question_cap: usize,
    pub fuzzy_threshold: f64,
    /// Case-insensitive patterns for catch-all choices.
    pub other_patterns: Vec<String>,
    /// Total attempts for question generation (provider or schema failures).
    pub max_attempts: u32,
    pub regeneration_limit: u32,
    pub default_locale: String,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            question_cap: 10,
            fuzzy_threshold: DEFAULT_FUZZY_THRESHOLD,
            other_patterns: vec!["other".to_string(), "その他".to_string()],
            max_attempts: 3,
            regeneration_limit: 10,
            default_locale: DEFAULT_LOCALE.to_string(),
        }
    }
}
