//! Run configuration, loaded from a single TOML document.
//!
//! The model API key never lives here; `api_key_env` names the environment
//! variable that holds it.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::error::CoreError;

/// Per-1K-token rates for one model, in currency units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Pricing {
    pub prompt_per_1k: f64,
    pub completion_per_1k: f64,
}

impl Pricing {
    pub const FREE: Pricing = Pricing {
        prompt_per_1k: 0.0,
        completion_per_1k: 0.0,
    };
}

/// Retry/backoff schedule for transient backend failures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BackoffConfig {
    pub base_delay_ms: u64,
    pub max_delay_ms: u64,
    /// Fractional jitter applied symmetrically, e.g. 0.2 for ±20%.
    pub jitter: f64,
}

impl Default for BackoffConfig {
    fn default() -> Self {
        Self {
            base_delay_ms: 1_000,
            max_delay_ms: 30_000,
            jitter: 0.2,
        }
    }
}

/// HTTP endpoint settings for the live backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EndpointConfig {
    pub url: String,
    /// Environment variable holding the bearer token.
    pub api_key_env: String,
    /// Wire name of the sampling knob fed from `top_k`; empty omits it.
    pub sampling_field: String,
}

impl Default for EndpointConfig {
    fn default() -> Self {
        Self {
            url: "https://api.openai.com/v1/chat/completions".to_string(),
            api_key_env: "OPENAI_API_KEY".to_string(),
            sampling_field: "top_k".to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model_id: String,
    pub temperature: f64,
    pub top_k: u32,
    pub pair_rounds: u32,
    pub finalize_rounds: u32,
    pub verification_enabled: bool,
    pub module_loc_limit: usize,
    pub output_dir: PathBuf,
    pub pricing: BTreeMap<String, Pricing>,
    pub max_retries: u32,
    pub request_timeout_secs: f64,
    /// Overrides the built-in prompt templates when set.
    pub template_dir: Option<PathBuf>,
    /// Whitespace-token budget for a rendered prompt; when exceeded the oldest
    /// modules are dropped from the accumulated-code binding.
    pub context_token_budget: Option<usize>,
    pub endpoint: EndpointConfig,
    pub backoff: BackoffConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            model_id: "gpt-4".to_string(),
            temperature: 0.1,
            top_k: 1,
            pair_rounds: 3,
            finalize_rounds: 3,
            verification_enabled: true,
            module_loc_limit: 200,
            output_dir: PathBuf::from("output"),
            pricing: BTreeMap::new(),
            max_retries: 3,
            request_timeout_secs: 120.0,
            template_dir: None,
            context_token_budget: None,
            endpoint: EndpointConfig::default(),
            backoff: BackoffConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, CoreError> {
        let config: RunConfig = toml::from_str(text).map_err(|e| CoreError::ConfigParse {
            path: PathBuf::from("<inline>"),
            message: e.to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CoreError> {
        let text = std::fs::read_to_string(path).map_err(|source| CoreError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let config: RunConfig = toml::from_str(&text).map_err(|e| CoreError::ConfigParse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        let fail = |msg: String| Err(CoreError::InvalidConfig(msg));
        if !(0.0..=2.0).contains(&self.temperature) {
            return fail(format!("temperature {} outside [0, 2]", self.temperature));
        }
        if self.pair_rounds < 1 {
            return fail("pair_rounds must be >= 1".into());
        }
        if self.finalize_rounds < 1 {
            return fail("finalize_rounds must be >= 1".into());
        }
        if self.model_id.trim().is_empty() {
            return fail("model_id is empty".into());
        }
        if !(self.request_timeout_secs > 0.0 && self.request_timeout_secs.is_finite()) {
            return fail("request_timeout_secs must be positive".into());
        }
        for (model, rate) in &self.pricing {
            if rate.prompt_per_1k < 0.0 || rate.completion_per_1k < 0.0 {
                return fail(format!("negative rate for model {model}"));
            }
        }
        if !(0.0..1.0).contains(&self.backoff.jitter) {
            return fail("backoff.jitter must be in [0, 1)".into());
        }
        Ok(())
    }

    pub fn request_timeout(&self) -> Duration {
        Duration::from_secs_f64(self.request_timeout_secs)
    }

    /// Rates for the configured model; unpriced models cost nothing.
    pub fn pricing_for_model(&self) -> Pricing {
        self.pricing
            .get(&self.model_id)
            .copied()
            .unwrap_or(Pricing::FREE)
    }
}
