//! TOML configuration for runs: providers, search settings, run settings.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use panel_core::prompts::PromptPack;
use panel_core::trace::SearchConfig;

use crate::provider::ProviderConfig;

/// Settings that shape a whole run rather than a single step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSettings {
    /// Solutions sampled per task by the solution-level methods.
    pub n_solutions: usize,
    /// Independent repetitions of each task, for pass@k estimation.
    pub k_samples: usize,
    /// Token budget for complete-solution requests.
    pub max_tokens_solution: u32,
    /// Directory of prompt text files overriding the built-in pack.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub prompt_pack: Option<String>,
}

impl Default for RunSettings {
    fn default() -> RunSettings {
        RunSettings { n_solutions: 5, k_samples: 1, max_tokens_solution: 4096, prompt_pack: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarnessConfig {
    pub policy: ProviderConfig,
    /// Critic provider; the policy provider critiques its own work when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub critic: Option<ProviderConfig>,
    pub search: SearchConfig,
    pub run: RunSettings,
}

impl Default for HarnessConfig {
    fn default() -> HarnessConfig {
        HarnessConfig {
            policy: ProviderConfig::scripted_oracle(),
            critic: None,
            search: SearchConfig::default(),
            run: RunSettings::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("cannot read prompt file {path}: {source}")]
    PromptIo {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid prompt pack: {0}")]
    Prompt(String),
}

impl HarnessConfig {
    pub fn from_toml_str(text: &str) -> Result<HarnessConfig, ConfigError> {
        let config: HarnessConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<HarnessConfig, ConfigError> {
        let text = fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        HarnessConfig::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.policy.validate().map_err(|e| ConfigError::Invalid(format!("policy: {e}")))?;
        if let Some(critic) = &self.critic {
            critic.validate().map_err(|e| ConfigError::Invalid(format!("critic: {e}")))?;
        }
        self.search.validate().map_err(|e| ConfigError::Invalid(format!("search: {e}")))?;
        if self.run.n_solutions == 0 {
            return Err(ConfigError::Invalid("run.n_solutions must be at least 1".to_string()));
        }
        if self.run.k_samples == 0 {
            return Err(ConfigError::Invalid("run.k_samples must be at least 1".to_string()));
        }
        if self.run.max_tokens_solution == 0 {
            return Err(ConfigError::Invalid("run.max_tokens_solution must be positive".to_string()));
        }
        Ok(())
    }

    /// The critic provider config, defaulting to the policy provider.
    pub fn critic_config(&self) -> ProviderConfig {
        self.critic.clone().unwrap_or_else(|| self.policy.clone())
    }

    /// Builds the prompt pack, applying any per-file overrides found in the
    /// configured directory. Missing files keep their built-in text.
    pub fn load_prompt_pack(&self) -> Result<PromptPack, ConfigError> {
        let mut pack = PromptPack::default();
        if let Some(dir) = &self.run.prompt_pack {
            let dir = Path::new(dir);
            for stem in PromptPack::FILE_STEMS {
                let path = dir.join(format!("{stem}.txt"));
                if path.exists() {
                    let text = fs::read_to_string(&path)
                        .map_err(|source| ConfigError::PromptIo { path: path.display().to_string(), source })?;
                    pack.set_file(stem, text).map_err(|e| ConfigError::Prompt(e.to_string()))?;
                }
            }
        }
        pack.validate().map_err(|e| ConfigError::Prompt(e.to_string()))?;
        Ok(pack)
    }
}
