//! Chat completion providers behind one synchronous trait.

use std::sync::{Arc, Mutex};

use panel_core::chat::{ChatRequest, ChatResponse, TokenUsage};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub mod http;
pub mod oracle;
pub mod replay;
pub mod scripted;

pub use http::HttpProvider;
pub use oracle::OracleProvider;
pub use replay::{ReplayMode, ReplayProvider};
pub use scripted::ScriptedProvider;

#[derive(Debug, Error)]
pub enum ProviderError {
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("scripted queue exhausted for tag {tag:?}")]
    ScriptExhausted { tag: String },
    #[error("replay miss for digest {digest} (tag {tag:?})")]
    ReplayMiss { digest: String, tag: String },
    #[error("endpoint returned status {status} after {attempts} attempt(s): {body}")]
    Endpoint { status: u16, attempts: u32, body: String },
    #[error("transport error after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },
    #[error("environment variable {var} is not set")]
    MissingEnv { var: String },
    #[error("replay log: {0}")]
    ReplayLog(String),
}

/// A synchronous chat completion backend. Implementations must be safe to
/// call from several threads at once.
pub trait ChatProvider: Send + Sync {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError>;

    /// Short human-readable identity (model name or script label), recorded
    /// in traces and run snapshots.
    fn descriptor(&self) -> String;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    Scripted,
    ScriptedOracle,
    Http,
    Replay,
}

fn default_timeout_secs() -> u64 {
    120
}

fn default_max_retries() -> u32 {
    2
}

/// Provider settings as they appear in the harness config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProviderConfig {
    pub kind: ProviderKind,
    /// Base URL of an OpenAI-compatible endpoint (http kind only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint_url: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model_name: Option<String>,
    /// Environment variable holding the bearer token (http kind only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub api_key_env: Option<String>,
    #[serde(default = "default_timeout_secs")]
    pub timeout_secs: u64,
    #[serde(default = "default_max_retries")]
    pub max_retries: u32,
    /// Replay log to serve responses from (replay kind only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replay_log: Option<String>,
}

impl ProviderConfig {
    pub fn scripted_oracle() -> ProviderConfig {
        ProviderConfig {
            kind: ProviderKind::ScriptedOracle,
            endpoint_url: None,
            model_name: None,
            api_key_env: None,
            timeout_secs: default_timeout_secs(),
            max_retries: default_max_retries(),
            replay_log: None,
        }
    }

    pub fn validate(&self) -> Result<(), ProviderError> {
        match self.kind {
            ProviderKind::Http => {
                if self.endpoint_url.is_none() {
                    return Err(ProviderError::InvalidRequest(
                        "http provider requires endpoint_url".to_string(),
                    ));
                }
                if self.model_name.is_none() {
                    return Err(ProviderError::InvalidRequest(
                        "http provider requires model_name".to_string(),
                    ));
                }
                Ok(())
            }
            ProviderKind::Replay => {
                if self.replay_log.is_none() {
                    return Err(ProviderError::InvalidRequest(
                        "replay provider requires replay_log".to_string(),
                    ));
                }
                Ok(())
            }
            ProviderKind::Scripted | ProviderKind::ScriptedOracle => Ok(()),
        }
    }
}

/// Builds a provider from its config. Http providers resolve their API key
/// environment variable here, so a missing key fails at startup rather than
/// mid-run.
pub fn build_provider(cfg: &ProviderConfig) -> Result<Arc<dyn ChatProvider>, ProviderError> {
    cfg.validate()?;
    match cfg.kind {
        ProviderKind::Scripted => Ok(Arc::new(ScriptedProvider::new())),
        ProviderKind::ScriptedOracle => Ok(Arc::new(OracleProvider::new())),
        ProviderKind::Http => Ok(Arc::new(HttpProvider::from_config(cfg)?)),
        ProviderKind::Replay => {
            let path = cfg.replay_log.as_deref().expect("validated above");
            Ok(Arc::new(ReplayProvider::strict(path)?))
        }
    }
}

/// Accumulated request and token counts for one run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunUsage {
    pub requests: u64,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

impl RunUsage {
    pub fn add(&mut self, usage: Option<TokenUsage>) {
        self.requests += 1;
        if let Some(u) = usage {
            self.prompt_tokens += u.prompt_tokens;
            self.completion_tokens += u.completion_tokens;
        }
    }
}

/// Wraps a provider and totals usage across every successful call.
pub struct CountingProvider {
    inner: Arc<dyn ChatProvider>,
    usage: Mutex<RunUsage>,
}

impl CountingProvider {
    pub fn new(inner: Arc<dyn ChatProvider>) -> CountingProvider {
        CountingProvider { inner, usage: Mutex::new(RunUsage::default()) }
    }

    pub fn usage(&self) -> RunUsage {
        *self.usage.lock().unwrap()
    }
}

impl ChatProvider for CountingProvider {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        let response = self.inner.complete(request)?;
        self.usage.lock().unwrap().add(response.usage);
        Ok(response)
    }

    fn descriptor(&self) -> String {
        self.inner.descriptor()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn http_config_requires_endpoint_and_model() {
        let cfg = ProviderConfig {
            kind: ProviderKind::Http,
            ..ProviderConfig::scripted_oracle()
        };
        assert!(cfg.validate().is_err());
        let cfg = ProviderConfig {
            kind: ProviderKind::Http,
            endpoint_url: Some("http://localhost:1".to_string()),
            model_name: Some("m".to_string()),
            ..ProviderConfig::scripted_oracle()
        };
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn counting_provider_totals_usage() {
        use panel_core::chat::ChatMessage;
        let scripted = ScriptedProvider::new();
        scripted.push_usage("one", 10, 3);
        scripted.push_usage("two", 20, 5);
        let counting = CountingProvider::new(Arc::new(scripted));
        let req = ChatRequest {
            messages: vec![ChatMessage::user("x")],
            temperature: 0.0,
            max_tokens: 16,
            stop: vec![],
            tag: "t".to_string(),
        };
        counting.complete(&req).unwrap();
        counting.complete(&req).unwrap();
        let usage = counting.usage();
        assert_eq!(usage.requests, 2);
        assert_eq!(usage.prompt_tokens, 30);
        assert_eq!(usage.completion_tokens, 8);
    }
}
