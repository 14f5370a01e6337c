//! OpenAI-compatible HTTP provider over `POST {endpoint}/chat/completions`.

use std::thread;
use std::time::Duration;

use panel_core::chat::{ChatRequest, ChatResponse, FinishReason, TokenUsage};
use serde_json::{json, Value};

use super::{ChatProvider, ProviderConfig, ProviderError};

pub struct HttpProvider {
    client: reqwest::blocking::Client,
    endpoint_url: String,
    model_name: String,
    api_key: Option<String>,
    max_retries: u32,
}

/// The JSON body sent to the endpoint; the request tag stays local.
pub fn build_chat_body(request: &ChatRequest, model_name: &str) -> Value {
    let mut body = json!({
        "model": model_name,
        "messages": request.messages.iter().map(|m| {
            json!({"role": m.role.as_str(), "content": m.content})
        }).collect::<Vec<_>>(),
        "temperature": request.temperature,
        "max_tokens": request.max_tokens,
    });
    if !request.stop.is_empty() {
        body["stop"] = json!(request.stop);
    }
    body
}

/// Pulls content, finish reason, and usage out of a chat completion reply.
pub fn parse_chat_response(value: &Value, model_name: &str) -> Result<ChatResponse, String> {
    let message = value
        .pointer("/choices/0/message/content")
        .and_then(Value::as_str)
        .ok_or("reply lacks choices[0].message.content")?;
    let finish_reason = match value.pointer("/choices/0/finish_reason").and_then(Value::as_str) {
        Some("length") => FinishReason::Length,
        Some("stop") | None => FinishReason::Stop,
        Some(_) => FinishReason::Stop,
    };
    let usage = value.get("usage").and_then(|u| {
        Some(TokenUsage {
            prompt_tokens: u.get("prompt_tokens")?.as_u64()?,
            completion_tokens: u.get("completion_tokens")?.as_u64()?,
        })
    });
    Ok(ChatResponse {
        content: message.to_string(),
        finish_reason,
        usage,
        provider_id: model_name.to_string(),
    })
}

fn backoff_delay(attempt: u32) -> Duration {
    let ms = 200u64.saturating_mul(1 << attempt.min(5));
    Duration::from_millis(ms.min(5_000))
}

fn retryable_status(status: u16) -> bool {
    status == 429 || (500..600).contains(&status)
}

impl HttpProvider {
    pub fn from_config(cfg: &ProviderConfig) -> Result<HttpProvider, ProviderError> {
        let endpoint_url = cfg
            .endpoint_url
            .clone()
            .ok_or_else(|| ProviderError::InvalidRequest("http provider requires endpoint_url".to_string()))?;
        let model_name = cfg
            .model_name
            .clone()
            .ok_or_else(|| ProviderError::InvalidRequest("http provider requires model_name".to_string()))?;
        let api_key = match &cfg.api_key_env {
            Some(var) => Some(
                std::env::var(var).map_err(|_| ProviderError::MissingEnv { var: var.clone() })?,
            ),
            None => None,
        };
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(cfg.timeout_secs))
            .build()
            .map_err(|e| ProviderError::Transport { attempts: 0, message: e.to_string() })?;
        Ok(HttpProvider {
            client,
            endpoint_url: endpoint_url.trim_end_matches('/').to_string(),
            model_name,
            api_key,
            max_retries: cfg.max_retries,
        })
    }

    fn url(&self) -> String {
        format!("{}/chat/completions", self.endpoint_url)
    }
}

impl ChatProvider for HttpProvider {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        request.validate().map_err(|e| ProviderError::InvalidRequest(e.to_string()))?;
        let body = build_chat_body(request, &self.model_name);
        let mut last_err: Option<ProviderError> = None;
        for attempt in 0..=self.max_retries {
            if attempt > 0 {
                thread::sleep(backoff_delay(attempt - 1));
            }
            let attempts = attempt + 1;
            let mut call = self.client.post(self.url()).json(&body);
            if let Some(key) = &self.api_key {
                call = call.bearer_auth(key);
            }
            match call.send() {
                Err(e) => {
                    last_err = Some(ProviderError::Transport { attempts, message: e.to_string() });
                }
                Ok(response) => {
                    let status = response.status().as_u16();
                    let text = response.text().unwrap_or_default();
                    if status == 200 {
                        let value: Value = serde_json::from_str(&text).map_err(|e| {
                            ProviderError::Endpoint {
                                status,
                                attempts,
                                body: format!("unparseable reply: {e}"),
                            }
                        })?;
                        return parse_chat_response(&value, &self.model_name).map_err(|message| {
                            ProviderError::Endpoint { status, attempts, body: message }
                        });
                    }
                    let err = ProviderError::Endpoint { status, attempts, body: truncate(&text, 400) };
                    if !retryable_status(status) {
                        return Err(err);
                    }
                    last_err = Some(err);
                }
            }
        }
        Err(last_err.expect("at least one attempt was made"))
    }

    fn descriptor(&self) -> String {
        self.model_name.clone()
    }
}

fn truncate(s: &str, limit: usize) -> String {
    if s.len() <= limit {
        return s.to_string();
    }
    let mut end = limit;
    while !s.is_char_boundary(end) {
        end -= 1;
    }
    format!("{}...", &s[..end])
}
