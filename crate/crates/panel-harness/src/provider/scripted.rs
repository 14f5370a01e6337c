//! Scripted provider for tests: serves canned responses from labeled queues.

use std::collections::VecDeque;
use std::sync::Mutex;

use panel_core::chat::{ChatRequest, ChatResponse, FinishReason, TokenUsage};

use super::{ChatProvider, ProviderError};

/// Serves queued responses. A request first drains the earliest non-empty
/// queue whose label is a substring of the request tag, then falls back to
/// the global queue; an empty script is an error, never a silent default.
/// Every request is logged for assertions.
pub struct ScriptedProvider {
    state: Mutex<State>,
}

struct State {
    tagged: Vec<(String, VecDeque<ChatResponse>)>,
    global: VecDeque<ChatResponse>,
    log: Vec<ChatRequest>,
}

fn canned(content: &str, usage: Option<TokenUsage>) -> ChatResponse {
    ChatResponse {
        content: content.to_string(),
        finish_reason: FinishReason::Stop,
        usage,
        provider_id: "scripted".to_string(),
    }
}

impl ScriptedProvider {
    pub fn new() -> ScriptedProvider {
        ScriptedProvider {
            state: Mutex::new(State { tagged: Vec::new(), global: VecDeque::new(), log: Vec::new() }),
        }
    }

    /// Queues a response served to any request.
    pub fn push(&self, content: &str) {
        self.state.lock().unwrap().global.push_back(canned(content, None));
    }

    /// Queues a response with explicit token usage.
    pub fn push_usage(&self, content: &str, prompt_tokens: u64, completion_tokens: u64) {
        self.state
            .lock()
            .unwrap()
            .global
            .push_back(canned(content, Some(TokenUsage { prompt_tokens, completion_tokens })));
    }

    /// Queues a response served only to requests whose tag contains `label`.
    pub fn push_tagged(&self, label: &str, content: &str) {
        let mut state = self.state.lock().unwrap();
        match state.tagged.iter_mut().find(|(l, _)| l == label) {
            Some((_, queue)) => queue.push_back(canned(content, None)),
            None => {
                let mut queue = VecDeque::new();
                queue.push_back(canned(content, None));
                state.tagged.push((label.to_string(), queue));
            }
        }
    }

    /// Every request seen so far, in arrival order.
    pub fn requests(&self) -> Vec<ChatRequest> {
        self.state.lock().unwrap().log.clone()
    }
}

impl Default for ScriptedProvider {
    fn default() -> ScriptedProvider {
        ScriptedProvider::new()
    }
}

impl ChatProvider for ScriptedProvider {
    fn complete(&self, request: &ChatRequest) -> Result<ChatResponse, ProviderError> {
        request.validate().map_err(|e| ProviderError::InvalidRequest(e.to_string()))?;
        let mut state = self.state.lock().unwrap();
        state.log.push(request.clone());
        let tagged_hit = state
            .tagged
            .iter_mut()
            .find(|(label, queue)| request.tag.contains(label.as_str()) && !queue.is_empty())
            .and_then(|(_, queue)| queue.pop_front());
        if let Some(response) = tagged_hit {
            return Ok(response);
        }
        state
            .global
            .pop_front()
            .ok_or_else(|| ProviderError::ScriptExhausted { tag: request.tag.clone() })
    }

    fn descriptor(&self) -> String {
        "scripted".to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use panel_core::chat::ChatMessage;

    fn req(tag: &str) -> ChatRequest {
        ChatRequest {
            messages: vec![ChatMessage::user("q")],
            temperature: 0.0,
            max_tokens: 8,
            stop: vec![],
            tag: tag.to_string(),
        }
    }

    #[test]
    fn serves_in_fifo_order() {
        let p = ScriptedProvider::new();
        p.push("A");
        p.push("B");
        assert_eq!(p.complete(&req("x")).unwrap().content, "A");
        assert_eq!(p.complete(&req("x")).unwrap().content, "B");
    }

    #[test]
    fn exhausted_script_is_an_error() {
        let p = ScriptedProvider::new();
        p.push("only");
        p.complete(&req("x")).unwrap();
        match p.complete(&req("x")) {
            Err(ProviderError::ScriptExhausted { tag }) => assert_eq!(tag, "x"),
            other => panic!("expected exhaustion, got {other:?}"),
        }
    }

    #[test]
    fn tagged_queues_match_by_substring() {
        let p = ScriptedProvider::new();
        p.push_tagged("stage1-greedy", "greedy step");
        p.push_tagged("stage2", "critique text");
        p.push("fallback");
        assert_eq!(p.complete(&req("task=t1;step=1;stage2-critique-c0-a0")).unwrap().content, "critique text");
        assert_eq!(p.complete(&req("task=t1;step=1;stage1-greedy")).unwrap().content, "greedy step");
        assert_eq!(p.complete(&req("task=t1;step=1;stage3-decide-crit")).unwrap().content, "fallback");
    }

    #[test]
    fn logs_every_request() {
        let p = ScriptedProvider::new();
        p.push("A");
        p.push("B");
        p.complete(&req("first")).unwrap();
        p.complete(&req("second")).unwrap();
        let log = p.requests();
        assert_eq!(log.len(), 2);
        assert_eq!(log[0].tag, "first");
        assert_eq!(log[1].tag, "second");
    }

    #[test]
    fn rejects_invalid_requests() {
        let p = ScriptedProvider::new();
        p.push("A");
        let mut bad = req("x");
        bad.messages.clear();
        assert!(matches!(p.complete(&bad), Err(ProviderError::InvalidRequest(_))));
    }
}
