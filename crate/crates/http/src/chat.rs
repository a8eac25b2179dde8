use std::time::Duration;

use accimg_core::templates::{ChatClient, ChatError, ChatRequest};
use serde::Deserialize;
use serde_json::json;
use ureq::Agent;

use crate::{agent, excerpt, is_transient, join, post_json};

/// OpenAI-compatible `/chat/completions` client.
pub struct HttpChatClient {
    agent: Agent,
    url: String,
    api_key: Option<String>,
    model: String,
}

#[derive(Deserialize)]
struct Completion {
    choices: Vec<Choice>,
}

#[derive(Deserialize)]
struct Choice {
    message: ChoiceMessage,
}

#[derive(Deserialize)]
struct ChoiceMessage {
    content: Option<String>,
}

impl HttpChatClient {
    /// `base_url` is the API root (for example `https://host/v1`) or the
    /// full completions URL.
    pub fn new(base_url: &str, api_key: Option<String>, model: impl Into<String>) -> Self {
        HttpChatClient {
            agent: agent(Duration::from_secs(120)),
            url: join(base_url, "/chat/completions"),
            api_key,
            model: model.into(),
        }
    }
}

impl ChatClient for HttpChatClient {
    fn send(&self, request: &ChatRequest) -> Result<String, ChatError> {
        let body = json!({
            "model": self.model,
            "messages": request.messages,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        });
        let reply = post_json(&self.agent, &self.url, self.api_key.as_deref(), &body)
            .map_err(|e| ChatError::Transient(e.0))?;
        match reply.status {
            200..=299 => {}
            s if is_transient(s) => return Err(ChatError::Transient(format!("HTTP {s}: {}", excerpt(&reply.body)))),
            s => return Err(ChatError::Permanent(format!("HTTP {s}: {}", excerpt(&reply.body)))),
        }
        let completion: Completion = serde_json::from_str(&reply.body)
            .map_err(|e| ChatError::Permanent(format!("unexpected completion body: {e}")))?;
        completion
            .choices
            .into_iter()
            .next()
            .and_then(|c| c.message.content)
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .ok_or_else(|| ChatError::Transient("completion had no content".into()))
    }
}
