use std::time::Duration;

use accimg_core::genpipe::{GenerateError, ImageClient, ImageSize};
use base64::Engine;
use serde_json::{json, Value};
use ureq::Agent;

use crate::{agent, excerpt, get_bytes, is_transient, join, post_json};

/// Client for an OpenAI-style `/images/generations` endpoint.
///
/// A 400 response whose error code or type mentions a content policy or
/// safety system is reported as a moderation block; 408, 429 and 5xx
/// responses and network failures are transient; every other 4xx is
/// permanent.
pub struct HttpImageClient {
    agent: Agent,
    url: String,
    api_key: Option<String>,
    model: String,
}

impl HttpImageClient {
    pub fn new(base_url: &str, api_key: Option<String>, model: impl Into<String>) -> Self {
        HttpImageClient {
            agent: agent(Duration::from_secs(300)),
            url: join(base_url, "/images/generations"),
            api_key,
            model: model.into(),
        }
    }
}

fn is_moderation(body: &Value) -> Option<String> {
    let err = body.get("error")?;
    let field = |k: &str| err.get(k).and_then(Value::as_str).unwrap_or_default().to_lowercase();
    let tags = format!("{} {}", field("code"), field("type"));
    let hit = ["content_policy", "moderation", "safety"].iter().any(|t| tags.contains(t));
    hit.then(|| err.get("message").and_then(Value::as_str).unwrap_or("blocked by content policy").to_string())
}

impl ImageClient for HttpImageClient {
    fn generate(&self, prompt: &str, size: ImageSize) -> Result<Vec<u8>, GenerateError> {
        let body = json!({
            "model": self.model,
            "prompt": prompt,
            "n": 1,
            "size": size.to_string(),
            "response_format": "b64_json",
        });
        let reply = post_json(&self.agent, &self.url, self.api_key.as_deref(), &body)
            .map_err(|e| GenerateError::Transient(e.0))?;
        let parsed: Option<Value> = serde_json::from_str(&reply.body).ok();
        match reply.status {
            200..=299 => {}
            400 | 403 => {
                if let Some(reason) = parsed.as_ref().and_then(is_moderation) {
                    return Err(GenerateError::Blocked(reason));
                }
                return Err(GenerateError::Permanent(format!("HTTP {}: {}", reply.status, excerpt(&reply.body))));
            }
            s if is_transient(s) => {
                return Err(GenerateError::Transient(format!("HTTP {s}: {}", excerpt(&reply.body))));
            }
            s => return Err(GenerateError::Permanent(format!("HTTP {s}: {}", excerpt(&reply.body)))),
        }
        let first = parsed
            .as_ref()
            .and_then(|v| v.get("data"))
            .and_then(|d| d.get(0))
            .ok_or_else(|| GenerateError::Permanent(format!("no image in response: {}", excerpt(&reply.body))))?;
        if let Some(b64) = first.get("b64_json").and_then(Value::as_str) {
            return base64::engine::general_purpose::STANDARD
                .decode(b64)
                .map_err(|e| GenerateError::Permanent(format!("bad base64 image: {e}")));
        }
        if let Some(url) = first.get("url").and_then(Value::as_str) {
            let (status, bytes) = get_bytes(&self.agent, url).map_err(|e| GenerateError::Transient(e.0))?;
            return match status {
                200..=299 => Ok(bytes),
                s if is_transient(s) => Err(GenerateError::Transient(format!("image download HTTP {s}"))),
                s => Err(GenerateError::Permanent(format!("image download HTTP {s}"))),
            };
        }
        Err(GenerateError::Permanent("response has neither b64_json nor url".into()))
    }
}
