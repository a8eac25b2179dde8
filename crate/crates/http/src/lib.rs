//! HTTP implementations of the accimg client traits: an OpenAI-compatible
//! chat client, an image-generation client and a client for the embedding
//! service.

mod chat;
mod clipd;
mod image;

use std::time::Duration;

use serde::Serialize;
use ureq::Agent;

pub use chat::HttpChatClient;
pub use clipd::ClipdBackend;
pub use image::HttpImageClient;

/// Response bodies larger than this are refused.
const BODY_LIMIT: u64 = 64 * 1024 * 1024;

/// Outcome of one HTTP exchange that reached the server.
#[derive(Debug)]
pub(crate) struct Reply {
    pub status: u16,
    pub body: String,
}

/// Failure before a status line was received.
#[derive(Debug)]
pub(crate) struct NetError(pub String);

pub(crate) fn agent(timeout: Duration) -> Agent {
    Agent::config_builder()
        .http_status_as_error(false)
        .timeout_global(Some(timeout))
        .build()
        .into()
}

pub(crate) fn join(base: &str, path: &str) -> String {
    let base = base.trim_end_matches('/');
    if base.ends_with(path) {
        base.to_string()
    } else {
        format!("{base}{path}")
    }
}

fn finish(resp: Result<ureq::http::Response<ureq::Body>, ureq::Error>) -> Result<Reply, NetError> {
    let mut resp = resp.map_err(|e| NetError(e.to_string()))?;
    let status = resp.status().as_u16();
    let body = resp
        .body_mut()
        .with_config()
        .limit(BODY_LIMIT)
        .read_to_string()
        .map_err(|e| NetError(format!("reading response: {e}")))?;
    Ok(Reply { status, body })
}

pub(crate) fn post_json(agent: &Agent, url: &str, key: Option<&str>, body: &impl Serialize) -> Result<Reply, NetError> {
    let mut req = agent.post(url).header("Accept", "application/json");
    if let Some(k) = key {
        req = req.header("Authorization", &format!("Bearer {k}"));
    }
    finish(req.send_json(body))
}

pub(crate) fn get(agent: &Agent, url: &str) -> Result<Reply, NetError> {
    finish(agent.get(url).call())
}

pub(crate) fn get_bytes(agent: &Agent, url: &str) -> Result<(u16, Vec<u8>), NetError> {
    let mut resp = agent.get(url).call().map_err(|e| NetError(e.to_string()))?;
    let status = resp.status().as_u16();
    let bytes = resp
        .body_mut()
        .with_config()
        .limit(BODY_LIMIT)
        .read_to_vec()
        .map_err(|e| NetError(format!("reading response: {e}")))?;
    Ok((status, bytes))
}

/// Server-side problems worth retrying.
pub(crate) fn is_transient(status: u16) -> bool {
    status == 408 || status == 429 || status >= 500
}

/// First 300 characters of an error body for messages.
pub(crate) fn excerpt(body: &str) -> String {
    let mut s: String = body.chars().take(300).collect();
    if body.chars().count() > 300 {
        s.push('…');
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn url_joining() {
        assert_eq!(join("http://h/v1/", "/chat/completions"), "http://h/v1/chat/completions");
        assert_eq!(join("http://h/v1/chat/completions", "/chat/completions"), "http://h/v1/chat/completions");
    }

    #[test]
    fn status_classes() {
        assert!(is_transient(503) && is_transient(429) && is_transient(408));
        assert!(!is_transient(400) && !is_transient(401));
    }
}
