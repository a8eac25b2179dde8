use std::collections::HashMap;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use thiserror::Error;

use super::ImageSize;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GenerateError {
    /// Provider moderation refused the prompt. Terminal, never retried.
    #[error("blocked by moderation: {0}")]
    Blocked(String),
    #[error("transient provider error: {0}")]
    Transient(String),
    #[error("request rejected: {0}")]
    Permanent(String),
}

/// An image-generation backend. Must tolerate concurrent calls.
pub trait ImageClient: Send + Sync {
    fn generate(&self, prompt: &str, size: ImageSize) -> Result<Vec<u8>, GenerateError>;
}

/// A valid 1×1 grey PNG.
pub const PLACEHOLDER_PNG: &[u8] = &[
    0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a, 0x00, 0x00, 0x00, 0x0d, 0x49, 0x48, 0x44, 0x52,
    0x00, 0x00, 0x00, 0x01, 0x00, 0x00, 0x00, 0x01, 0x08, 0x00, 0x00, 0x00, 0x00, 0x3a, 0x7e, 0x9b,
    0x55, 0x00, 0x00, 0x00, 0x0a, 0x49, 0x44, 0x41, 0x54, 0x78, 0x9c, 0x63, 0x68, 0x00, 0x00, 0x00,
    0x82, 0x00, 0x81, 0x77, 0xcd, 0x72, 0xb6, 0x00, 0x00, 0x00, 0x00, 0x49, 0x45, 0x4e, 0x44, 0xae,
    0x42, 0x60, 0x82,
];

/// [`PLACEHOLDER_PNG`] with `text` stored in a `tEXt` chunk under the
/// keyword `prompt`, so a text-aware embedding can tell placeholders apart.
pub fn placeholder_png_with_text(text: &str) -> Vec<u8> {
    let (head, iend) = PLACEHOLDER_PNG.split_at(PLACEHOLDER_PNG.len() - 12);
    let mut body = b"tEXt".to_vec();
    body.extend_from_slice(b"prompt\0");
    body.extend(text.chars().map(|c| if (c as u32) < 256 { c as u8 } else { b'?' }));
    let mut out = head.to_vec();
    out.extend_from_slice(&((body.len() - 4) as u32).to_be_bytes());
    out.extend_from_slice(&body);
    out.extend_from_slice(&crc32fast::hash(&body).to_be_bytes());
    out.extend_from_slice(iend);
    out
}

/// Scripted provider for tests and dry runs.
///
/// Prompts containing a block token are refused by "moderation", prompts
/// containing a reject token fail permanently, and every prompt fails
/// transiently for its first `transient_failures` calls. Successful calls
/// return [`placeholder_png_with_text`] of the prompt.
#[derive(Debug, Default)]
pub struct MockImageClient {
    pub block_tokens: Vec<String>,
    pub reject_tokens: Vec<String>,
    pub transient_failures: u32,
    calls: AtomicUsize,
    per_prompt: Mutex<HashMap<String, u32>>,
    log: Mutex<Vec<String>>,
}

impl MockImageClient {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn blocking<I, S>(mut self, tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.block_tokens = tokens.into_iter().map(Into::into).collect();
        self
    }

    pub fn rejecting<I, S>(mut self, tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.reject_tokens = tokens.into_iter().map(Into::into).collect();
        self
    }

    pub fn flaky(mut self, transient_failures: u32) -> Self {
        self.transient_failures = transient_failures;
        self
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }

    pub fn calls_for(&self, prompt: &str) -> u32 {
        self.per_prompt.lock().unwrap().get(prompt).copied().unwrap_or(0)
    }

    /// Prompts in the order they were received.
    pub fn prompts(&self) -> Vec<String> {
        self.log.lock().unwrap().clone()
    }
}

impl ImageClient for MockImageClient {
    fn generate(&self, prompt: &str, _size: ImageSize) -> Result<Vec<u8>, GenerateError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        self.log.lock().unwrap().push(prompt.to_string());
        let n = {
            let mut map = self.per_prompt.lock().unwrap();
            let n = map.entry(prompt.to_string()).or_insert(0);
            *n += 1;
            *n
        };
        if let Some(t) = self.block_tokens.iter().find(|t| prompt.contains(t.as_str())) {
            return Err(GenerateError::Blocked(format!("content policy: `{t}`")));
        }
        if let Some(t) = self.reject_tokens.iter().find(|t| prompt.contains(t.as_str())) {
            return Err(GenerateError::Permanent(format!("invalid request: `{t}`")));
        }
        if n <= self.transient_failures {
            return Err(GenerateError::Transient(format!("503 on call {n}")));
        }
        Ok(placeholder_png_with_text(prompt))
    }
}
