use std::time::Duration;

use accimg_core::scoring::{normalize, EmbeddingBackend, ScoringError};
use base64::Engine;
use serde::Deserialize;
use serde_json::json;
use ureq::Agent;

use crate::{agent, excerpt, get, join, post_json, Reply};

/// Items per embedding request; the service rejects larger batches.
pub const MAX_BATCH: usize = 64;

#[derive(Debug, Deserialize)]
struct Health {
    #[serde(default)]
    status: String,
    model_id: String,
    dim: usize,
}

#[derive(Debug, Deserialize)]
struct EmbedResponse {
    vectors: Vec<Vec<f64>>,
    model_id: String,
    dim: usize,
}

/// Embedding backend served over HTTP by the embedding service.
#[derive(Debug)]
pub struct ClipdBackend {
    agent: Agent,
    base: String,
    model_id: String,
    dim: usize,
}

fn backend_err(e: impl std::fmt::Display) -> ScoringError {
    ScoringError::Backend(e.to_string())
}

impl ClipdBackend {
    /// Query `/healthz` and bind to the model it reports.
    pub fn connect(base_url: &str) -> Result<Self, ScoringError> {
        let agent = agent(Duration::from_secs(300));
        let base = base_url.trim_end_matches('/').to_string();
        let reply = get(&agent, &join(&base, "/healthz")).map_err(|e| backend_err(e.0))?;
        if reply.status != 200 {
            return Err(backend_err(format!("healthz HTTP {}: {}", reply.status, excerpt(&reply.body))));
        }
        let h: Health = serde_json::from_str(&reply.body).map_err(|e| backend_err(format!("healthz: {e}")))?;
        if !h.status.is_empty() && h.status != "ok" {
            return Err(backend_err(format!("service status `{}`", h.status)));
        }
        log::info!("embedding service at {base}: {} (dim {})", h.model_id, h.dim);
        Ok(ClipdBackend { agent, base, model_id: h.model_id, dim: h.dim })
    }

    fn embed(&self, path: &str, key: &str, items: Vec<serde_json::Value>) -> Result<Vec<Vec<f64>>, ScoringError> {
        let mut out = Vec::with_capacity(items.len());
        for chunk in items.chunks(MAX_BATCH) {
            let body = json!({ key: chunk });
            let Reply { status, body } =
                post_json(&self.agent, &join(&self.base, path), None, &body).map_err(|e| backend_err(e.0))?;
            if status != 200 {
                return Err(backend_err(format!("{path} HTTP {status}: {}", excerpt(&body))));
            }
            let resp: EmbedResponse = serde_json::from_str(&body).map_err(|e| backend_err(format!("{path}: {e}")))?;
            if resp.vectors.len() != chunk.len() {
                return Err(backend_err(format!("sent {} items, got {} vectors", chunk.len(), resp.vectors.len())));
            }
            if resp.model_id != self.model_id || resp.dim != self.dim {
                return Err(backend_err(format!(
                    "service now reports {} (dim {}), expected {} (dim {})",
                    resp.model_id, resp.dim, self.model_id, self.dim
                )));
            }
            for v in resp.vectors {
                if v.len() != self.dim {
                    return Err(ScoringError::DimensionMismatch { expected: self.dim, found: v.len() });
                }
                out.push(normalize(&v)?);
            }
        }
        Ok(out)
    }
}

impl EmbeddingBackend for ClipdBackend {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_texts(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, ScoringError> {
        self.embed("/v1/embed/text", "texts", texts.iter().map(|t| json!(t)).collect())
    }

    fn embed_images(&self, images: &[Vec<u8>]) -> Result<Vec<Vec<f64>>, ScoringError> {
        let b64 = base64::engine::general_purpose::STANDARD;
        self.embed("/v1/embed/image", "images", images.iter().map(|i| json!(b64.encode(i))).collect())
    }
}
