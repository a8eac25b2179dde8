//! Embedding backends and the clipped, rescaled cosine.

use sha2::{Digest, Sha256};

use super::ScoringError;

/// Text and image encoder sharing one embedding space.
///
/// Implementations return unit-norm vectors of length [`dim`](Self::dim) and
/// must tolerate concurrent calls.
pub trait EmbeddingBackend: Send + Sync {
    fn model_id(&self) -> &str;
    fn dim(&self) -> usize;
    fn embed_texts(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, ScoringError>;
    fn embed_images(&self, images: &[Vec<u8>]) -> Result<Vec<Vec<f64>>, ScoringError>;

    fn embed_text(&self, text: &str) -> Result<Vec<f64>, ScoringError> {
        single(self.embed_texts(&[text.to_string()])?)
    }

    fn embed_image(&self, image: &[u8]) -> Result<Vec<f64>, ScoringError> {
        single(self.embed_images(&[image.to_vec()])?)
    }
}

fn single(mut v: Vec<Vec<f64>>) -> Result<Vec<f64>, ScoringError> {
    if v.len() != 1 {
        return Err(ScoringError::Backend(format!("expected 1 vector, got {}", v.len())));
    }
    Ok(v.pop().unwrap())
}

/// Scale to unit L2 norm.
pub fn normalize(v: &[f64]) -> Result<Vec<f64>, ScoringError> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(norm.is_finite() && norm > 0.0) {
        return Err(ScoringError::ZeroVector);
    }
    Ok(v.iter().map(|x| x / norm).collect())
}

/// Cosine similarity. For unit vectors this is the dot product.
pub fn cosine(a: &[f64], b: &[f64]) -> Result<f64, ScoringError> {
    if a.len() != b.len() {
        return Err(ScoringError::DimensionMismatch { expected: a.len(), found: b.len() });
    }
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(ScoringError::ZeroVector);
    }
    Ok((dot / (na * nb)).clamp(-1.0, 1.0))
}

/// `w * max(cos, 0)`.
pub fn clip_score_vectors(text: &[f64], image: &[f64], w: f64) -> Result<f64, ScoringError> {
    Ok(w * cosine(text, image)?.max(0.0))
}

/// Embed `text` and `image` with `backend` and score the pair.
pub fn clip_score(text: &str, image: &[u8], backend: &dyn EmbeddingBackend, w: f64) -> Result<f64, ScoringError> {
    let t = backend.embed_text(text)?;
    let i = backend.embed_image(image)?;
    check_dim(backend, &t)?;
    check_dim(backend, &i)?;
    clip_score_vectors(&t, &i, w)
}

pub(crate) fn check_dim(backend: &dyn EmbeddingBackend, v: &[f64]) -> Result<(), ScoringError> {
    if v.len() != backend.dim() {
        return Err(ScoringError::DimensionMismatch { expected: backend.dim(), found: v.len() });
    }
    Ok(())
}

/// Deterministic offline backend.
///
/// Texts become signed feature-hashed bags of lowercase words. An image is
/// embedded as the text found in its PNG `tEXt` chunks when present, otherwise
/// as a pseudo-random vector derived from its bytes. Good enough for plumbing
/// and tests; it measures nothing about pictures.
#[derive(Debug, Clone)]
pub struct HashingBackend {
    dim: usize,
    model_id: String,
}

impl HashingBackend {
    pub fn new(dim: usize) -> Self {
        HashingBackend { dim: dim.max(2), model_id: format!("hashing-bow-{}", dim.max(2)) }
    }

    fn text_vector(&self, text: &str) -> Vec<f64> {
        let mut v = vec![0.0; self.dim];
        let lower = text.to_lowercase();
        let mut any = false;
        for tok in lower.split(|c: char| !c.is_alphanumeric()).filter(|t| !t.is_empty()) {
            let h = Sha256::digest(tok.as_bytes());
            let idx = u64::from_be_bytes(h[..8].try_into().unwrap()) as usize % self.dim;
            v[idx] += if h[8] & 1 == 0 { 1.0 } else { -1.0 };
            any = true;
        }
        if !any || v.iter().all(|x| *x == 0.0) {
            v[0] = 1.0;
        }
        normalize(&v).expect("nonzero")
    }

    fn byte_vector(&self, bytes: &[u8]) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.dim);
        let mut block = 0u32;
        while v.len() < self.dim {
            let mut h = Sha256::new();
            h.update(bytes);
            h.update(block.to_le_bytes());
            for pair in h.finalize().chunks(2) {
                if v.len() == self.dim {
                    break;
                }
                v.push(u16::from_be_bytes([pair[0], pair[1]]) as f64 / 32768.0 - 1.0);
            }
            block += 1;
        }
        normalize(&v).unwrap_or_else(|_| {
            let mut e = vec![0.0; self.dim];
            e[0] = 1.0;
            e
        })
    }
}

impl Default for HashingBackend {
    fn default() -> Self {
        HashingBackend::new(256)
    }
}

impl EmbeddingBackend for HashingBackend {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_texts(&self, texts: &[String]) -> Result<Vec<Vec<f64>>, ScoringError> {
        Ok(texts.iter().map(|t| self.text_vector(t)).collect())
    }

    fn embed_images(&self, images: &[Vec<u8>]) -> Result<Vec<Vec<f64>>, ScoringError> {
        Ok(images
            .iter()
            .map(|img| match png_text(img) {
                Some(text) => self.text_vector(&text),
                None => self.byte_vector(img),
            })
            .collect())
    }
}

/// Concatenated `tEXt` chunk values of a PNG, if any.
pub fn png_text(bytes: &[u8]) -> Option<String> {
    const SIG: &[u8] = b"\x89PNG\r\n\x1a\n";
    let mut rest = bytes.strip_prefix(SIG)?;
    let mut out = Vec::new();
    while rest.len() >= 12 {
        let len = u32::from_be_bytes(rest[..4].try_into().ok()?) as usize;
        let kind = &rest[4..8];
        if rest.len() < 12 + len {
            break;
        }
        let data = &rest[8..8 + len];
        if kind == b"tEXt" {
            if let Some(pos) = data.iter().position(|b| *b == 0) {
                out.push(String::from_utf8_lossy(&data[pos + 1..]).into_owned());
            }
        }
        rest = &rest[12 + len..];
    }
    (!out.is_empty()).then(|| out.join(" "))
}
