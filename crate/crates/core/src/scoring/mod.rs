//! Text-image alignment scores and template ranking.

mod backend;
mod composite;

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::genpipe::image_file_name;
use crate::templates::{PromptBundle, Style, TemplateSpec};

pub use backend::{clip_score, clip_score_vectors, cosine, normalize, png_text, EmbeddingBackend, HashingBackend};
pub use composite::{
    component_stats, composite, rank_templates, CompositeWeights, MuNormalization, RankedTemplate, Ranking,
    ScoreTable, TemplateScoreComponents,
};

/// CLIPScore rescaling weight.
pub const DEFAULT_CLIP_WEIGHT: f64 = 2.5;

#[derive(Debug, Error)]
pub enum ScoringError {
    #[error("embedding backend: {0}")]
    Backend(String),
    #[error("embedding dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("cannot score a zero-length embedding")]
    ZeroVector,
    #[error("no scores to aggregate")]
    Empty,
    #[error("need at least two templates to normalise across")]
    SingleTemplate,
    #[error("component {component} = {value} is outside [0, 1]")]
    ComponentOutOfRange { component: &'static str, value: f64 },
    #[error("invalid weights: {0}")]
    InvalidWeights(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Format { path: PathBuf, line: usize, message: String },
}

/// One scored image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipScoreRecord {
    pub item_id: String,
    pub style: Style,
    pub template: TemplateSpec,
    /// `w * max(cosine, 0)`.
    pub score: f64,
    pub cosine: f64,
    pub w: f64,
    pub model_id: String,
}

/// Result of scoring a bundle file against an image directory.
#[derive(Debug, Clone, Default)]
pub struct ScoreRun {
    pub records: Vec<ClipScoreRecord>,
    /// (item, style, template) whose image file was absent.
    pub missing: Vec<(String, Style, TemplateSpec)>,
}

/// Score every (bundle, style) image found under `images` against the
/// bundle's simplified sentence.
pub fn score_bundles(
    bundles: &[PromptBundle],
    images: &Path,
    backend: &dyn EmbeddingBackend,
    w: f64,
) -> Result<ScoreRun, ScoringError> {
    let mut run = ScoreRun::default();
    for b in bundles {
        let mut found = Vec::new();
        for sp in &b.template_prompts {
            let path = images.join(image_file_name(&b.id, sp.style));
            match fs::read(&path) {
                Ok(bytes) => found.push((sp.style, bytes)),
                Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                    run.missing.push((b.id.clone(), sp.style, b.template));
                }
                Err(source) => return Err(ScoringError::Io { path, source }),
            }
        }
        if found.is_empty() {
            continue;
        }
        let text = backend.embed_text(&b.simplified_text)?;
        backend::check_dim(backend, &text)?;
        let imgs: Vec<Vec<u8>> = found.iter().map(|(_, bytes)| bytes.clone()).collect();
        let vecs = backend.embed_images(&imgs)?;
        if vecs.len() != imgs.len() {
            return Err(ScoringError::Backend(format!("sent {} images, got {} vectors", imgs.len(), vecs.len())));
        }
        for ((style, _), v) in found.iter().zip(vecs) {
            backend::check_dim(backend, &v)?;
            let cos = cosine(&text, &v)?;
            run.records.push(ClipScoreRecord {
                item_id: b.id.clone(),
                style: *style,
                template: b.template,
                score: w * cos.max(0.0),
                cosine: cos,
                w,
                model_id: backend.model_id().to_string(),
            });
        }
    }
    Ok(run)
}

/// Per (template, item) mean score over styles. Items missing for a template
/// become `None` there.
pub fn score_table(records: &[ClipScoreRecord]) -> ScoreTable {
    let mut sums: BTreeMap<String, BTreeMap<String, (f64, usize)>> = BTreeMap::new();
    for r in records {
        let e = sums.entry(r.template.to_string()).or_default().entry(r.item_id.clone()).or_insert((0.0, 0));
        e.0 += r.score;
        e.1 += 1;
    }
    let items: Vec<String> = {
        let mut v: Vec<String> = sums.values().flat_map(|m| m.keys().cloned()).collect();
        v.sort();
        v.dedup();
        v
    };
    sums.into_iter()
        .map(|(t, m)| {
            let row = items
                .iter()
                .map(|i| (i.clone(), m.get(i).map(|(s, n)| s / *n as f64)))
                .collect();
            (t, row)
        })
        .collect()
}

pub fn write_scores(path: &Path, records: &[ClipScoreRecord]) -> Result<(), ScoringError> {
    let io = |source| ScoringError::Io { path: path.into(), source };
    let mut f = fs::File::create(path).map_err(io)?;
    for r in records {
        let line = serde_json::to_string(r).expect("record serialises");
        writeln!(f, "{line}").map_err(io)?;
    }
    Ok(())
}

pub fn read_scores(path: &Path) -> Result<Vec<ClipScoreRecord>, ScoringError> {
    let text = fs::read_to_string(path).map_err(|source| ScoringError::Io { path: path.into(), source })?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let r: ClipScoreRecord = serde_json::from_str(line).map_err(|e| ScoringError::Format {
            path: path.into(),
            line: i + 1,
            message: e.to_string(),
        })?;
        if !(r.score >= 0.0 && r.score <= r.w) {
            return Err(ScoringError::Format {
                path: path.into(),
                line: i + 1,
                message: format!("score {} outside [0, {}]", r.score, r.w),
            });
        }
        out.push(r);
    }
    Ok(out)
}
