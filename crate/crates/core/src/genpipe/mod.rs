//! Prompt-to-image batch generation: planning, a resumable concurrent runner
//! and anonymisation of the results for annotation.

mod anonymize;
mod checkpoint;
mod client;
mod runner;

use std::collections::BTreeSet;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seeded::sha256_hex;
use crate::templates::{PromptBundle, Style, TemplateSpec};

pub use anonymize::{anonymize, anonymize_names, split_assignments, AnonymizationMap, MapEntry};
pub use checkpoint::{Checkpoint, CheckpointEntry, CheckpointWriter};
pub use client::{GenerateError, ImageClient, MockImageClient, PLACEHOLDER_PNG};
pub use runner::{BlockedTask, DirStore, ImageStore, RunOptions, RunReport, Runner};

#[derive(Debug, Error)]
pub enum GenPipeError {
    #[error("duplicate task for item {item_id} in style {style}")]
    DuplicateTask { item_id: String, style: Style },
    #[error("checkpoint {path} belongs to a different run configuration (found {found}, expected {expected})")]
    ConfigMismatch {
        path: PathBuf,
        found: String,
        expected: String,
    },
    #[error("checkpoint {path} is corrupt at line {line}: {message}")]
    CorruptCheckpoint {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("checkpoint {path}: {source}")]
    CheckpointIo {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot store image {path}: {source}")]
    Storage {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("unparseable image file names: {}", .0.join(", "))]
    UnparseableNames(Vec<String>),
    #[error("anonymised id collision on {0}")]
    Collision(String),
    #[error("need {needed} ids for the assignment split but only {available} given")]
    InsufficientIds { needed: usize, available: usize },
    #[error("duplicate id {0}")]
    DuplicateId(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskStatus {
    Pending,
    Succeeded,
    Blocked,
    Failed,
}

impl TaskStatus {
    pub fn is_terminal(self) -> bool {
        self != TaskStatus::Pending
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ImageSize {
    pub width: u32,
    pub height: u32,
}

impl Default for ImageSize {
    fn default() -> Self {
        ImageSize { width: 1024, height: 1024 }
    }
}

impl fmt::Display for ImageSize {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.width, self.height)
    }
}

impl FromStr for ImageSize {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (w, h) = s
            .split_once(['x', 'X'])
            .ok_or_else(|| format!("image size `{s}` is not WIDTHxHEIGHT"))?;
        let parse = |v: &str| v.trim().parse::<u32>().map_err(|e| format!("image size `{s}`: {e}"));
        Ok(ImageSize { width: parse(w)?, height: parse(h)? })
    }
}

/// One prompt-to-image unit of work.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationTask {
    pub task_id: String,
    pub item_id: String,
    pub style: Style,
    pub template: TemplateSpec,
    pub prompt: String,
    pub status: TaskStatus,
    pub attempts: u32,
    /// Relative to the output directory; assigned at planning time.
    pub image_path: String,
    pub error: String,
}

/// Stable identity of a task: a digest of item, style, template and prompt.
pub fn task_id(item_id: &str, style: Style, template: &TemplateSpec, prompt: &str) -> String {
    let material = format!(
        "{item_id}\u{0}{}\u{0}{template}\u{0}{}",
        style.key(),
        sha256_hex(prompt.as_bytes())
    );
    sha256_hex(material.as_bytes())[..16].to_string()
}

/// `<item id>_<style key>.png`, lowercase; item ids carry the dataset prefix.
pub fn image_file_name(item_id: &str, style: Style) -> String {
    format!("{item_id}_{}.png", style.key()).to_lowercase()
}

/// One pending task per (item, style) across all bundles.
pub fn plan_tasks(bundles: &[PromptBundle]) -> Result<Vec<GenerationTask>, GenPipeError> {
    let mut seen = BTreeSet::new();
    let mut tasks = Vec::new();
    for b in bundles {
        for sp in &b.template_prompts {
            if !seen.insert((b.id.clone(), sp.style)) {
                return Err(GenPipeError::DuplicateTask {
                    item_id: b.id.clone(),
                    style: sp.style,
                });
            }
            tasks.push(GenerationTask {
                task_id: task_id(&b.id, sp.style, &b.template, &sp.prompt),
                item_id: b.id.clone(),
                style: sp.style,
                template: b.template,
                prompt: sp.prompt.clone(),
                status: TaskStatus::Pending,
                attempts: 0,
                image_path: image_file_name(&b.id, sp.style),
                error: String::new(),
            });
        }
    }
    Ok(tasks)
}

/// Digest of the planned task set, independent of task order.
pub fn plan_digest(tasks: &[GenerationTask]) -> String {
    let mut ids: Vec<&str> = tasks.iter().map(|t| t.task_id.as_str()).collect();
    ids.sort_unstable();
    sha256_hex(ids.join("\n").as_bytes())
}
