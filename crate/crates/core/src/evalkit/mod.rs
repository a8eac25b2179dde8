//! Statistics over expert annotations: agreement, style recall, correlation
//! with CLIPScore, dimension contributions, completion and accessibility
//! indices.

mod alpha;
mod ingest;
mod metrics;
mod report;
mod stats;

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::DatasetSource;
use crate::templates::Style;

pub use alpha::{agreement_report, alpha_for_dimension, krippendorff_alpha, AgreementCell, AlphaResult, Metric};
pub use ingest::{ingest_annotations, parse_export, read_records, write_records, ExportRow};
pub use metrics::{
    accessibility_index, completion_report, contributions_from_means, dimension_contributions, recall_at_3,
    source_distribution, style_difficulty, AccessibilityIndex, CompletionReport, CompletionRow, Contribution,
    IndexKind, IndexWeights, RecallReport, RecallRow, SourceShare, StyleDifficulty, Tier,
};
pub use report::{build_report, join_clip_scores, EvalReport, IndexSection, ReportInputs};
pub use stats::{
    correlation_report, ln_gamma, pearson, regularized_incomplete_beta, significance_stars, standardize_per_expert,
    student_t_two_sided_p, Correlation, CorrelationReport, CorrelationRow, Standardized,
};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("{} invalid export row(s):\n{}", .0.len(), .0.iter().map(|e| format!("  {e}")).collect::<Vec<_>>().join("\n"))]
    InvalidRows(Vec<RowError>),
    #[error("expected disagreement is zero; alpha is undefined")]
    DegenerateAgreement,
    #[error("need at least {needed} {what}, found {found}")]
    Insufficient { what: &'static str, needed: usize, found: usize },
    #[error("zero variance in {0}")]
    ZeroVariance(&'static str),
    #[error("x and y have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("all dimension means are zero")]
    AllZero,
    #[error("record {annotator}/{image_id} has no {dimension} score")]
    MissingDimension { annotator: String, image_id: String, dimension: Dimension },
    #[error("CLIPScore for {item_id} / {style} appears more than once; filter the score file to one template")]
    AmbiguousScore { item_id: String, style: Style },
}

/// One rejected export row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowError {
    /// 1-based position in the export.
    pub row: usize,
    pub message: String,
}

impl fmt::Display for RowError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "row {}: {}", self.row, self.message)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    ImageSimplicity,
    ImageQuality,
    TextSimplicity,
    TextQuality,
    Ethics,
    TextImageAlignment,
}

impl Dimension {
    pub const ALL: [Dimension; 6] = [
        Dimension::ImageSimplicity,
        Dimension::ImageQuality,
        Dimension::TextSimplicity,
        Dimension::TextQuality,
        Dimension::Ethics,
        Dimension::TextImageAlignment,
    ];

    /// Upper end of the rating scale; every scale starts at 0.
    pub fn scale_max(self) -> f64 {
        match self {
            Dimension::Ethics | Dimension::TextImageAlignment => 20.0,
            _ => 15.0,
        }
    }

    pub fn key(self) -> &'static str {
        match self {
            Dimension::ImageSimplicity => "image_simplicity",
            Dimension::ImageQuality => "image_quality",
            Dimension::TextSimplicity => "text_simplicity",
            Dimension::TextQuality => "text_quality",
            Dimension::Ethics => "ethics",
            Dimension::TextImageAlignment => "text_image_alignment",
        }
    }

    pub fn title(self) -> &'static str {
        match self {
            Dimension::ImageSimplicity => "Image Simplicity",
            Dimension::ImageQuality => "Image Quality",
            Dimension::TextSimplicity => "Text Simplicity",
            Dimension::TextQuality => "Text Quality",
            Dimension::Ethics => "Ethics",
            Dimension::TextImageAlignment => "Text-Image Alignment",
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for Dimension {
    type Err = String;

    /// Accepts keys, titles and labelling-tool variants such as
    /// `Text–Image Alignment` or `alignment`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let squashed: String = s.chars().filter(|c| c.is_alphanumeric()).flat_map(char::to_lowercase).collect();
        Ok(match squashed.as_str() {
            "imagesimplicity" => Dimension::ImageSimplicity,
            "imagequality" => Dimension::ImageQuality,
            "textsimplicity" => Dimension::TextSimplicity,
            "textquality" => Dimension::TextQuality,
            "ethics" => Dimension::Ethics,
            "textimagealignment" | "alignment" => Dimension::TextImageAlignment,
            _ => return Err(format!("unknown dimension `{s}`")),
        })
    }
}

/// One expert's ratings of one anonymised image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub annotator: String,
    pub image_id: String,
    pub item_id: String,
    /// Style the image was generated in.
    pub style: Style,
    pub dataset: DatasetSource,
    pub scores: BTreeMap<Dimension, f64>,
    /// Up to three distinct guesses of the style.
    pub style_guesses: Vec<Style>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

impl AnnotationRecord {
    pub fn score(&self, d: Dimension) -> Option<f64> {
        self.scores.get(&d).copied()
    }
}

fn round_to(x: f64, places: i32) -> f64 {
    let m = 10f64.powi(places);
    (x * m).round() / m
}

/// Round for presentation in reports.
pub fn round3(x: f64) -> f64 {
    round_to(x, 3)
}

pub fn round1(x: f64) -> f64 {
    round_to(x, 1)
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn record(annotator: &str, image_id: &str, item: &str, style: Style, scores: &[(Dimension, f64)]) -> AnnotationRecord {
        AnnotationRecord {
            annotator: annotator.into(),
            image_id: image_id.into(),
            item_id: item.into(),
            style,
            dataset: DatasetSource::from_item_id(item).unwrap_or(DatasetSource::Asset),
            scores: scores.iter().copied().collect(),
            style_guesses: vec![],
            flags: vec![],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dimension_names() {
        for d in Dimension::ALL {
            assert_eq!(d.key().parse::<Dimension>().unwrap(), d);
            assert_eq!(d.title().parse::<Dimension>().unwrap(), d);
        }
        assert_eq!("Text–Image Alignment".parse::<Dimension>().unwrap(), Dimension::TextImageAlignment);
        let total: f64 = Dimension::ALL.iter().map(|d| d.scale_max()).sum();
        assert_eq!(total, 100.0);
    }
}
