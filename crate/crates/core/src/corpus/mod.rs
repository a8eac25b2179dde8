//! Parallel simplification corpus: ingestion, length filtering, balanced
//! sampling and summary statistics.

mod clean;
mod ingest;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::seeded;

pub use clean::{clean_sentence, count_tokens};
pub use ingest::{ingest_source, load_sources, IngestReport, SkippedRow};

pub const DEFAULT_MIN_TOKENS: usize = 10;
pub const DEFAULT_MAX_TOKENS: usize = 55;
pub const DEFAULT_PER_SOURCE: usize = 100;

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Layout { path: PathBuf, message: String },
    #[error("{path}:{line}: {message}")]
    Record {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("source {source_name} has {available} eligible pairs, {requested} requested (short by {})", requested - available)]
    Underflow {
        source_name: DatasetSource,
        available: usize,
        requested: usize,
    },
    #[error("duplicate sentence id {0}")]
    DuplicateId(String),
    #[error("corpus is empty")]
    Empty,
}

/// The four parallel simplification corpora.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DatasetSource {
    #[serde(rename = "ASSET")]
    Asset,
    #[serde(rename = "OneStopEnglish", alias = "OneStop")]
    OneStopEnglish,
    #[serde(rename = "SimPA")]
    SimPa,
    #[serde(rename = "Wikipedia")]
    Wikipedia,
}

impl DatasetSource {
    pub const ALL: [DatasetSource; 4] = [
        DatasetSource::Asset,
        DatasetSource::OneStopEnglish,
        DatasetSource::SimPa,
        DatasetSource::Wikipedia,
    ];

    /// Lowercase prefix used in sentence ids and source file names.
    pub fn prefix(self) -> &'static str {
        match self {
            DatasetSource::Asset => "asset",
            DatasetSource::OneStopEnglish => "onestop",
            DatasetSource::SimPa => "simpa",
            DatasetSource::Wikipedia => "wikipedia",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DatasetSource::Asset => "ASSET",
            DatasetSource::OneStopEnglish => "OneStopEnglish",
            DatasetSource::SimPa => "SimPA",
            DatasetSource::Wikipedia => "Wikipedia",
        }
    }

    /// Text domain of the source corpus.
    pub fn domain(self) -> &'static str {
        match self {
            DatasetSource::Asset => "Wikipedia",
            DatasetSource::OneStopEnglish => "News",
            DatasetSource::SimPa => "Web",
            DatasetSource::Wikipedia => "Wikipedia",
        }
    }

    /// Resolve the source from a sentence id such as `wikipedia_387`.
    pub fn from_item_id(id: &str) -> Option<DatasetSource> {
        let prefix = id.split('_').next()?;
        prefix.parse().ok()
    }
}

impl fmt::Display for DatasetSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DatasetSource {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "asset" => Ok(DatasetSource::Asset),
            "onestop" | "onestopenglish" => Ok(DatasetSource::OneStopEnglish),
            "simpa" => Ok(DatasetSource::SimPa),
            "wikipedia" | "wiki" => Ok(DatasetSource::Wikipedia),
            other => Err(format!("unknown dataset source `{other}`")),
        }
    }
}

/// One complex/simplified sentence pair. Field order is the on-disk key order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SentencePair {
    pub id: String,
    #[serde(rename = "dataset")]
    pub dataset_source: DatasetSource,
    pub domain: String,
    pub original: String,
    pub simplified: String,
    pub length_original: usize,
    pub length_simplified: usize,
}

impl SentencePair {
    /// Build a pair with token counts derived from the text.
    pub fn new(id: impl Into<String>, source: DatasetSource, original: &str, simplified: &str) -> Self {
        SentencePair {
            id: id.into(),
            dataset_source: source,
            domain: source.domain().to_string(),
            original: original.to_string(),
            simplified: simplified.to_string(),
            length_original: count_tokens(original),
            length_simplified: count_tokens(simplified),
        }
    }

    fn counts_consistent(&self) -> bool {
        self.length_original == count_tokens(&self.original)
            && self.length_simplified == count_tokens(&self.simplified)
    }
}

/// Keep pairs whose simplified length lies in `[min_tokens, max_tokens]`.
pub fn filter_by_length(pairs: Vec<SentencePair>, min_tokens: usize, max_tokens: usize) -> Vec<SentencePair> {
    pairs
        .into_iter()
        .filter(|p| (min_tokens..=max_tokens).contains(&p.length_simplified))
        .collect()
}

/// Draw exactly `n_per_source` pairs from every source, uniformly at random
/// under `seed`. Output is grouped by source and sorted by id within a source.
pub fn sample_balanced(
    pairs_by_source: &BTreeMap<DatasetSource, Vec<SentencePair>>,
    n_per_source: usize,
    seed: u64,
) -> Result<Vec<SentencePair>, CorpusError> {
    let mut out = Vec::with_capacity(pairs_by_source.len() * n_per_source);
    for (&source, pairs) in pairs_by_source {
        if pairs.len() < n_per_source {
            return Err(CorpusError::Underflow {
                source_name: source,
                available: pairs.len(),
                requested: n_per_source,
            });
        }
        let mut seen = BTreeSet::new();
        for p in pairs {
            if !seen.insert(p.id.as_str()) {
                return Err(CorpusError::DuplicateId(p.id.clone()));
            }
        }
        let domain = format!("sample/{}", source.prefix());
        let mut drawn: Vec<SentencePair> =
            seeded::shuffle_by(pairs.clone(), seed, &domain, |p| p.id.clone())
                .into_iter()
                .take(n_per_source)
                .collect();
        drawn.sort_by(|a, b| a.id.cmp(&b.id));
        out.extend(drawn);
    }
    Ok(out)
}

/// Corpus-level length statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub n_per_source: BTreeMap<DatasetSource, usize>,
    pub mean_len_original: f64,
    pub mean_len_simplified: f64,
    pub mean_reduction_tokens: f64,
    pub mean_reduction_pct: f64,
}

impl CorpusStats {
    pub fn from_means(
        n_per_source: BTreeMap<DatasetSource, usize>,
        mean_len_original: f64,
        mean_len_simplified: f64,
    ) -> Self {
        let mean_reduction_tokens = mean_len_original - mean_len_simplified;
        let mean_reduction_pct = if mean_len_original == 0.0 {
            0.0
        } else {
            100.0 * mean_reduction_tokens / mean_len_original
        };
        CorpusStats {
            n_per_source,
            mean_len_original,
            mean_len_simplified,
            mean_reduction_tokens,
            mean_reduction_pct,
        }
    }
}

pub fn compute_stats(corpus: &[SentencePair]) -> Result<CorpusStats, CorpusError> {
    if corpus.is_empty() {
        return Err(CorpusError::Empty);
    }
    let n = corpus.len() as f64;
    let mut counts = BTreeMap::new();
    let (mut orig, mut simp) = (0usize, 0usize);
    for p in corpus {
        *counts.entry(p.dataset_source).or_insert(0) += 1;
        orig += p.length_original;
        simp += p.length_simplified;
    }
    Ok(CorpusStats::from_means(counts, orig as f64 / n, simp as f64 / n))
}

/// Write one JSON object per line, LF-terminated.
pub fn write_corpus(path: &Path, pairs: &[SentencePair]) -> Result<(), CorpusError> {
    let io_err = |source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = fs::File::create(path).map_err(io_err)?;
    let mut w = BufWriter::new(file);
    for p in pairs {
        let line = serde_json::to_string(p).expect("sentence pair serializes");
        w.write_all(line.as_bytes()).map_err(io_err)?;
        w.write_all(b"\n").map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

pub fn corpus_to_string(pairs: &[SentencePair]) -> String {
    let mut s = String::new();
    for p in pairs {
        s.push_str(&serde_json::to_string(p).expect("sentence pair serializes"));
        s.push('\n');
    }
    s
}

/// Read a canonical corpus file, rejecting stale token counts and duplicate ids.
pub fn read_corpus(path: &Path) -> Result<Vec<SentencePair>, CorpusError> {
    let file = fs::File::open(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut pairs = Vec::new();
    let mut ids = BTreeSet::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|source| CorpusError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let record_err = |message: String| CorpusError::Record {
            path: path.to_path_buf(),
            line: i + 1,
            message,
        };
        let pair: SentencePair = serde_json::from_str(&line).map_err(|e| record_err(e.to_string()))?;
        if !pair.counts_consistent() {
            return Err(record_err(format!("token counts of {} do not match its text", pair.id)));
        }
        if !ids.insert(pair.id.clone()) {
            return Err(CorpusError::DuplicateId(pair.id));
        }
        pairs.push(pair);
    }
    Ok(pairs)
}
