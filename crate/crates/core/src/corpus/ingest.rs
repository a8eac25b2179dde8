//! Per-source adapters onto a common (original, simplifications) layout.
//!
//! Two on-disk layouts are accepted:
//!
//! * TSV (`<name>.tsv`): `original<TAB>simplification[<TAB>simplification...]`.
//!   An optional header row starting with `original` is skipped. Rows sharing
//!   the same cleaned original are merged into one candidate group.
//! * Aligned lines (`<name>.orig`): line `i` is aligned with line `i` of every
//!   sibling file whose name starts with `<name>.simp` (e.g. `asset.simp.0`).

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use log::warn;

use super::{clean_sentence, CorpusError, DatasetSource, SentencePair};
use crate::seeded;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedRow {
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct IngestReport {
    pub pairs: Vec<SentencePair>,
    pub skipped: Vec<SkippedRow>,
}

struct Group {
    original: String,
    candidates: Vec<String>,
}

fn read_to_string(path: &Path) -> Result<String, CorpusError> {
    fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Ingest one source file and keep exactly one simplification per original.
///
/// The kept simplification is the first candidate after a keyed shuffle under
/// `seed`, so the choice is random but reproducible.
pub fn ingest_source(path: &Path, kind: DatasetSource, seed: u64) -> Result<IngestReport, CorpusError> {
    let mut skipped = Vec::new();
    let rows = match path.extension().and_then(|e| e.to_str()) {
        Some("tsv") => read_tsv(path, &mut skipped)?,
        Some("orig") => read_aligned(path, &mut skipped)?,
        _ => {
            return Err(CorpusError::Layout {
                path: path.to_path_buf(),
                message: "expected a .tsv or .orig file".into(),
            })
        }
    };

    let mut groups: Vec<Group> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for (line, original, simplifications) in rows {
        let original = clean_sentence(&original);
        if original.is_empty() {
            skipped.push(SkippedRow {
                line,
                reason: "original is empty after cleaning".into(),
            });
            continue;
        }
        let candidates: Vec<String> = simplifications
            .iter()
            .map(|s| clean_sentence(s))
            .filter(|s| !s.is_empty())
            .collect();
        if candidates.is_empty() {
            skipped.push(SkippedRow {
                line,
                reason: "no simplification left after cleaning".into(),
            });
            continue;
        }
        match index.get(&original) {
            Some(&g) => groups[g].candidates.extend(candidates),
            None => {
                index.insert(original.clone(), groups.len());
                groups.push(Group { original, candidates });
            }
        }
    }

    for row in &skipped {
        warn!("{}:{}: skipped ({})", path.display(), row.line, row.reason);
    }

    let pairs = groups
        .into_iter()
        .enumerate()
        .map(|(i, group)| {
            let domain = format!("candidates/{}/{i}", kind.prefix());
            let numbered: Vec<(usize, String)> = group.candidates.into_iter().enumerate().collect();
            let (_, kept) = seeded::shuffle_by(numbered, seed, &domain, |(j, _)| j.to_string())
                .into_iter()
                .next()
                .expect("groups are never empty");
            SentencePair::new(format!("{}_{i:03}", kind.prefix()), kind, &group.original, &kept)
        })
        .collect();

    Ok(IngestReport { pairs, skipped })
}

type Row = (usize, String, Vec<String>);

fn read_tsv(path: &Path, skipped: &mut Vec<SkippedRow>) -> Result<Vec<Row>, CorpusError> {
    let text = read_to_string(path)?;
    let mut rows = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let mut cols = raw.split('\t');
        let original = cols.next().unwrap_or_default();
        if line == 1 && original.trim().eq_ignore_ascii_case("original") {
            continue;
        }
        let simplifications: Vec<String> = cols.map(str::to_string).collect();
        if simplifications.is_empty() {
            skipped.push(SkippedRow {
                line,
                reason: "missing simplification column".into(),
            });
            continue;
        }
        rows.push((line, original.to_string(), simplifications));
    }
    Ok(rows)
}

fn simp_siblings(orig: &Path) -> Result<Vec<PathBuf>, CorpusError> {
    let dir = orig.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let stem = orig.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
    let prefix = format!("{stem}.simp");
    let entries = fs::read_dir(dir).map_err(|source| CorpusError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut found: Vec<PathBuf> = entries
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with(&prefix))
        })
        .collect();
    found.sort();
    Ok(found)
}

fn read_aligned(path: &Path, skipped: &mut Vec<SkippedRow>) -> Result<Vec<Row>, CorpusError> {
    let originals: Vec<String> = read_to_string(path)?.lines().map(str::to_string).collect();
    let siblings = simp_siblings(path)?;
    if siblings.is_empty() {
        return Err(CorpusError::Layout {
            path: path.to_path_buf(),
            message: "no aligned .simp file next to it".into(),
        });
    }
    let mut columns = Vec::with_capacity(siblings.len());
    for sib in &siblings {
        let lines: Vec<String> = read_to_string(sib)?.lines().map(str::to_string).collect();
        if lines.len() != originals.len() {
            return Err(CorpusError::Layout {
                path: sib.clone(),
                message: format!("{} lines, but {} has {}", lines.len(), path.display(), originals.len()),
            });
        }
        columns.push(lines);
    }
    let mut rows = Vec::new();
    for (i, original) in originals.into_iter().enumerate() {
        if original.trim().is_empty() {
            skipped.push(SkippedRow {
                line: i + 1,
                reason: "blank original line".into(),
            });
            continue;
        }
        let simplifications = columns.iter().map(|c| c[i].clone()).collect();
        rows.push((i + 1, original, simplifications));
    }
    Ok(rows)
}

/// Locate and ingest every source under `dir` (`<prefix>.tsv` or `<prefix>.orig`).
pub fn load_sources(dir: &Path, seed: u64) -> Result<BTreeMap<DatasetSource, IngestReport>, CorpusError> {
    let mut out = BTreeMap::new();
    for source in DatasetSource::ALL {
        let tsv = dir.join(format!("{}.tsv", source.prefix()));
        let orig = dir.join(format!("{}.orig", source.prefix()));
        let path = if tsv.is_file() {
            tsv
        } else if orig.is_file() {
            orig
        } else {
            return Err(CorpusError::Layout {
                path: dir.to_path_buf(),
                message: format!("no {0}.tsv or {0}.orig for {source}", source.prefix()),
            });
        };
        out.insert(source, ingest_source(&path, source, seed)?);
    }
    Ok(out)
}
