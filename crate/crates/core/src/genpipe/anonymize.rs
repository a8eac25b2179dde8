//! Style-blind renaming of generated images for annotation.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::GenPipeError;
use crate::seeded::shuffle_by;
use crate::templates::Style;

const SHUFFLE_DOMAIN: &str = "anonymize";
const SPLIT_DOMAIN: &str = "assign";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MapEntry {
    pub item_id: String,
    pub style: Style,
    pub original_path: String,
}

/// Numeric id (zero padded) to the image it replaces.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AnonymizationMap {
    pub entries: BTreeMap<String, MapEntry>,
}

impl AnonymizationMap {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, numeric_id: &str) -> Option<&MapEntry> {
        self.entries.get(numeric_id)
    }

    /// (item, style) to numeric id.
    pub fn inverse(&self) -> BTreeMap<(String, Style), String> {
        self.entries
            .iter()
            .map(|(id, e)| ((e.item_id.clone(), e.style), id.clone()))
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<(), GenPipeError> {
        let json = serde_json::to_string_pretty(self).expect("map serialises");
        fs::write(path, json + "\n").map_err(|source| GenPipeError::Io { path: path.into(), source })
    }

    pub fn load(path: &Path) -> Result<Self, GenPipeError> {
        let text = fs::read_to_string(path).map_err(|source| GenPipeError::Io { path: path.into(), source })?;
        serde_json::from_str(&text).map_err(|e| GenPipeError::Format {
            path: path.into(),
            message: e.to_string(),
        })
    }
}

fn id_width(n: usize) -> usize {
    n.to_string().len().max(4)
}

/// Assign numeric ids to image file names (`<item>_<style key>.png`).
///
/// Ids run from 1 in the order of a seeded shuffle of the names, so the id
/// says nothing about the style or the original order.
pub fn anonymize_names<S: AsRef<str>>(names: &[S], seed: u64) -> Result<AnonymizationMap, GenPipeError> {
    let mut parsed = Vec::with_capacity(names.len());
    let mut bad = Vec::new();
    for name in names {
        let name = name.as_ref();
        let stem = name.strip_suffix(".png").unwrap_or(name);
        match Style::strip_key_suffix(stem) {
            Some((item, style)) => parsed.push((name.to_string(), item.to_string(), style)),
            None => bad.push(name.to_string()),
        }
    }
    if !bad.is_empty() {
        return Err(GenPipeError::UnparseableNames(bad));
    }

    let mut seen = BTreeSet::new();
    for (name, item, style) in &parsed {
        if !seen.insert((item.clone(), *style)) {
            return Err(GenPipeError::DuplicateId(name.clone()));
        }
    }

    let width = id_width(parsed.len());
    let order = shuffle_by(parsed, seed, SHUFFLE_DOMAIN, |(name, _, _)| name.clone());
    let mut map = AnonymizationMap::default();
    for (i, (name, item_id, style)) in order.into_iter().enumerate() {
        let id = format!("{:0width$}", i + 1);
        let entry = MapEntry { item_id, style, original_path: name };
        if map.entries.insert(id.clone(), entry).is_some() {
            return Err(GenPipeError::Collision(id));
        }
    }
    Ok(map)
}

/// Copy every `.png` in `in_dir` to `out_dir/NNNN.png`. Originals are left
/// untouched.
pub fn anonymize(in_dir: &Path, out_dir: &Path, seed: u64) -> Result<AnonymizationMap, GenPipeError> {
    let io = |path: &Path| {
        let path: PathBuf = path.into();
        move |source| GenPipeError::Io { path, source }
    };
    let mut names = Vec::new();
    for entry in fs::read_dir(in_dir).map_err(io(in_dir))? {
        let entry = entry.map_err(io(in_dir))?;
        if !entry.file_type().map_err(io(&entry.path()))?.is_file() {
            continue;
        }
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.to_lowercase().ends_with(".png") {
            names.push(name);
        }
    }
    names.sort();
    let map = anonymize_names(&names, seed)?;

    fs::create_dir_all(out_dir).map_err(io(out_dir))?;
    for (id, entry) in &map.entries {
        let target = out_dir.join(format!("{id}.png"));
        if target.exists() {
            return Err(GenPipeError::Collision(target.display().to_string()));
        }
        fs::copy(in_dir.join(&entry.original_path), &target).map_err(io(&target))?;
    }
    Ok(map)
}

/// Split anonymised ids between experts: a shared block every expert rates
/// plus a disjoint block of unique ids each.
pub fn split_assignments<S: AsRef<str>>(
    ids: &[S],
    experts: &[String],
    shared: usize,
    unique_per_expert: usize,
    seed: u64,
) -> Result<BTreeMap<String, Vec<String>>, GenPipeError> {
    let needed = shared + experts.len() * unique_per_expert;
    if ids.len() < needed {
        return Err(GenPipeError::InsufficientIds { needed, available: ids.len() });
    }
    let mut seen = BTreeSet::new();
    for id in ids {
        if !seen.insert(id.as_ref()) {
            return Err(GenPipeError::DuplicateId(id.as_ref().to_string()));
        }
    }
    let mut seen_experts = BTreeSet::new();
    for e in experts {
        if !seen_experts.insert(e.as_str()) {
            return Err(GenPipeError::DuplicateId(e.clone()));
        }
    }

    let order: Vec<String> = shuffle_by(
        ids.iter().map(|s| s.as_ref().to_string()).collect(),
        seed,
        SPLIT_DOMAIN,
        Clone::clone,
    );
    let (common, rest) = order.split_at(shared);
    let mut out = BTreeMap::new();
    for (k, expert) in experts.iter().enumerate() {
        let mut list: Vec<String> = common.to_vec();
        list.extend_from_slice(&rest[k * unique_per_expert..(k + 1) * unique_per_expert]);
        list.sort();
        out.insert(expert.clone(), list);
    }
    Ok(out)
}
