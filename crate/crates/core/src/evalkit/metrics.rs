//! Style recall, contributions, completion and accessibility indices.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{AnnotationRecord, Dimension, EvalError};
use crate::corpus::DatasetSource;
use crate::templates::Style;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RecallRow {
    pub hits: usize,
    pub total: usize,
    pub recall: f64,
}

impl RecallRow {
    pub fn new(hits: usize, total: usize) -> Self {
        RecallRow { hits, total, recall: if total == 0 { 0.0 } else { hits as f64 / total as f64 } }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecallReport {
    pub per_expert: BTreeMap<String, RecallRow>,
    pub overall: RecallRow,
}

/// A record is a hit when its true style is among its guesses. Records
/// without guesses are misses.
pub fn recall_at_3(records: &[AnnotationRecord]) -> RecallReport {
    let mut per: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for r in records {
        let e = per.entry(r.annotator.clone()).or_default();
        e.1 += 1;
        if r.style_guesses.contains(&r.style) {
            e.0 += 1;
        }
    }
    let hits = per.values().map(|v| v.0).sum();
    let total = per.values().map(|v| v.1).sum();
    RecallReport {
        per_expert: per.into_iter().map(|(k, (h, t))| (k, RecallRow::new(h, t))).collect(),
        overall: RecallRow::new(hits, total),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Tier {
    Easy,
    Medium,
    Hard,
    #[serde(rename = "Very Hard")]
    VeryHard,
}

impl Tier {
    /// Easy from 0.70, Medium from 0.50, Hard from 0.30.
    pub fn from_recall(recall: f64) -> Tier {
        if recall >= 0.70 {
            Tier::Easy
        } else if recall >= 0.50 {
            Tier::Medium
        } else if recall >= 0.30 {
            Tier::Hard
        } else {
            Tier::VeryHard
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StyleDifficulty {
    pub style: Style,
    pub images: usize,
    pub hits: usize,
    pub recall: f64,
    pub tier: Tier,
}

/// Recall@3 per true style, easiest first.
pub fn style_difficulty(records: &[AnnotationRecord]) -> Vec<StyleDifficulty> {
    let mut per: BTreeMap<Style, (usize, usize)> = BTreeMap::new();
    for r in records {
        let e = per.entry(r.style).or_default();
        e.1 += 1;
        if r.style_guesses.contains(&r.style) {
            e.0 += 1;
        }
    }
    let mut out: Vec<StyleDifficulty> = per
        .into_iter()
        .map(|(style, (hits, images))| {
            let recall = hits as f64 / images as f64;
            StyleDifficulty { style, images, hits, recall, tier: Tier::from_recall(recall) }
        })
        .collect();
    out.sort_by(|a, b| b.recall.total_cmp(&a.recall).then_with(|| a.style.name().cmp(b.style.name())));
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Contribution {
    pub dimension: Dimension,
    pub scale_max: f64,
    pub mean: f64,
    /// Percent of the summed means.
    pub share: f64,
}

/// Shares of already computed dimension means.
pub fn contributions_from_means(means: &[(Dimension, f64)]) -> Result<Vec<Contribution>, EvalError> {
    if means.is_empty() {
        return Err(EvalError::Insufficient { what: "dimensions", needed: 1, found: 0 });
    }
    let total: f64 = means.iter().map(|(_, m)| m).sum();
    if total == 0.0 {
        return Err(EvalError::AllZero);
    }
    Ok(means
        .iter()
        .map(|&(dimension, mean)| Contribution { dimension, scale_max: dimension.scale_max(), mean, share: 100.0 * mean / total })
        .collect())
}

/// Mean of each dimension over the records that rate it, and its share of
/// the sum of means.
pub fn dimension_contributions(records: &[AnnotationRecord]) -> Result<Vec<Contribution>, EvalError> {
    let mut sums: BTreeMap<Dimension, (f64, usize)> = BTreeMap::new();
    for r in records {
        for (d, x) in &r.scores {
            let e = sums.entry(*d).or_default();
            e.0 += x;
            e.1 += 1;
        }
    }
    let means: Vec<(Dimension, f64)> = Dimension::ALL
        .iter()
        .filter_map(|d| sums.get(d).map(|(s, n)| (*d, s / *n as f64)))
        .collect();
    contributions_from_means(&means)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CompletionRow {
    pub assigned: usize,
    pub completed: usize,
    pub rate: f64,
}

impl CompletionRow {
    pub fn new(assigned: usize, completed: usize) -> Self {
        CompletionRow { assigned, completed, rate: if assigned == 0 { 0.0 } else { completed as f64 / assigned as f64 } }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionReport {
    pub per_expert: BTreeMap<String, CompletionRow>,
    pub total: CompletionRow,
    /// (annotator, image) records that fall outside the annotator's assignment.
    pub outside_assignment: Vec<(String, String)>,
}

/// Completed share of each expert's assignment.
pub fn completion_report(
    records: &[AnnotationRecord],
    assignments: &BTreeMap<String, Vec<String>>,
) -> CompletionReport {
    let assigned: BTreeMap<&str, BTreeSet<&str>> = assignments
        .iter()
        .map(|(k, v)| (k.as_str(), v.iter().map(String::as_str).collect()))
        .collect();
    let mut done: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    let mut outside = Vec::new();
    for r in records {
        match assigned.get(r.annotator.as_str()) {
            Some(set) if set.contains(r.image_id.as_str()) => {
                done.entry(r.annotator.as_str()).or_default().insert(r.image_id.as_str());
            }
            _ => outside.push((r.annotator.clone(), r.image_id.clone())),
        }
    }
    let per_expert: BTreeMap<String, CompletionRow> = assigned
        .iter()
        .map(|(k, set)| (k.to_string(), CompletionRow::new(set.len(), done.get(k).map_or(0, BTreeSet::len))))
        .collect();
    let total = CompletionRow::new(
        per_expert.values().map(|r| r.assigned).sum(),
        per_expert.values().map(|r| r.completed).sum(),
    );
    CompletionReport { per_expert, total, outside_assignment: outside }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceShare {
    pub dataset: DatasetSource,
    pub annotations: usize,
    pub percent: f64,
}

/// Annotation counts per source corpus, largest first.
pub fn source_distribution(records: &[AnnotationRecord]) -> Vec<SourceShare> {
    let mut counts: BTreeMap<DatasetSource, usize> = BTreeMap::new();
    for r in records {
        *counts.entry(r.dataset).or_default() += 1;
    }
    let total = records.len().max(1) as f64;
    let mut out: Vec<SourceShare> = counts
        .into_iter()
        .map(|(dataset, annotations)| SourceShare { dataset, annotations, percent: 100.0 * annotations as f64 / total })
        .collect();
    out.sort_by(|a, b| b.annotations.cmp(&a.annotations).then_with(|| a.dataset.cmp(&b.dataset)));
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IndexKind {
    Style,
    Dataset,
}

impl std::str::FromStr for IndexKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "style" => Ok(IndexKind::Style),
            "dataset" => Ok(IndexKind::Dataset),
            _ => Err(format!("unknown index kind `{s}` (style, dataset)")),
        }
    }
}

/// Dimension weights for one index kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexWeights(pub Vec<(Dimension, f64)>);

impl IndexWeights {
    pub fn for_kind(kind: IndexKind) -> Self {
        match kind {
            IndexKind::Style => IndexWeights(vec![
                (Dimension::TextImageAlignment, 0.6),
                (Dimension::ImageSimplicity, 0.25),
                (Dimension::ImageQuality, 0.15),
            ]),
            IndexKind::Dataset => {
                IndexWeights(vec![(Dimension::TextQuality, 0.5), (Dimension::TextSimplicity, 0.5)])
            }
        }
    }

    /// `100 * sum(w_d * score_d / max_d)` for one record.
    pub fn score(&self, r: &AnnotationRecord) -> Result<f64, EvalError> {
        let mut s = 0.0;
        for &(d, w) in &self.0 {
            let x = r.score(d).ok_or_else(|| EvalError::MissingDimension {
                annotator: r.annotator.clone(),
                image_id: r.image_id.clone(),
                dimension: d,
            })?;
            s += w * x / d.scale_max();
        }
        Ok(100.0 * s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccessibilityIndex {
    pub kind: IndexKind,
    pub key: String,
    pub score: f64,
    pub per_expert: BTreeMap<String, f64>,
    pub n: usize,
}

/// Weighted 0-100 index per style or per source: averaged over each expert's
/// records, then over experts. Highest first.
pub fn accessibility_index(
    records: &[AnnotationRecord],
    kind: IndexKind,
    weights: &IndexWeights,
) -> Result<Vec<AccessibilityIndex>, EvalError> {
    let mut groups: BTreeMap<String, BTreeMap<String, (f64, usize)>> = BTreeMap::new();
    for r in records {
        let key = match kind {
            IndexKind::Style => r.style.name().to_string(),
            IndexKind::Dataset => r.dataset.name().to_string(),
        };
        let s = weights.score(r)?;
        let e = groups.entry(key).or_default().entry(r.annotator.clone()).or_default();
        e.0 += s;
        e.1 += 1;
    }
    let mut out: Vec<AccessibilityIndex> = groups
        .into_iter()
        .map(|(key, experts)| {
            let n = experts.values().map(|v| v.1).sum();
            let per_expert: BTreeMap<String, f64> =
                experts.into_iter().map(|(a, (s, c))| (a, s / c as f64)).collect();
            let score = per_expert.values().sum::<f64>() / per_expert.len() as f64;
            AccessibilityIndex { kind, key, score, per_expert, n }
        })
        .collect();
    out.sort_by(|a, b| b.score.total_cmp(&a.score).then_with(|| a.key.cmp(&b.key)));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evalkit::fixtures::record;
    use crate::evalkit::{round1, round3};

    fn guessed(annotator: &str, truth: Style, guesses: &[Style]) -> AnnotationRecord {
        let mut r = record(annotator, "0001", "asset_001", truth, &[]);
        r.style_guesses = guesses.to_vec();
        r
    }

    /// Records reproducing hit/total counts per expert.
    fn recall_fixture(counts: &[(&str, usize, usize)]) -> Vec<AnnotationRecord> {
        let mut out = Vec::new();
        for &(a, hits, total) in counts {
            for i in 0..total {
                let g = if i < hits { vec![Style::Cartoon, Style::Retro] } else { vec![Style::Cartoon] };
                out.push(guessed(a, Style::Retro, &g));
            }
        }
        out
    }

    #[test]
    fn recall_hits_and_misses() {
        let recs = vec![
            guessed("A", Style::Retro, &[Style::ThreeDRendered, Style::Retro, Style::Cartoon]),
            guessed("A", Style::Retro, &[]),
            guessed("K", Style::Technical, &[Style::Retro]),
        ];
        let rep = recall_at_3(&recs);
        assert_eq!(rep.per_expert["A"], RecallRow::new(1, 2));
        assert_eq!(rep.overall, RecallRow::new(1, 3));
    }

    #[test]
    fn recall_table_counts() {
        let recs = recall_fixture(&[("A", 126, 250), ("M", 139, 276), ("K", 120, 250), ("L", 77, 200)]);
        let rep = recall_at_3(&recs);
        assert_eq!(round3(rep.per_expert["A"].recall), 0.504);
        assert_eq!(round3(rep.per_expert["M"].recall), 0.504);
        assert_eq!(round3(rep.per_expert["K"].recall), 0.480);
        assert_eq!(round3(rep.per_expert["L"].recall), 0.385);
        assert_eq!((rep.overall.hits, rep.overall.total), (462, 976));
        assert_eq!(round3(rep.overall.recall), 0.473);
    }

    #[test]
    fn tiers_follow_table() {
        for (recall, tier) in [
            (0.816, Tier::Easy),
            (0.760, Tier::Easy),
            (0.697, Tier::Medium),
            (0.553, Tier::Medium),
            (0.442, Tier::Hard),
            (0.341, Tier::Hard),
            (0.180, Tier::VeryHard),
            (0.097, Tier::VeryHard),
        ] {
            assert_eq!(Tier::from_recall(recall), tier, "{recall}");
        }
    }

    #[test]
    fn contribution_table() {
        let means = [
            (Dimension::ImageSimplicity, 4.56),
            (Dimension::ImageQuality, 6.34),
            (Dimension::TextSimplicity, 5.65),
            (Dimension::TextQuality, 10.13),
            (Dimension::Ethics, 14.74),
            (Dimension::TextImageAlignment, 5.49),
        ];
        let c = contributions_from_means(&means).unwrap();
        // Text Simplicity comes out at 12.04%, printed as 12.1 in the source table.
        for (got, want) in c.iter().zip([9.7, 13.5, 12.1, 21.6, 31.4, 11.7]) {
            assert!((got.share - want).abs() <= 0.1, "{:?}: {} vs {want}", got.dimension, got.share);
        }
        assert_eq!(round1(c[4].share), 31.4);
        assert!((c.iter().map(|x| x.share).sum::<f64>() - 100.0).abs() < 1e-9);
        assert_eq!(contributions_from_means(&means[..1]).unwrap()[0].share, 100.0);
        assert!(matches!(contributions_from_means(&[(Dimension::Ethics, 0.0)]), Err(EvalError::AllZero)));
    }

    #[test]
    fn completion_rates() {
        let mut assignments = BTreeMap::new();
        let mut recs = Vec::new();
        for (a, done) in [("A", 250), ("K", 250), ("L", 200), ("M", 276)] {
            let ids: Vec<String> = (0..650).map(|i| format!("{a}{i:04}")).collect();
            for id in ids.iter().take(done) {
                recs.push(record(a, id, "asset_001", Style::Retro, &[]));
            }
            assignments.insert(a.to_string(), ids);
        }
        recs.push(record("A", "K0001", "asset_001", Style::Retro, &[]));
        let rep = completion_report(&recs, &assignments);
        let pct = |r: &CompletionRow| round1(100.0 * r.rate);
        assert_eq!(pct(&rep.per_expert["A"]), 38.5);
        assert_eq!(pct(&rep.per_expert["K"]), 38.5);
        assert_eq!(pct(&rep.per_expert["L"]), 30.8);
        assert_eq!(pct(&rep.per_expert["M"]), 42.5);
        assert_eq!((rep.total.completed, rep.total.assigned), (976, 2600));
        assert_eq!(pct(&rep.total), 37.5);
        assert_eq!(rep.outside_assignment, vec![("A".to_string(), "K0001".to_string())]);
        assert_eq!(completion_report(&[], &assignments).total.rate, 0.0);
    }

    #[test]
    fn index_extremes_and_averaging() {
        let w = IndexWeights::for_kind(IndexKind::Style);
        let full = [
            (Dimension::TextImageAlignment, 20.0),
            (Dimension::ImageSimplicity, 15.0),
            (Dimension::ImageQuality, 15.0),
        ];
        let half = [
            (Dimension::TextImageAlignment, 10.0),
            (Dimension::ImageSimplicity, 7.5),
            (Dimension::ImageQuality, 7.5),
        ];
        assert_eq!(w.score(&record("A", "1", "asset_001", Style::Retro, &full)).unwrap(), 100.0);
        assert_eq!(w.score(&record("A", "1", "asset_001", Style::Retro, &half)).unwrap(), 50.0);

        // Expert A rates Retro twice (100, 50), expert K once (50):
        // per expert 75 and 50, overall 62.5 rather than the pooled 66.7.
        let recs = vec![
            record("A", "1", "asset_001", Style::Retro, &full),
            record("A", "2", "asset_002", Style::Retro, &half),
            record("K", "1", "asset_001", Style::Retro, &half),
        ];
        let idx = accessibility_index(&recs, IndexKind::Style, &w).unwrap();
        assert_eq!(idx[0].key, "Retro");
        assert_eq!(idx[0].per_expert["A"], 75.0);
        assert_eq!(idx[0].score, 62.5);

        let missing = vec![record("A", "1", "asset_001", Style::Retro, &[])];
        assert!(matches!(
            accessibility_index(&missing, IndexKind::Style, &w),
            Err(EvalError::MissingDimension { .. })
        ));
    }

    #[test]
    fn sources_counted() {
        let recs = vec![
            record("A", "1", "wikipedia_001", Style::Retro, &[]),
            record("A", "2", "wikipedia_002", Style::Retro, &[]),
            record("A", "3", "simpa_001", Style::Retro, &[]),
        ];
        let d = source_distribution(&recs);
        assert_eq!(d[0].dataset, DatasetSource::Wikipedia);
        assert_eq!(d[0].annotations, 2);
    }
}
