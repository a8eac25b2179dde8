//! One JSON document with every annotation statistic.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::alpha::{agreement_report, AgreementCell, Metric};
use super::metrics::*;
use super::stats::{correlation_report, CorrelationReport};
use super::{AnnotationRecord, Dimension, EvalError};
use crate::scoring::ClipScoreRecord;
use crate::templates::Style;

#[derive(Debug, Clone, Copy, Default)]
pub struct ReportInputs<'a> {
    pub records: &'a [AnnotationRecord],
    pub assignments: Option<&'a BTreeMap<String, Vec<String>>>,
    pub clip_scores: Option<&'a [ClipScoreRecord]>,
    pub metric: Metric,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexSection {
    pub style: Vec<AccessibilityIndex>,
    pub dataset: Vec<AccessibilityIndex>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_records: usize,
    pub annotators: Vec<String>,
    pub completion: Option<CompletionReport>,
    pub source_distribution: Vec<SourceShare>,
    pub dimension_contributions: Option<Vec<Contribution>>,
    pub agreement: Vec<AgreementCell>,
    pub style_recall: RecallReport,
    pub style_difficulty: Vec<StyleDifficulty>,
    pub correlation: Option<CorrelationReport>,
    pub accessibility: Option<IndexSection>,
    /// Sections that could not be computed and why.
    pub notes: Vec<String>,
}

/// `(annotator, CLIPScore, alignment rating)` for every record that has an
/// alignment rating and a score for its (item, style).
pub fn join_clip_scores(
    records: &[AnnotationRecord],
    scores: &[ClipScoreRecord],
) -> Result<Vec<(String, f64, f64)>, EvalError> {
    let mut by_key: BTreeMap<(&str, Style), f64> = BTreeMap::new();
    for s in scores {
        if by_key.insert((s.item_id.as_str(), s.style), s.score).is_some() {
            return Err(EvalError::AmbiguousScore { item_id: s.item_id.clone(), style: s.style });
        }
    }
    Ok(records
        .iter()
        .filter_map(|r| {
            let rating = r.score(Dimension::TextImageAlignment)?;
            let score = by_key.get(&(r.item_id.as_str(), r.style))?;
            Some((r.annotator.clone(), *score, rating))
        })
        .collect())
}

fn index_or_note(records: &[AnnotationRecord], kind: IndexKind, notes: &mut Vec<String>) -> Vec<AccessibilityIndex> {
    let w = IndexWeights::for_kind(kind);
    let needed: Vec<Dimension> = w.0.iter().map(|(d, _)| *d).collect();
    let complete: Vec<AnnotationRecord> =
        records.iter().filter(|r| needed.iter().all(|d| r.score(*d).is_some())).cloned().collect();
    if complete.len() < records.len() {
        notes.push(format!(
            "{kind:?} index: {} record(s) lacking {} skipped",
            records.len() - complete.len(),
            needed.iter().map(|d| d.key()).collect::<Vec<_>>().join("/")
        ));
    }
    accessibility_index(&complete, kind, &w).expect("records filtered to complete ones")
}

pub fn build_report(inputs: ReportInputs<'_>) -> Result<EvalReport, EvalError> {
    let records = inputs.records;
    let mut notes = Vec::new();
    let annotators: Vec<String> =
        records.iter().map(|r| r.annotator.clone()).collect::<BTreeSet<_>>().into_iter().collect();

    let dimension_contributions = match dimension_contributions(records) {
        Ok(c) => Some(c),
        Err(e) => {
            notes.push(format!("dimension contributions: {e}"));
            None
        }
    };
    let correlation = match inputs.clip_scores {
        Some(scores) => Some(correlation_report(&join_clip_scores(records, scores)?)),
        None => {
            notes.push("correlation: no CLIPScore file given".into());
            None
        }
    };
    let completion = inputs.assignments.map(|a| completion_report(records, a));
    if completion.is_none() {
        notes.push("completion: no assignment file given".into());
    }
    let accessibility = if records.is_empty() {
        None
    } else {
        Some(IndexSection {
            style: index_or_note(records, IndexKind::Style, &mut notes),
            dataset: index_or_note(records, IndexKind::Dataset, &mut notes),
        })
    };

    Ok(EvalReport {
        n_records: records.len(),
        annotators,
        completion,
        source_distribution: source_distribution(records),
        dimension_contributions,
        agreement: agreement_report(records, inputs.metric),
        style_recall: recall_at_3(records),
        style_difficulty: style_difficulty(records),
        correlation,
        accessibility,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evalkit::fixtures::record;
    use crate::templates::TemplateSpec;

    fn records() -> Vec<AnnotationRecord> {
        let mut out = Vec::new();
        for (i, a) in ["A", "K", "L"].iter().enumerate() {
            for j in 0..4 {
                let scores: Vec<(Dimension, f64)> =
                    Dimension::ALL.iter().map(|d| (*d, ((i + j * 3) % 10) as f64)).collect();
                let mut r = record(a, &format!("{j:04}"), &format!("asset_{j:03}"), Style::ALL[j], &scores);
                r.style_guesses = vec![Style::ALL[(j + i) % 10]];
                out.push(r);
            }
        }
        out
    }

    fn clip(item: &str, style: Style, score: f64) -> ClipScoreRecord {
        ClipScoreRecord {
            item_id: item.into(),
            style,
            template: TemplateSpec::production(),
            score,
            cosine: score / 2.5,
            w: 2.5,
            model_id: "m".into(),
        }
    }

    #[test]
    fn full_report_is_deterministic() {
        let recs = records();
        let scores: Vec<ClipScoreRecord> =
            (0..4).map(|j| clip(&format!("asset_{j:03}"), Style::ALL[j], 0.3 + 0.1 * j as f64)).collect();
        let mut assignments = BTreeMap::new();
        for a in ["A", "K", "L"] {
            assignments.insert(a.to_string(), (0..8).map(|j| format!("{j:04}")).collect::<Vec<_>>());
        }
        let inputs = ReportInputs {
            records: &recs,
            assignments: Some(&assignments),
            clip_scores: Some(&scores),
            metric: Metric::Interval,
        };
        let a = serde_json::to_string(&build_report(inputs).unwrap()).unwrap();
        let b = serde_json::to_string(&build_report(inputs).unwrap()).unwrap();
        assert_eq!(a, b);
        let rep = build_report(inputs).unwrap();
        assert_eq!(rep.n_records, 12);
        assert_eq!(rep.completion.unwrap().total.completed, 12);
        assert_eq!(rep.correlation.unwrap().rows[0].n, 12);
        assert_eq!(rep.agreement.len(), 6 * 2);
        assert!(rep.notes.is_empty(), "{:?}", rep.notes);
    }

    #[test]
    fn empty_records_still_report() {
        let rep = build_report(ReportInputs::default()).unwrap();
        assert_eq!(rep.n_records, 0);
        assert!(rep.dimension_contributions.is_none());
        assert!(!rep.notes.is_empty());
    }

    #[test]
    fn duplicate_scores_are_ambiguous() {
        let recs = records();
        let scores = vec![clip("asset_000", Style::Cartoon, 1.0), clip("asset_000", Style::Cartoon, 2.0)];
        assert!(matches!(join_clip_scores(&recs, &scores), Err(EvalError::AmbiguousScore { .. })));
    }
}
