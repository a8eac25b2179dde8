//! Krippendorff's alpha via the coincidence matrix.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{AnnotationRecord, Dimension, EvalError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Nominal,
    Ordinal,
    #[default]
    Interval,
}

impl std::str::FromStr for Metric {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "nominal" => Ok(Metric::Nominal),
            "ordinal" => Ok(Metric::Ordinal),
            "interval" => Ok(Metric::Interval),
            _ => Err(format!("unknown metric `{s}` (nominal, ordinal, interval)")),
        }
    }
}

/// Alpha over `units`, each the list of values assigned to one item.
///
/// Units with fewer than two values are not pairable and are ignored.
/// Returns [`EvalError::DegenerateAgreement`] when the pooled values show no
/// variation at all.
pub fn krippendorff_alpha(units: &[Vec<f64>], metric: Metric) -> Result<f64, EvalError> {
    let pairable: Vec<&Vec<f64>> = units.iter().filter(|u| u.len() >= 2).collect();
    let values: Vec<f64> = {
        let mut v: Vec<f64> = pairable.iter().flat_map(|u| u.iter().copied()).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        v
    };
    if values.is_empty() {
        return Err(EvalError::Insufficient { what: "pairable values", needed: 2, found: 0 });
    }
    let idx = |x: f64| values.binary_search_by(|v| v.total_cmp(&x)).expect("value present");
    let k = values.len();

    // o[c][k] = sum over units of (number of c-k pairs) / (m_u - 1)
    let mut o = vec![vec![0.0; k]; k];
    for u in &pairable {
        let m = u.len() as f64;
        let mut counts = vec![0.0; k];
        for &x in u.iter() {
            counts[idx(x)] += 1.0;
        }
        for c in 0..k {
            if counts[c] == 0.0 {
                continue;
            }
            for d in 0..k {
                let pairs = if c == d { counts[c] * (counts[c] - 1.0) } else { counts[c] * counts[d] };
                o[c][d] += pairs / (m - 1.0);
            }
        }
    }
    let n_c: Vec<f64> = o.iter().map(|row| row.iter().sum()).collect();
    let n: f64 = n_c.iter().sum();

    let delta = |c: usize, d: usize| -> f64 {
        match metric {
            Metric::Nominal => (c != d) as u8 as f64,
            Metric::Interval => (values[c] - values[d]).powi(2),
            Metric::Ordinal => {
                let (lo, hi) = if c <= d { (c, d) } else { (d, c) };
                let between: f64 = n_c[lo..=hi].iter().sum();
                (between - (n_c[c] + n_c[d]) / 2.0).powi(2)
            }
        }
    };

    let mut d_o = 0.0;
    let mut d_e = 0.0;
    for c in 0..k {
        for d in 0..k {
            let dl = delta(c, d);
            d_o += o[c][d] * dl;
            d_e += n_c[c] * n_c[d] * dl;
        }
    }
    d_o /= n;
    d_e /= n * (n - 1.0);
    if d_e == 0.0 {
        return Err(EvalError::DegenerateAgreement);
    }
    Ok(1.0 - d_o / d_e)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaResult {
    pub alpha: f64,
    pub n_items: usize,
    pub n_ratings: usize,
}

/// Alpha for one dimension over images rated by at least `min_raters` experts.
pub fn alpha_for_dimension(
    records: &[AnnotationRecord],
    dimension: Dimension,
    metric: Metric,
    min_raters: usize,
) -> Result<AlphaResult, EvalError> {
    let min_raters = min_raters.max(2);
    let mut by_image: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for r in records {
        if let Some(x) = r.score(dimension) {
            by_image.entry(r.image_id.as_str()).or_default().push(x);
        }
    }
    let units: Vec<Vec<f64>> = by_image.into_values().filter(|u| u.len() >= min_raters).collect();
    if units.len() < 2 {
        return Err(EvalError::Insufficient { what: "items with enough raters", needed: 2, found: units.len() });
    }
    let alpha = krippendorff_alpha(&units, metric)?;
    Ok(AlphaResult { alpha, n_items: units.len(), n_ratings: units.iter().map(Vec::len).sum() })
}

/// One cell of the agreement table; `alpha` is absent when it is undefined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementCell {
    pub dimension: Dimension,
    pub min_raters: usize,
    /// `all` when `min_raters` equals the number of annotators, else `at_least_<k>`.
    pub subgroup: String,
    pub alpha: Option<f64>,
    pub n_items: usize,
    pub n_ratings: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

/// Alpha for every dimension with `min_raters` from the number of annotators
/// down to 2.
pub fn agreement_report(records: &[AnnotationRecord], metric: Metric) -> Vec<AgreementCell> {
    let annotators: BTreeSet<&str> = records.iter().map(|r| r.annotator.as_str()).collect();
    let top = annotators.len().max(2);
    let mut out = Vec::new();
    for d in super::Dimension::ALL {
        for k in (2..=top).rev() {
            let subgroup = if k == top { "all".to_string() } else { format!("at_least_{k}") };
            let cell = match alpha_for_dimension(records, d, metric, k) {
                Ok(a) => AgreementCell {
                    dimension: d,
                    min_raters: k,
                    subgroup,
                    alpha: Some(a.alpha),
                    n_items: a.n_items,
                    n_ratings: a.n_ratings,
                    note: None,
                },
                Err(e) => AgreementCell {
                    dimension: d,
                    min_raters: k,
                    subgroup,
                    alpha: None,
                    n_items: 0,
                    n_ratings: 0,
                    note: Some(e.to_string()),
                },
            };
            out.push(cell);
        }
    }
    out
}
