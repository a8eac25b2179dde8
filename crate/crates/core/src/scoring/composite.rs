//! Per-template components and the weighted composite used to rank templates.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::ScoringError;

/// Raw scores per template and item. `None` marks an item the template was
/// asked for but produced no scored image (blocked, failed or missing). An item
/// present for one template and absent for another counts as `None` there.
pub type ScoreTable = BTreeMap<String, BTreeMap<String, Option<f64>>>;

/// How per-template raw means become `mu` in [0, 1].
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum MuNormalization {
    /// Min-max across templates; all equal means map to 1.
    #[default]
    MinMax,
    /// Raw mean divided by the score ceiling (the CLIPScore weight).
    Raw { ceiling: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompositeWeights {
    pub mu: f64,
    pub consistency: f64,
    pub success: f64,
    pub best: f64,
    pub worst: f64,
}

impl Default for CompositeWeights {
    fn default() -> Self {
        CompositeWeights { mu: 0.4, consistency: 0.2, success: 0.2, best: 0.1, worst: 0.1 }
    }
}

impl CompositeWeights {
    pub fn validate(&self) -> Result<(), ScoringError> {
        let all = [self.mu, self.consistency, self.success, self.best, self.worst];
        if all.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(ScoringError::InvalidWeights(format!("negative or non-finite weight in {all:?}")));
        }
        let sum: f64 = all.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(ScoringError::InvalidWeights(format!("weights sum to {sum}, not 1")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateScoreComponents {
    pub template: String,
    pub raw_mean: f64,
    pub raw_std: f64,
    pub attempted: usize,
    pub succeeded: usize,
    pub mu: f64,
    #[serde(rename = "C")]
    pub c: f64,
    #[serde(rename = "S")]
    pub s: f64,
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(rename = "W")]
    pub w: f64,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Compute mu, C, S, B and W for every template.
///
/// * mu: normalised mean of the successful raw scores.
/// * C: `1 - sd_t / max sd` with population standard deviations; 1 for all
///   templates when every sd is 0.
/// * S: scored items over attempted items.
/// * B, W: share of items on which the template has the highest or lowest
///   score. Each item credits exactly one template for each; ties go to the
///   lexicographically first template and a missing score is the lowest.
///   Only items scored by at least one template count.
pub fn component_stats(
    table: &ScoreTable,
    norm: MuNormalization,
) -> Result<Vec<TemplateScoreComponents>, ScoringError> {
    if table.is_empty() {
        return Err(ScoringError::Empty);
    }
    if table.len() < 2 {
        return Err(ScoringError::SingleTemplate);
    }
    let items: BTreeSet<&String> = table.values().flat_map(|m| m.keys()).collect();
    if items.is_empty() {
        return Err(ScoringError::Empty);
    }
    let score = |t: &str, item: &String| table[t].get(item).copied().flatten();

    let mut out: Vec<TemplateScoreComponents> = table
        .iter()
        .map(|(t, scores)| {
            let ok: Vec<f64> = scores.values().filter_map(|s| *s).collect();
            let (raw_mean, raw_std) = mean_std(&ok);
            TemplateScoreComponents {
                template: t.clone(),
                raw_mean,
                raw_std,
                attempted: items.len(),
                succeeded: ok.len(),
                mu: 0.0,
                c: 0.0,
                s: ok.len() as f64 / items.len() as f64,
                b: 0.0,
                w: 0.0,
            }
        })
        .collect();

    match norm {
        MuNormalization::MinMax => {
            let lo = out.iter().map(|c| c.raw_mean).fold(f64::INFINITY, f64::min);
            let hi = out.iter().map(|c| c.raw_mean).fold(f64::NEG_INFINITY, f64::max);
            for c in &mut out {
                c.mu = if hi > lo { (c.raw_mean - lo) / (hi - lo) } else { 1.0 };
            }
        }
        MuNormalization::Raw { ceiling } => {
            if ceiling.is_nan() || ceiling <= 0.0 {
                return Err(ScoringError::InvalidWeights(format!("score ceiling {ceiling} must be positive")));
            }
            for c in &mut out {
                c.mu = (c.raw_mean / ceiling).clamp(0.0, 1.0);
            }
        }
    }

    let max_sd = out.iter().map(|c| c.raw_std).fold(0.0, f64::max);
    for c in &mut out {
        c.c = if max_sd > 0.0 { 1.0 - c.raw_std / max_sd } else { 1.0 };
    }

    let names: Vec<&String> = table.keys().collect();
    let mut best = vec![0usize; names.len()];
    let mut worst = vec![0usize; names.len()];
    let mut counted = 0usize;
    for item in &items {
        let scored: Vec<(usize, f64)> =
            names.iter().enumerate().filter_map(|(i, t)| score(t, item).map(|s| (i, s))).collect();
        if scored.is_empty() {
            continue;
        }
        counted += 1;
        let mut b = scored[0];
        for &(i, s) in &scored[1..] {
            if s > b.1 {
                b = (i, s);
            }
        }
        best[b.0] += 1;
        let missing = names.iter().position(|t| score(t, item).is_none());
        let w = missing.unwrap_or_else(|| {
            let mut w = scored[0];
            for &(i, s) in &scored[1..] {
                if s < w.1 {
                    w = (i, s);
                }
            }
            w.0
        });
        worst[w] += 1;
    }
    if counted > 0 {
        for (i, c) in out.iter_mut().enumerate() {
            c.b = best[i] as f64 / counted as f64;
            c.w = worst[i] as f64 / counted as f64;
        }
    }
    Ok(out)
}

/// `w_mu*mu + w_C*C + w_S*S + w_B*B + w_W*(1 - W)`.
///
/// Evaluated as `mu` plus the weighted offsets of the other terms from `mu`,
/// which is the same sum because the weights add up to 1, and returns the
/// common value exactly when all five terms are equal.
pub fn composite(c: &TemplateScoreComponents, weights: &CompositeWeights) -> Result<f64, ScoringError> {
    weights.validate()?;
    for (name, v) in [("mu", c.mu), ("C", c.c), ("S", c.s), ("B", c.b), ("W", c.w)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(ScoringError::ComponentOutOfRange { component: name, value: v });
        }
    }
    let anchor = c.mu;
    Ok(anchor
        + weights.consistency * (c.c - anchor)
        + weights.success * (c.s - anchor)
        + weights.best * (c.b - anchor)
        + weights.worst * ((1.0 - c.w) - anchor))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedTemplate {
    pub rank: usize,
    #[serde(flatten)]
    pub components: TemplateScoreComponents,
    pub composite: f64,
    /// `composite * display_scale`.
    pub display: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub weights: CompositeWeights,
    pub display_scale: f64,
    pub templates: Vec<RankedTemplate>,
}

/// Order templates by composite, then mu, then name.
pub fn rank_templates(
    components: &[TemplateScoreComponents],
    weights: &CompositeWeights,
    display_scale: f64,
) -> Result<Ranking, ScoringError> {
    weights.validate()?;
    if components.len() < 2 {
        return Err(if components.is_empty() { ScoringError::Empty } else { ScoringError::SingleTemplate });
    }
    let mut rows = components
        .iter()
        .map(|c| Ok((composite(c, weights)?, c.clone())))
        .collect::<Result<Vec<_>, ScoringError>>()?;
    rows.sort_by(|(ca, a), (cb, b)| {
        cb.total_cmp(ca)
            .then_with(|| b.mu.total_cmp(&a.mu))
            .then_with(|| a.template.cmp(&b.template))
    });
    Ok(Ranking {
        weights: *weights,
        display_scale,
        templates: rows
            .into_iter()
            .enumerate()
            .map(|(i, (composite, components))| RankedTemplate {
                rank: i + 1,
                components,
                composite,
                display: composite * display_scale,
            })
            .collect(),
    })
}
