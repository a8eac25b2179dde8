//! Pearson correlation with exact Student-t p-values, and per-expert
//! standardisation.

use std::collections::BTreeMap;

use log::warn;
use serde::{Deserialize, Serialize};

use super::EvalError;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for `x > 0` (Lanczos approximation).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // Reflection: Γ(x)Γ(1-x) = π / sin(πx)
        let s = (std::f64::consts::PI * x).sin();
        return std::f64::consts::PI.ln() - s.abs().ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Continued fraction for the incomplete beta function (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const EPS: f64 = 1e-16;
    const TINY: f64 = 1e-300;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=100_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularised incomplete beta `I_x(a, b)`.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

/// Two-sided p-value of a Student t statistic with `df` degrees of freedom.
pub fn student_t_two_sided_p(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t)).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub r: f64,
    pub p: f64,
    pub n: usize,
}

/// Product-moment correlation and its two-sided p-value from
/// `t = r * sqrt((n - 2) / (1 - r^2))`.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<Correlation, EvalError> {
    if x.len() != y.len() {
        return Err(EvalError::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len();
    if n < 3 {
        return Err(EvalError::Insufficient { what: "paired observations", needed: 3, found: n });
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 {
        return Err(EvalError::ZeroVariance("x"));
    }
    if syy == 0.0 {
        return Err(EvalError::ZeroVariance("y"));
    }
    let r = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    let df = nf - 2.0;
    let one_minus = 1.0 - r * r;
    let p = if one_minus <= 0.0 {
        0.0
    } else {
        student_t_two_sided_p(r * (df / one_minus).sqrt(), df)
    };
    Ok(Correlation { r, p, n })
}

/// Per-expert z-scores.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Standardized {
    pub values: BTreeMap<String, Vec<f64>>,
    /// Experts dropped for having no variance.
    pub excluded: Vec<String>,
}

/// Z-score each expert's values with the sample standard deviation.
pub fn standardize_per_expert(groups: &BTreeMap<String, Vec<f64>>) -> Standardized {
    let mut out = Standardized::default();
    for (expert, xs) in groups {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = if xs.len() > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
        if var.is_nan() || var <= 0.0 {
            warn!("expert {expert}: no variance in {} value(s); excluded from standardisation", xs.len());
            out.excluded.push(expert.clone());
            continue;
        }
        let sd = var.sqrt();
        out.values.insert(expert.clone(), xs.iter().map(|x| (x - mean) / sd).collect());
    }
    out
}

/// `***` below 0.001, `**` below 0.01, `*` below 0.05.
pub fn significance_stars(p: f64) -> &'static str {
    if p < 0.001 {
        "***"
    } else if p < 0.01 {
        "**"
    } else if p < 0.05 {
        "*"
    } else {
        ""
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRow {
    /// `raw_pooled`, `per_expert_standardized` or `per_expert:<id>`.
    pub level: String,
    pub r: Option<f64>,
    pub p: Option<f64>,
    pub n: usize,
    pub sig: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl CorrelationRow {
    fn from_result(level: String, n: usize, res: Result<Correlation, EvalError>) -> Self {
        match res {
            Ok(c) => CorrelationRow {
                level,
                r: Some(c.r),
                p: Some(c.p),
                n: c.n,
                sig: significance_stars(c.p).to_string(),
                note: None,
            },
            Err(e) => CorrelationRow { level, r: None, p: None, n, sig: String::new(), note: Some(e.to_string()) },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub rows: Vec<CorrelationRow>,
    pub excluded_from_standardization: Vec<String>,
}

impl CorrelationReport {
    pub fn level(&self, level: &str) -> Option<&CorrelationRow> {
        self.rows.iter().find(|r| r.level == level)
    }
}

/// Correlate machine scores with human ratings given as
/// `(annotator, score, rating)` triples: pooled raw, pooled after per-expert
/// standardisation of the ratings, and within each expert.
pub fn correlation_report(pairs: &[(String, f64, f64)]) -> CorrelationReport {
    let x: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let y: Vec<f64> = pairs.iter().map(|p| p.2).collect();
    let mut rows = vec![CorrelationRow::from_result("raw_pooled".into(), pairs.len(), pearson(&x, &y))];

    let mut groups: BTreeMap<String, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for (a, s, r) in pairs {
        let g = groups.entry(a.clone()).or_default();
        g.0.push(*s);
        g.1.push(*r);
    }
    let ratings: BTreeMap<String, Vec<f64>> = groups.iter().map(|(k, v)| (k.clone(), v.1.clone())).collect();
    let z = standardize_per_expert(&ratings);
    let (mut zx, mut zy) = (Vec::new(), Vec::new());
    for (expert, zs) in &z.values {
        zx.extend_from_slice(&groups[expert].0);
        zy.extend_from_slice(zs);
    }
    rows.push(CorrelationRow::from_result("per_expert_standardized".into(), zx.len(), pearson(&zx, &zy)));

    let mut per: Vec<CorrelationRow> = groups
        .iter()
        .map(|(expert, (s, r))| CorrelationRow::from_result(format!("per_expert:{expert}"), s.len(), pearson(s, r)))
        .collect();
    per.sort_by(|a, b| {
        b.r.unwrap_or(f64::NEG_INFINITY)
            .total_cmp(&a.r.unwrap_or(f64::NEG_INFINITY))
            .then_with(|| a.level.cmp(&b.level))
    });
    rows.extend(per);
    CorrelationReport { rows, excluded_from_standardization: z.excluded }
}
