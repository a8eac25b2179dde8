//! Lint rules that check a generated image prompt against its template.

use std::fmt;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::{Style, TemplateSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    StyleKeyword,
    Spacing,
    BannedContent,
    Background,
    NumericMarkers,
    ObjectCount,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Rule::StyleKeyword => "style keyword",
            Rule::Spacing => "spacing clause",
            Rule::BannedContent => "banned content",
            Rule::Background => "background clause",
            Rule::NumericMarkers => "numeric markers",
            Rule::ObjectCount => "object count",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Hard,
    Soft,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub rule: Rule,
    pub severity: Severity,
    /// The offending text, or the required clause when something is missing.
    pub excerpt: String,
}

impl Violation {
    fn hard(rule: Rule, excerpt: impl Into<String>) -> Self {
        Violation { rule, severity: Severity::Hard, excerpt: excerpt.into() }
    }

    pub fn is_hard(&self) -> bool {
        self.severity == Severity::Hard
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({:?}): {}", self.rule, self.severity, self.excerpt)
    }
}

struct Patterns {
    sentence: Regex,
    percent: Regex,
    spacing_word: Regex,
    banned: Regex,
    negation: Regex,
    background_word: Regex,
    plain_word: Regex,
    numeric_marker: Regex,
    object_count: Regex,
}

fn patterns() -> &'static Patterns {
    static P: OnceLock<Patterns> = OnceLock::new();
    P.get_or_init(|| Patterns {
        // sentence-ish clauses; "3..." and decimals stay intact
        sentence: Regex::new(r"[^.;!?\n]+(?:\.\.\.[^.;!?\n]*)*").unwrap(),
        percent: Regex::new(r"(\d{1,3})\s*(?:%|percent\b)").unwrap(),
        spacing_word: Regex::new(r"(?i)\b(spacing|space|spaced|margins?|apart|separation|separated|gaps?|distance)\b").unwrap(),
        banned: Regex::new(r"(?i)\b(text|words|letters|numbers)\b").unwrap(),
        negation: Regex::new(r"(?i)\b(no|not|without|avoid|avoiding|exclude|excluding|never|free of|none)\b|n't\b").unwrap(),
        background_word: Regex::new(r"(?i)\bbackground\b").unwrap(),
        plain_word: Regex::new(r"(?i)\b(plain|uniform|simple|neutral|white|gray|grey|solid|light|clean|blank)\b").unwrap(),
        numeric_marker: Regex::new(r"(?i)numeric markers?|number markers?|\b1\s*,\s*2\s*,\s*3").unwrap(),
        object_count: Regex::new(
            r"(?i)\b(one|two|three|four|five|six|seven|eight|nine|ten|\d{1,2})\s+(?:distinct\s+|separate\s+|different\s+|main\s+|key\s+)?(?:objects|items|elements)\b",
        )
        .unwrap(),
    })
}

fn sentences(prompt: &str) -> impl Iterator<Item = &str> {
    patterns().sentence.find_iter(prompt).map(|m| m.as_str())
}

fn parse_count(word: &str) -> Option<u32> {
    let w = word.to_ascii_lowercase();
    let words = ["zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten"];
    words
        .iter()
        .position(|x| *x == w)
        .map(|i| i as u32)
        .or_else(|| w.parse().ok())
}

/// Check `prompt` against the hard and soft rules of `template` and `style`.
///
/// Hard rules: the style keyword is present; the template's spacing or margin
/// percentage is stated (at or above its minimum) when it mandates one; the
/// words text/words/letters/numbers only appear negated (any use is allowed in
/// the educational layout); a plain background is described when the template
/// requires one; numeric markers are described in the educational layout.
/// Soft rule: a stated object count lies within the template's range.
pub fn validate_prompt(prompt: &str, template: &TemplateSpec, style: Style) -> Vec<Violation> {
    let p = patterns();
    let lower = prompt.to_lowercase();
    let mut out = Vec::new();

    if !style.keyword_markers().iter().any(|m| lower.contains(m)) {
        out.push(Violation::hard(
            Rule::StyleKeyword,
            format!("prompt must name the style (\"{}\")", style.keyword_markers()[0]),
        ));
    }

    if let Some(req) = template.spacing_requirement() {
        let satisfied = sentences(prompt).any(|s| {
            p.spacing_word.is_match(s)
                && p.percent
                    .captures_iter(s)
                    .filter_map(|c| c[1].parse::<u32>().ok())
                    .any(|v| v >= req.min_percent)
        });
        if !satisfied {
            out.push(Violation::hard(Rule::Spacing, req.citation));
        }
    }

    if !template.requires_numeric_markers() {
        for s in sentences(prompt) {
            for m in p.banned.find_iter(s) {
                let negated = p.negation.is_match(&s[..m.start()]);
                if !negated {
                    out.push(Violation::hard(Rule::BannedContent, s.trim()));
                }
            }
        }
    }

    if template.requires_plain_background() {
        let ok = sentences(prompt).any(|s| p.background_word.is_match(s) && p.plain_word.is_match(s));
        if !ok {
            out.push(Violation::hard(Rule::Background, "Background must be uniform and simple"));
        }
    }

    if template.requires_numeric_markers() && !p.numeric_marker.is_match(prompt) {
        out.push(Violation::hard(
            Rule::NumericMarkers,
            "Include a visible numeric marker (1, 2, 3...) near each object.",
        ));
    }

    if let Some(c) = p.object_count.captures(prompt) {
        if let Some(n) = parse_count(&c[1]) {
            let (lo, hi) = template.object_range();
            if n < lo || n > hi {
                out.push(Violation {
                    rule: Rule::ObjectCount,
                    severity: Severity::Soft,
                    excerpt: format!("{} (allowed {lo}-{hi})", c[0].trim()),
                });
            }
        }
    }

    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::templates::{TemplateName, TemplateVersion};

    fn spec(name: TemplateName) -> TemplateSpec {
        TemplateSpec::new(name, TemplateVersion::V1)
    }

    fn hard_rules(v: &[Violation]) -> Vec<Rule> {
        v.iter().filter(|v| v.is_hard()).map(|v| v.rule).collect()
    }

    #[test]
    fn contextual_scene_without_spacing_cites_requirement() {
        let v = validate_prompt(
            "Create a cartoon image of three objects in a horizontal line on a plain surface.",
            &spec(TemplateName::ContextualScene),
            Style::Cartoon,
        );
        assert_eq!(hard_rules(&v), vec![Rule::Spacing]);
        assert_eq!(v[0].excerpt, "at least 20% spacing between each object");
    }

    #[test]
    fn spacing_below_minimum_is_rejected() {
        let s = spec(TemplateName::ContextualScene);
        let low = validate_prompt("A cartoon row of objects with 10% spacing between them.", &s, Style::Cartoon);
        assert_eq!(hard_rules(&low), vec![Rule::Spacing]);
        let ok = validate_prompt("A cartoon row of objects with 25% spacing between them.", &s, Style::Cartoon);
        assert!(hard_rules(&ok).is_empty());
    }

    #[test]
    fn educational_numeric_markers_are_allowed() {
        let v = validate_prompt(
            "A retro sequence of four objects joined by arrows, with a numeric marker (1, 2, 3...) near each object and small numbers.",
            &spec(TemplateName::EducationalLayout),
            Style::Retro,
        );
        assert!(hard_rules(&v).is_empty(), "{v:?}");
    }

    #[test]
    fn educational_without_markers_is_rejected() {
        let v = validate_prompt("A retro sequence of four objects.", &spec(TemplateName::EducationalLayout), Style::Retro);
        assert_eq!(hard_rules(&v), vec![Rule::NumericMarkers]);
    }

    #[test]
    fn banned_terms_only_when_not_negated() {
        let s = spec(TemplateName::MultiLevelDetail);
        let neg = validate_prompt("A storybook scene in layers. No text, letters or numbers anywhere.", &s, Style::Storybook);
        assert!(hard_rules(&neg).is_empty(), "{neg:?}");
        let pos = validate_prompt("A storybook scene in layers. Add the words HELLO on a sign.", &s, Style::Storybook);
        assert_eq!(hard_rules(&pos), vec![Rule::BannedContent]);
        // "context" and "texture" are not "text"
        let sub = validate_prompt("A storybook scene with soft texture and context.", &s, Style::Storybook);
        assert!(hard_rules(&sub).is_empty());
    }

    #[test]
    fn empty_prompt_misses_every_required_clause() {
        let refined = TemplateSpec::production();
        assert_eq!(
            hard_rules(&validate_prompt("", &refined, Style::Retro)),
            vec![Rule::StyleKeyword, Rule::Spacing, Rule::Background]
        );
        assert_eq!(
            hard_rules(&validate_prompt("", &spec(TemplateName::EducationalLayout), Style::Retro)),
            vec![Rule::StyleKeyword, Rule::NumericMarkers]
        );
    }

    #[test]
    fn style_keyword_is_case_insensitive() {
        let v = validate_prompt("A 3D Rendered cup.", &spec(TemplateName::MultiLevelDetail), Style::ThreeDRendered);
        assert!(v.is_empty());
    }

    #[test]
    fn object_count_is_soft() {
        let v = validate_prompt(
            "A retro image with seven distinct objects on a plain white background.",
            &spec(TemplateName::BasicObjectFocus),
            Style::Retro,
        );
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, Rule::ObjectCount);
        assert_eq!(v[0].severity, Severity::Soft);
    }
}
