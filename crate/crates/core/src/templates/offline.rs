//! A deterministic, network-free chat client that writes template-conforming
//! prompts. Used for dry runs, fixtures and hermetic end-to-end tests.

use super::meta::{number_word, SENTENCE_HEADER, STYLE_HEADER, TEMPLATE_HEADER};
use super::{ChatClient, ChatError, ChatRequest, Role, Style, TemplateName, TemplateSpec, TemplateVersion};

const STOPWORDS: &[&str] = &[
    "a", "about", "after", "all", "also", "an", "and", "any", "are", "as", "at", "be", "been", "before",
    "being", "but", "by", "called", "can", "could", "did", "do", "does", "each", "even", "for", "from",
    "had", "has", "have", "he", "her", "here", "him", "his", "how", "i", "if", "in", "into", "is", "it",
    "its", "just", "kind", "like", "made", "make", "many", "may", "me", "more", "most", "much", "my",
    "no", "not", "now", "of", "on", "one", "only", "or", "other", "our", "out", "over", "part", "said",
    "she", "should", "so", "some", "such", "than", "that", "the", "their", "them", "then", "there",
    "these", "they", "this", "those", "through", "to", "too", "two", "under", "up", "us", "very", "was",
    "way", "we", "were", "what", "when", "where", "which", "while", "who", "will", "with", "would",
    "you", "your",
];

const FILLERS: &[&str] = &["cup", "chair", "book", "lamp", "ball"];

/// Up to `n` distinct content words from `sentence`, padded with neutral
/// everyday objects when the sentence has fewer.
pub fn pick_objects(sentence: &str, n: usize) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for raw in sentence.split_whitespace() {
        let w: String = raw
            .chars()
            .filter(|c| c.is_alphabetic() || *c == '-')
            .collect::<String>()
            .to_lowercase();
        let w = w.trim_matches('-').to_string();
        if w.len() < 3
            || STOPWORDS.contains(&w.as_str())
            || w.ends_with("ly")
            || w.ends_with("ed")
            || w.ends_with("ing")
            || out.contains(&w)
        {
            continue;
        }
        out.push(w);
        if out.len() == n {
            return out;
        }
    }
    for f in FILLERS {
        if out.len() == n {
            break;
        }
        if !out.iter().any(|o| o == f) {
            out.push(f.to_string());
        }
    }
    out
}

fn article(word: &str) -> &'static str {
    match word.chars().next() {
        Some('a' | 'e' | 'i' | 'o' | 'u') => "an",
        _ => "a",
    }
}

fn listed(objects: &[String]) -> String {
    let items: Vec<String> = objects.iter().map(|o| format!("{} {o}", article(o))).collect();
    match items.len() {
        0 => String::new(),
        1 => items[0].clone(),
        _ => format!("{}, and {}", items[..items.len() - 1].join(", "), items[items.len() - 1]),
    }
}

/// A prompt that satisfies every hard rule of `template` and `style`.
pub fn conforming_prompt(template: &TemplateSpec, style: Style, objects: &[String]) -> String {
    let marker = style.keyword_markers()[0];
    let count = number_word(objects.len() as u32);
    let things = listed(objects);
    match template.name {
        TemplateName::BasicObjectFocus => {
            let mut s = format!(
                "Create an image in a {marker} style on a plain light gray background. \
                 Include {count} distinct objects: {things}. \
                 Give every object the same size and prominence and place them with neutral positioning, \
                 with no scene, narrative, or sequence."
            );
            if template.version == TemplateVersion::V2 {
                s.push_str(" Keep at least 30% spacing between all objects and no more than 10% size variation.");
            } else {
                s.push_str(" Spread the objects as far apart as possible.");
            }
            s.push_str(" No text or letters anywhere in the image.");
            s
        }
        TemplateName::ContextualScene => format!(
            "Create an image in a {marker} style showing {count} distinct objects: {things}. \
             Arrange them in a straight horizontal line on a simple surface, seen from a single perspective, \
             all the same size, with at least 20% spacing between each object. \
             Use a neutral background and no text."
        ),
        TemplateName::EducationalLayout => format!(
            "Create an image in a {marker} style showing {count} distinct objects in a strict left-to-right sequence: {things}. \
             Connect each object to the next with an arrow, make each object about 10% smaller than the one before, \
             and place a visible numeric marker (1, 2, 3...) near each object. \
             Narrow the spacing slightly with each step on a neutral background."
        ),
        TemplateName::MultiLevelDetail => format!(
            "Create an image in a {marker} style with {count} distinct objects ({things}) placed across three layers: \
             the first in the foreground at the bottom, the second in the midground, and the rest in the background at the top. \
             Each layer is half the size of the layer in front of it and has its own brightness level, \
             with no horizontal alignment across layers. Use a neutral background and no text."
        ),
        TemplateName::GridLayout => {
            let grid = if objects.len() <= 4 { "2×2" } else { "3×3" };
            format!(
                "Create an image in a {marker} style using a {grid} grid of equal cells with thick, clearly defined borders. \
                 Show {count} distinct objects, one centered in each cell: {things}. \
                 All objects have the same size and prominence, with at least 25% margin around each object inside its cell. \
                 No diagonal, overlapping, or asymmetrical arrangements and no text."
            )
        }
    }
}

/// Parses the template, style and sentence out of a meta-prompt and answers
/// with [`conforming_prompt`]. Objects are the first content words of the sentence.
#[derive(Debug, Default, Clone, Copy)]
pub struct OfflineChatClient;

impl ChatClient for OfflineChatClient {
    fn send(&self, request: &ChatRequest) -> Result<String, ChatError> {
        let system = request
            .messages
            .iter()
            .find(|m| m.role == Role::System)
            .ok_or_else(|| ChatError::Permanent("no system message".into()))?;
        let sentence = request
            .messages
            .iter()
            .find(|m| m.role == Role::User && m.content.starts_with(SENTENCE_HEADER))
            .map(|m| &m.content[SENTENCE_HEADER.len()..])
            .ok_or_else(|| ChatError::Permanent("no sentence message".into()))?;

        let mut template = None;
        let mut style = None;
        for line in system.content.lines() {
            if let Some(rest) = line.strip_prefix(TEMPLATE_HEADER) {
                template = rest
                    .rsplit_once('(')
                    .and_then(|(_, key)| key.strip_suffix(')'))
                    .and_then(|key| key.parse::<TemplateSpec>().ok());
            } else if let Some(rest) = line.strip_prefix(STYLE_HEADER) {
                style = rest.trim().parse::<Style>().ok();
            }
        }
        let template = template.ok_or_else(|| ChatError::Permanent("template header missing".into()))?;
        let style = style.ok_or_else(|| ChatError::Permanent("style header missing".into()))?;
        let (lo, hi) = template.object_range();
        let n = 4u32.clamp(lo, hi) as usize;
        Ok(conforming_prompt(&template, style, &pick_objects(sentence, n)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::templates::validate_prompt;

    #[test]
    fn picks_concrete_words() {
        let objs = pick_objects(
            "Originally, a pie made with any kind of meat and mashed potato was called a cottage pie.",
            4,
        );
        assert_eq!(objs, vec!["pie", "meat", "potato", "cottage"]);
    }

    #[test]
    fn pads_short_sentences() {
        assert_eq!(pick_objects("It is.", 3), vec!["cup", "chair", "book"]);
    }

    #[test]
    fn conforming_prompts_have_no_violations() {
        let objs = pick_objects("Bangui makes textiles, food products, beer, shoes, and soap.", 4);
        for name in TemplateName::ALL {
            for version in [TemplateVersion::V1, TemplateVersion::V2] {
                let spec = TemplateSpec::new(name, version);
                for style in Style::ALL {
                    let prompt = conforming_prompt(&spec, style, &objs);
                    let v = validate_prompt(&prompt, &spec, style);
                    assert!(v.is_empty(), "{spec}/{style}: {v:?}\n{prompt}");
                }
            }
        }
    }
}
