//! Meta-prompt construction for the chat model.

use super::{GeneralConstraints, Message, Style, TemplateSpec};
use crate::corpus::SentencePair;

pub(crate) const TEMPLATE_HEADER: &str = "Template: ";
pub(crate) const STYLE_HEADER: &str = "Style: ";
pub(crate) const SENTENCE_HEADER: &str = "Simplified sentence: ";

/// Build the system and user messages that ask a chat model to turn one
/// simplified sentence into a single image prompt.
///
/// The system message carries the general constraints, every instruction
/// line of `template` verbatim and the style directives; the user message
/// carries only the simplified sentence.
pub fn build_meta_prompt(pair: &SentencePair, template: &TemplateSpec, style: Style) -> Vec<Message> {
    let mut sys = String::new();
    sys.push_str(
        "You write prompts for a text-to-image model. The images illustrate simplified sentences \
         for readers with intellectual disabilities, so they must be clear, concrete and uncluttered.\n",
    );
    sys.push_str(&format!("{TEMPLATE_HEADER}{} ({template})\n", template.name.title()));
    sys.push_str(&format!("{STYLE_HEADER}{}\n", style.name()));

    sys.push_str("\nGeneral accessibility constraints:\n");
    for line in GeneralConstraints::BASELINE.lines() {
        sys.push_str(&format!("- {line}\n"));
    }

    sys.push_str(
        "\nTemplate instructions (where they conflict with the general constraints, \
         the template instructions win):\n",
    );
    for line in template.instruction_lines() {
        sys.push_str(&format!("- {line}\n"));
    }

    let markers = style.keyword_markers();
    sys.push_str("\nStyle directives:\n");
    sys.push_str(&format!("- Render the image in a {}.\n", style.directive()));
    sys.push_str(&format!(
        "- Name the style in the prompt using the phrase \"{}\".\n",
        markers[0]
    ));

    let (lo, hi) = template.object_range();
    sys.push_str("\nYour task:\n");
    sys.push_str(
        "- Read the sentence and decide which objects and relations to depict; \
         show abstract ideas through concrete, everyday objects.\n",
    );
    if lo == hi {
        sys.push_str(&format!("- State the object count in words, e.g. \"{} distinct objects\".\n", number_word(lo)));
    } else {
        sys.push_str(&format!(
            "- State the object count in words ({} to {} distinct objects).\n",
            number_word(lo),
            number_word(hi)
        ));
    }
    if let Some(req) = template.spacing_requirement() {
        sys.push_str(&format!("- Spell out the spacing as a percentage: \"{}\".\n", req.citation));
    }
    if template.requires_plain_background() {
        sys.push_str("- Describe the background explicitly, e.g. \"plain light gray background\".\n");
    }
    if template.requires_numeric_markers() {
        sys.push_str("- Mention the numeric marker (1, 2, 3...) placed near each object.\n");
    } else {
        sys.push_str("- Never ask for writing, captions or labels in the image.\n");
    }
    sys.push_str("- Return only the final image prompt, with no preamble or explanation.\n");

    vec![
        Message::system(sys),
        Message::user(format!("{SENTENCE_HEADER}{}", pair.simplified)),
    ]
}

pub(crate) fn number_word(n: u32) -> String {
    const WORDS: [&str; 11] = [
        "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
    ];
    WORDS.get(n as usize).map(|w| w.to_string()).unwrap_or_else(|| n.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::DatasetSource;
    use crate::templates::{Role, TemplateName, TemplateVersion};

    fn pair() -> SentencePair {
        SentencePair::new(
            "wikipedia_387",
            DatasetSource::Wikipedia,
            "Originally, a pie made with any kind of meat was called a cottage pie.",
            "Originally, a pie made with any kind of meat and mashed potato was called a cottage pie.",
        )
    }

    #[test]
    fn object_focus_v1_carries_background_line() {
        let spec = TemplateSpec::new(TemplateName::BasicObjectFocus, TemplateVersion::V1);
        let msgs = build_meta_prompt(&pair(), &spec, Style::Minimalistic);
        assert_eq!(msgs[0].role, Role::System);
        assert!(msgs[0].content.contains("Background must be uniform and simple"));
        assert_eq!(msgs[1].role, Role::User);
        assert!(msgs[1].content.ends_with("was called a cottage pie."));
    }

    #[test]
    fn grid_layout_carries_margin_line() {
        let spec = TemplateSpec::new(TemplateName::GridLayout, TemplateVersion::V1);
        let sys = &build_meta_prompt(&pair(), &spec, Style::Geometric)[0].content;
        assert!(sys.contains("at least 25% margin around each object"));
        assert!(sys.contains("\"geometric\""));
    }

    #[test]
    fn refined_object_focus_clauses() {
        let sys = &build_meta_prompt(&pair(), &TemplateSpec::production(), Style::Retro)[0].content;
        assert!(sys.contains("exactly four distinct objects"));
        assert!(sys.contains("at least 30% spacing"));
        assert!(sys.contains("10% cap"));
        assert!(sys.contains("which objects and relations to depict"));
        assert!(sys.contains("Return only the final image prompt"));
    }

    #[test]
    fn every_instruction_line_is_embedded_verbatim() {
        for name in TemplateName::ALL {
            for version in [TemplateVersion::V1, TemplateVersion::V2] {
                let spec = TemplateSpec::new(name, version);
                for style in Style::ALL {
                    let sys = &build_meta_prompt(&pair(), &spec, style)[0].content;
                    for line in spec.instruction_lines() {
                        assert!(sys.contains(line), "{spec} / {style}: missing {line}");
                    }
                }
            }
        }
    }
}
