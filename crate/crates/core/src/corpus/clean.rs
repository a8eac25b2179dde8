//! Removal of formatting artifacts from corpus sentences.

use std::sync::OnceLock;

use regex::Regex;

struct Patterns {
    ref_block: Regex,
    lang_template: Regex,
    template: Regex,
    piped_link: Regex,
    plain_link: Regex,
    html_tag: Regex,
    citation: Regex,
    whitespace: Regex,
    space_before_punct: Regex,
}

fn patterns() -> &'static Patterns {
    static PATTERNS: OnceLock<Patterns> = OnceLock::new();
    PATTERNS.get_or_init(|| Patterns {
        ref_block: Regex::new(r"(?is)<ref[^>]*/>|<ref[^>]*>.*?</ref>").unwrap(),
        lang_template: Regex::new(r"\{\{lang\|[^|{}]*\|([^|{}]*)\}\}").unwrap(),
        template: Regex::new(r"\{\{[^{}]*\}\}").unwrap(),
        piped_link: Regex::new(r"\[\[[^\[\]|]*\|([^\[\]]*)\]\]").unwrap(),
        plain_link: Regex::new(r"\[\[([^\[\]]*)\]\]").unwrap(),
        html_tag: Regex::new(r"</?[A-Za-z][^<>]*>").unwrap(),
        citation: Regex::new(r"\[(?:\d+|citation needed|clarification needed)\]").unwrap(),
        whitespace: Regex::new(r"\s+").unwrap(),
        space_before_punct: Regex::new(r" +([,.;:!?)])").unwrap(),
    })
}

/// Strip markup remnants and normalise whitespace.
///
/// Handles wiki links (`[[target|label]]` keeps `label`), `{{templates}}`
/// (`{{lang|xx|text}}` keeps `text`),
/// `<ref>` blocks, HTML tags, numeric citation markers, PTB bracket tokens
/// (`-LRB-`/`-RRB-`) and the common HTML entities. The result has single
/// spaces and no leading or trailing whitespace; it may be empty.
pub fn clean_sentence(raw: &str) -> String {
    let p = patterns();
    let mut s = p.ref_block.replace_all(raw, " ").into_owned();
    s = p.lang_template.replace_all(&s, "$1").into_owned();
    // nested templates unwind one level per pass
    while p.template.is_match(&s) {
        s = p.template.replace_all(&s, " ").into_owned();
    }
    s = p.piped_link.replace_all(&s, "$1").into_owned();
    s = p.plain_link.replace_all(&s, "$1").into_owned();
    s = p.html_tag.replace_all(&s, " ").into_owned();
    s = p.citation.replace_all(&s, "").into_owned();
    s = s
        .replace("-LRB-", "(")
        .replace("-RRB-", ")")
        .replace("-LSB-", "[")
        .replace("-RSB-", "]")
        .replace("&nbsp;", " ")
        .replace("&quot;", "\"")
        .replace("&#39;", "'")
        .replace("&apos;", "'")
        .replace("&lt;", "<")
        .replace("&gt;", ">")
        .replace("&amp;", "&");
    let s = p.whitespace.replace_all(&s, " ");
    let s = p.space_before_punct.replace_all(s.trim(), "$1");
    s.replace("( ", "(").trim().to_string()
}

/// Whitespace token count after trimming; `count_tokens("") == 0`.
pub fn count_tokens(text: &str) -> usize {
    text.split_whitespace().count()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn collapses_whitespace() {
        assert_eq!(clean_sentence("  a  b\t\tc \n"), "a b c");
    }

    #[test]
    fn wiki_markup() {
        assert_eq!(
            clean_sentence("The [[Odyssey (poem)|Odyssey]] is a {{lang|grc|poem}} by [[Homer]].[1]"),
            "The Odyssey is a poem by Homer."
        );
    }

    #[test]
    fn ptb_brackets_and_entities() {
        assert_eq!(
            clean_sentence("Paris -LRB- France -RRB- is big &amp; old ."),
            "Paris (France) is big & old."
        );
    }

    #[test]
    fn ref_blocks_and_tags() {
        assert_eq!(
            clean_sentence("It rains<ref name=\"a\">Smith 2001</ref> a <b>lot</b>."),
            "It rains a lot."
        );
    }

    #[test]
    fn markup_only_becomes_empty() {
        assert_eq!(clean_sentence("{{stub}} <br/> [1]"), "");
    }

    #[test]
    fn token_counts() {
        assert_eq!(count_tokens(""), 0);
        assert_eq!(count_tokens("   "), 0);
        assert_eq!(count_tokens(" one two  three "), 3);
    }
}
