//! Prompt generation against a chat client and per-sentence bundles.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::sync::Arc;

use log::{debug, warn};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{
    build_meta_prompt, validate_prompt, ChatClient, ChatError, ChatRequest, Message, Style, TemplateSpec,
    Violation,
};
use crate::corpus::{DatasetSource, SentencePair};
use crate::retry::{RetryPolicy, Sleeper, ThreadSleeper};

#[derive(Debug, Error)]
pub enum PromptError {
    #[error(transparent)]
    Client(#[from] ChatError),
    #[error("prompt still violates {} rule(s) after repair: {}", .violations.len(), summarize(.violations))]
    ValidationFailed { prompt: String, violations: Vec<Violation> },
    #[error("style list must be non-empty and free of duplicates")]
    InvalidStyles,
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: String, message: String },
}

fn summarize(v: &[Violation]) -> String {
    v.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StylePrompt {
    pub style: Style,
    pub prompt: String,
}

/// One sentence's style-specific prompts under one template. Field order is
/// the on-disk key order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub index: usize,
    pub id: String,
    pub simplified_text: String,
    pub dataset_source: DatasetSource,
    pub template: TemplateSpec,
    pub template_prompts: Vec<StylePrompt>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StyleFailure {
    pub style: Style,
    pub error: String,
    /// The chat provider failed rather than the prompt checks.
    #[serde(default)]
    pub provider: bool,
}

#[derive(Debug, Clone)]
pub struct BundleOutcome {
    pub bundle: PromptBundle,
    pub failures: Vec<StyleFailure>,
}

impl BundleOutcome {
    pub fn is_partial(&self) -> bool {
        !self.failures.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PromptOptions {
    pub temperature: f32,
    pub max_tokens: u32,
    /// Applies to transient chat errors only.
    pub retry: RetryPolicy,
    pub seed: u64,
}

impl Default for PromptOptions {
    fn default() -> Self {
        PromptOptions {
            temperature: 0.7,
            max_tokens: 500,
            retry: RetryPolicy::default(),
            seed: 0,
        }
    }
}

/// Drives a [`ChatClient`] to produce validated prompts.
pub struct PromptBuilder<'a> {
    client: &'a dyn ChatClient,
    options: PromptOptions,
    sleeper: Arc<dyn Sleeper>,
}

impl<'a> PromptBuilder<'a> {
    pub fn new(client: &'a dyn ChatClient) -> Self {
        PromptBuilder {
            client,
            options: PromptOptions::default(),
            sleeper: Arc::new(ThreadSleeper),
        }
    }

    pub fn with_options(mut self, options: PromptOptions) -> Self {
        self.options = options;
        self
    }

    pub fn with_sleeper(mut self, sleeper: Arc<dyn Sleeper>) -> Self {
        self.sleeper = sleeper;
        self
    }

    fn send(&self, messages: &[Message], key: &str) -> Result<String, ChatError> {
        let request = ChatRequest {
            messages: messages.to_vec(),
            temperature: self.options.temperature,
            max_tokens: self.options.max_tokens,
        };
        let mut backoff = self.options.retry.backoff(self.options.seed, key);
        let mut attempt = 1;
        loop {
            match self.client.send(&request) {
                Ok(text) => return Ok(text.trim().to_string()),
                Err(ChatError::Transient(reason)) if attempt < self.options.retry.max_attempts => {
                    let delay = backoff.next_delay();
                    debug!("chat attempt {attempt} for {key} failed ({reason}); retrying in {delay:?}");
                    self.sleeper.sleep(delay);
                    attempt += 1;
                }
                Err(e) => return Err(e),
            }
        }
    }

    /// Ask the chat model for one image prompt. When the reply breaks a hard
    /// rule the model gets one repair round with the violations listed.
    pub fn generate_prompt(
        &self,
        pair: &SentencePair,
        template: &TemplateSpec,
        style: Style,
    ) -> Result<String, PromptError> {
        let key = format!("{}/{}/{}", pair.id, template, style.key());
        let mut messages = build_meta_prompt(pair, template, style);
        let first = self.send(&messages, &key)?;
        let hard: Vec<Violation> = validate_prompt(&first, template, style)
            .into_iter()
            .filter(Violation::is_hard)
            .collect();
        if hard.is_empty() {
            return Ok(first);
        }

        debug!("{key}: repairing {} violation(s)", hard.len());
        let mut feedback = String::from("The prompt breaks these requirements:\n");
        for v in &hard {
            feedback.push_str(&format!("- {}: {}\n", v.rule, v.excerpt));
        }
        feedback.push_str("Rewrite it so that it meets all of them and return only the corrected prompt.");
        messages.push(Message::assistant(first));
        messages.push(Message::user(feedback));

        let second = self.send(&messages, &key)?;
        let hard: Vec<Violation> = validate_prompt(&second, template, style)
            .into_iter()
            .filter(Violation::is_hard)
            .collect();
        if hard.is_empty() {
            Ok(second)
        } else {
            Err(PromptError::ValidationFailed { prompt: second, violations: hard })
        }
    }

    /// Generate one prompt per style. Styles that fail are reported in the
    /// outcome and left out of the bundle.
    pub fn assemble_bundle(
        &self,
        index: usize,
        pair: &SentencePair,
        template: &TemplateSpec,
        styles: &[Style],
    ) -> Result<BundleOutcome, PromptError> {
        if styles.is_empty() || (1..styles.len()).any(|i| styles[..i].contains(&styles[i])) {
            return Err(PromptError::InvalidStyles);
        }
        let mut template_prompts = Vec::with_capacity(styles.len());
        let mut failures = Vec::new();
        for &style in styles {
            match self.generate_prompt(pair, template, style) {
                Ok(prompt) => template_prompts.push(StylePrompt { style, prompt }),
                Err(e) => {
                    warn!("{} / {}: {e}", pair.id, style);
                    failures.push(StyleFailure {
                        style,
                        error: e.to_string(),
                        provider: matches!(e, PromptError::Client(_)),
                    });
                }
            }
        }
        Ok(BundleOutcome {
            bundle: PromptBundle {
                index,
                id: pair.id.clone(),
                simplified_text: pair.simplified.clone(),
                dataset_source: pair.dataset_source,
                template: *template,
                template_prompts,
            },
            failures,
        })
    }
}

pub fn write_bundles(path: &Path, bundles: &[PromptBundle]) -> Result<(), PromptError> {
    let file_err = |source| PromptError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut w = BufWriter::new(fs::File::create(path).map_err(file_err)?);
    for b in bundles {
        let line = serde_json::to_string(b).expect("bundle serializes");
        writeln!(w, "{line}").map_err(file_err)?;
    }
    w.flush().map_err(file_err)
}

pub fn read_bundles(path: &Path) -> Result<Vec<PromptBundle>, PromptError> {
    let io_err = |source| PromptError::Io {
        path: path.display().to_string(),
        source,
    };
    let file = fs::File::open(path).map_err(io_err)?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let b = serde_json::from_str(&line).map_err(|e| PromptError::Format {
            path: path.display().to_string(),
            message: format!("line {}: {e}", i + 1),
        })?;
        out.push(b);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::retry::RecordingSleeper;
    use crate::templates::{conforming_prompt, OfflineChatClient, Role, ScriptedChatClient, TemplateName, TemplateVersion};

    fn pair() -> SentencePair {
        SentencePair::new(
            "wikipedia_387",
            DatasetSource::Wikipedia,
            "Originally, a pie made with any kind of meat was called a cottage pie.",
            "Originally, a pie made with any kind of meat and mashed potato was called a cottage pie.",
        )
    }

    fn objects() -> Vec<String> {
        ["pie", "meat", "potato", "cottage"].map(String::from).to_vec()
    }

    #[test]
    fn conforming_reply_is_returned_trimmed() {
        let spec = TemplateSpec::production();
        let good = conforming_prompt(&spec, Style::Retro, &objects());
        let client = ScriptedChatClient::from_texts([format!("  {good}\n")]);
        let out = PromptBuilder::new(&client).generate_prompt(&pair(), &spec, Style::Retro).unwrap();
        assert_eq!(out, good);
        let reqs = client.requests();
        assert_eq!(reqs.len(), 1);
        assert_eq!(reqs[0].temperature, 0.7);
        assert_eq!(reqs[0].max_tokens, 500);
    }

    #[test]
    fn missing_style_keyword_gets_one_repair_round() {
        let spec = TemplateSpec::production();
        let bad = conforming_prompt(&spec, Style::Retro, &objects()).replace("retro", "plain");
        let client = ScriptedChatClient::from_texts([bad.clone(), bad.clone()]);
        let err = PromptBuilder::new(&client)
            .generate_prompt(&pair(), &spec, Style::Retro)
            .unwrap_err();
        match err {
            PromptError::ValidationFailed { violations, .. } => {
                assert_eq!(violations.len(), 1);
                assert_eq!(violations[0].rule, crate::templates::Rule::StyleKeyword);
            }
            other => panic!("unexpected {other:?}"),
        }
        let reqs = client.requests();
        assert_eq!(reqs.len(), 2);
        let repair = &reqs[1].messages;
        assert_eq!(repair.len(), 4);
        assert_eq!(repair[2].role, Role::Assistant);
        assert_eq!(repair[2].content, bad);
        assert!(repair[3].content.contains("style keyword"));
    }

    #[test]
    fn repair_round_can_succeed() {
        let spec = TemplateSpec::new(TemplateName::GridLayout, TemplateVersion::V1);
        let good = conforming_prompt(&spec, Style::Cartoon, &objects());
        let bad = good.replace("25%", "5%");
        let client = ScriptedChatClient::from_texts([bad, good.clone()]);
        let out = PromptBuilder::new(&client).generate_prompt(&pair(), &spec, Style::Cartoon).unwrap();
        assert_eq!(out, good);
    }

    #[test]
    fn transient_errors_are_retried_permanent_are_not() {
        let spec = TemplateSpec::production();
        let good = conforming_prompt(&spec, Style::Retro, &objects());
        let client = ScriptedChatClient::new([
            Err(ChatError::Transient("429".into())),
            Err(ChatError::Transient("503".into())),
            Ok(good.clone()),
        ]);
        let sleeper = Arc::new(RecordingSleeper::default());
        let out = PromptBuilder::new(&client)
            .with_sleeper(sleeper.clone())
            .generate_prompt(&pair(), &spec, Style::Retro)
            .unwrap();
        assert_eq!(out, good);
        assert_eq!(sleeper.delays.lock().unwrap().len(), 2);

        let client = ScriptedChatClient::new([Err(ChatError::Permanent("401".into()))]);
        let err = PromptBuilder::new(&client).generate_prompt(&pair(), &spec, Style::Retro).unwrap_err();
        assert!(matches!(err, PromptError::Client(ChatError::Permanent(_))));
        assert_eq!(client.requests().len(), 1);
    }

    #[test]
    fn bundle_with_all_styles() {
        let out = PromptBuilder::new(&OfflineChatClient)
            .assemble_bundle(71, &pair(), &TemplateSpec::production(), &Style::ALL)
            .unwrap();
        assert!(!out.is_partial());
        assert_eq!(out.bundle.template_prompts.len(), 10);
        let single = PromptBuilder::new(&OfflineChatClient)
            .assemble_bundle(0, &pair(), &TemplateSpec::production(), &[Style::Technical])
            .unwrap();
        assert_eq!(single.bundle.template_prompts.len(), 1);
    }

    #[test]
    fn bundle_rejects_bad_style_lists() {
        let b = PromptBuilder::new(&OfflineChatClient);
        let spec = TemplateSpec::production();
        assert!(matches!(b.assemble_bundle(0, &pair(), &spec, &[]), Err(PromptError::InvalidStyles)));
        assert!(matches!(
            b.assemble_bundle(0, &pair(), &spec, &[Style::Retro, Style::Retro]),
            Err(PromptError::InvalidStyles)
        ));
    }

    #[test]
    fn failing_style_marks_bundle_partial() {
        let spec = TemplateSpec::production();
        let good = conforming_prompt(&spec, Style::Cartoon, &objects());
        let client = ScriptedChatClient::new([Ok(good), Err(ChatError::Permanent("moderated".into()))]);
        let out = PromptBuilder::new(&client)
            .assemble_bundle(3, &pair(), &spec, &[Style::Cartoon, Style::Retro])
            .unwrap();
        assert!(out.is_partial());
        assert_eq!(out.bundle.template_prompts.len(), 1);
        assert_eq!(out.failures[0].style, Style::Retro);
    }

    #[test]
    fn bundle_key_order() {
        let out = PromptBuilder::new(&OfflineChatClient)
            .assemble_bundle(71, &pair(), &TemplateSpec::production(), &[Style::Retro])
            .unwrap();
        let json = serde_json::to_string(&out.bundle).unwrap();
        let keys = ["\"index\"", "\"id\"", "\"simplified_text\"", "\"dataset_source\"", "\"template\"", "\"template_prompts\""];
        let pos: Vec<usize> = keys.iter().map(|k| json.find(k).unwrap()).collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]), "{json}");
        assert!(json.contains("\"style\":\"Retro\""));
    }
}
