//! Run configuration shared by all pipeline stages.
//!
//! Values come from a config file, then the environment, then command-line
//! flags, each overriding the previous. Secrets are only read from the
//! environment and are never part of this struct.

use serde::{Deserialize, Serialize};

use crate::corpus::{DEFAULT_MAX_TOKENS, DEFAULT_MIN_TOKENS, DEFAULT_PER_SOURCE};
use crate::evalkit::Metric;
use crate::genpipe::ImageSize;
use crate::retry::RetryPolicy;
use crate::scoring::DEFAULT_CLIP_WEIGHT;
use crate::seeded::sha256_hex;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub corpus: CorpusConfig,
    pub prompts: PromptConfig,
    pub generate: GenerateConfig,
    pub scoring: ScoringConfig,
    pub eval: EvalConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusConfig {
    pub sources_dir: Option<String>,
    pub min_tokens: usize,
    pub max_tokens: usize,
    pub per_source: usize,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            sources_dir: None,
            min_tokens: DEFAULT_MIN_TOKENS,
            max_tokens: DEFAULT_MAX_TOKENS,
            per_source: DEFAULT_PER_SOURCE,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PromptConfig {
    pub template: String,
    /// `all` or a comma-separated list of style names.
    pub styles: String,
    pub temperature: f64,
    pub max_tokens: u32,
    pub chat_api_url: Option<String>,
    pub chat_model: String,
    pub max_attempts: u32,
}

impl Default for PromptConfig {
    fn default() -> Self {
        PromptConfig {
            template: "basic_object_focus_v2".into(),
            styles: "all".into(),
            temperature: 0.7,
            max_tokens: 500,
            chat_api_url: None,
            chat_model: "gpt-4".into(),
            max_attempts: RetryPolicy::default().max_attempts,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerateConfig {
    pub concurrency: usize,
    pub image_size: String,
    pub gen_api_url: Option<String>,
    pub gen_model: String,
    pub retry: RetryPolicy,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        GenerateConfig {
            concurrency: 8,
            image_size: ImageSize::default().to_string(),
            gen_api_url: None,
            gen_model: "dall-e-3".into(),
            retry: RetryPolicy::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoringConfig {
    pub scorer_url: Option<String>,
    pub w: f64,
    /// Multiplier applied to composites for display only.
    pub display_scale: f64,
}

impl Default for ScoringConfig {
    fn default() -> Self {
        ScoringConfig { scorer_url: None, w: DEFAULT_CLIP_WEIGHT, display_scale: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub metric: Metric,
    pub experts: Vec<String>,
    pub shared: usize,
    pub unique_per_expert: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            metric: Metric::Interval,
            experts: ["A", "K", "L", "M"].map(String::from).to_vec(),
            shared: 200,
            unique_per_expert: 450,
        }
    }
}

/// Identity of a generation run for checkpoint compatibility: the planned
/// task set, the image model and the image size. Concurrency, retry limits
/// and endpoints may change between a run and its resume.
pub fn generation_digest(plan_digest: &str, gen_model: &str, image_size: ImageSize) -> String {
    let canonical = serde_json::json!({
        "plan": plan_digest,
        "model": gen_model,
        "size": image_size.to_string(),
    });
    sha256_hex(canonical.to_string().as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_json() {
        let c = RunConfig::default();
        let back: RunConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        let partial: RunConfig = serde_json::from_str(r#"{"seed": 9, "generate": {"concurrency": 2}}"#).unwrap();
        assert_eq!(partial.seed, 9);
        assert_eq!(partial.generate.concurrency, 2);
        assert_eq!(partial.generate.retry, RetryPolicy::default());
    }

    #[test]
    fn digest_covers_plan_model_and_size() {
        let size = ImageSize::default();
        let a = generation_digest("p", "m", size);
        assert_eq!(a, generation_digest("p", "m", size));
        assert_ne!(a, generation_digest("q", "m", size));
        assert_ne!(a, generation_digest("p", "m2", size));
        assert_ne!(a, generation_digest("p", "m", ImageSize { width: 512, height: 512 }));
    }
}
