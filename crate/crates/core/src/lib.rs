//! Building blocks for turning sentence-level text simplifications into
//! accessibility-constrained images and evaluating the results.
//!
//! The crate is organised along the pipeline:
//!
//! * [`corpus`] ingests parallel simplification corpora and samples a balanced set.
//! * [`templates`] holds the prompt templates and visual styles, builds
//!   meta-prompts for a chat model and lints the prompts it returns.
//! * [`genpipe`] plans and runs the prompt-to-image batch with retries,
//!   checkpointing and anonymisation for annotation.
//! * [`scoring`] computes CLIPScore through a pluggable embedding backend and
//!   ranks templates with a weighted composite.
//! * [`evalkit`] computes agreement, recall, correlation and index statistics
//!   from expert annotation exports.
//!
//! Network-backed clients live in a separate crate; everything here is
//! hermetic and driven through the client traits.

pub mod config;
pub mod corpus;
pub mod evalkit;
pub mod genpipe;
pub mod retry;
pub mod scoring;
pub mod seeded;
pub mod templates;

pub use corpus::{DatasetSource, SentencePair};
pub use templates::{Style, TemplateName, TemplateVersion};
