//! `accimg`: corpus building, prompt generation, image generation, scoring
//! and annotation statistics from one binary.
//!
//! Exit codes: 0 success, 1 usage or I/O error, 2 validation failure,
//! 3 provider or backend failure.

mod args;
mod commands;
mod settings;

use std::fmt;
use std::io;
use std::process::ExitCode;

use accimg_core::corpus::CorpusError;
use accimg_core::evalkit::EvalError;
use accimg_core::genpipe::{GenPipeError, GenerateError};
use accimg_core::scoring::ScoringError;
use accimg_core::templates::{ChatError, PromptError};
use clap::Parser;

use args::Cli;

pub const EXIT_USAGE: u8 = 1;
pub const EXIT_VALIDATION: u8 = 2;
pub const EXIT_PROVIDER: u8 = 3;

/// An error that already knows its exit code.
#[derive(Debug)]
pub struct Exit {
    pub code: u8,
    pub message: String,
}

impl Exit {
    pub fn validation(message: impl Into<String>) -> Exit {
        Exit { code: EXIT_VALIDATION, message: message.into() }
    }

    pub fn provider(message: impl Into<String>) -> Exit {
        Exit { code: EXIT_PROVIDER, message: message.into() }
    }
}

impl fmt::Display for Exit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Exit {}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Exit>() {
            return e.code;
        }
        if let Some(e) = cause.downcast_ref::<CorpusError>() {
            return match e {
                CorpusError::Io { .. } => EXIT_USAGE,
                _ => EXIT_VALIDATION,
            };
        }
        if let Some(e) = cause.downcast_ref::<PromptError>() {
            return match e {
                PromptError::Client(_) => EXIT_PROVIDER,
                PromptError::Io { .. } => EXIT_USAGE,
                _ => EXIT_VALIDATION,
            };
        }
        if cause.is::<ChatError>() || cause.is::<GenerateError>() {
            return EXIT_PROVIDER;
        }
        if let Some(e) = cause.downcast_ref::<GenPipeError>() {
            return match e {
                GenPipeError::Io { .. } | GenPipeError::CheckpointIo { .. } | GenPipeError::Storage { .. } => {
                    EXIT_USAGE
                }
                _ => EXIT_VALIDATION,
            };
        }
        if let Some(e) = cause.downcast_ref::<ScoringError>() {
            return match e {
                ScoringError::Backend(_) | ScoringError::DimensionMismatch { .. } => EXIT_PROVIDER,
                ScoringError::Io { .. } => EXIT_USAGE,
                _ => EXIT_VALIDATION,
            };
        }
        if let Some(e) = cause.downcast_ref::<EvalError>() {
            return match e {
                EvalError::Io { .. } => EXIT_USAGE,
                _ => EXIT_VALIDATION,
            };
        }
        if cause.is::<io::Error>() {
            return EXIT_USAGE;
        }
    }
    EXIT_USAGE
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_USAGE) } else { ExitCode::SUCCESS };
        }
    };

    let level = match (cli.quiet, cli.verbose) {
        (true, _) => log::LevelFilter::Warn,
        (false, 0) => log::LevelFilter::Info,
        (false, 1) => log::LevelFilter::Debug,
        (false, _) => log::LevelFilter::Trace,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();

    match commands::dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", message(&err));
            ExitCode::from(exit_code(&err))
        }
    }
}

/// The error chain joined with ": ", skipping causes whose text the
/// previous message already includes.
fn message(err: &anyhow::Error) -> String {
    let mut out = err.to_string();
    let mut last = out.clone();
    for cause in err.chain().skip(1) {
        let text = cause.to_string();
        if !last.contains(&text) {
            out.push_str(": ");
            out.push_str(&text);
        }
        last = text;
    }
    out
}
