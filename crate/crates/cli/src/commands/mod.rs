mod corpus;
mod eval;
mod generate;
mod prompts;
mod score;

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

use crate::args::{Cli, Command};
use crate::settings::Settings;

/// State shared by every subcommand.
pub struct Ctx {
    pub settings: Settings,
    pub seed: u64,
    pub dry_run: bool,
}

pub fn dispatch(cli: Cli) -> Result<()> {
    let mut settings = Settings::load(cli.config.as_deref())?;
    let seed = settings.value("seed", cli.seed, |c| c.seed);
    let mut ctx = Ctx { settings, seed, dry_run: cli.dry_run };
    match cli.command {
        Command::Corpus(cmd) => corpus::run(&mut ctx, cmd),
        Command::Prompts(cmd) => prompts::run(&mut ctx, cmd),
        Command::Generate(cmd) => generate::run(&mut ctx, cmd),
        Command::Anonymize(args) => generate::anonymize(&mut ctx, args),
        Command::Assign(args) => generate::assign(&mut ctx, args),
        Command::Score(cmd) => score::run(&mut ctx, cmd),
        Command::Eval(cmd) => eval::run(&mut ctx, cmd),
    }
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    ensure_parent(path)?;
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

pub fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

/// Announce a skipped side effect under `--dry-run`.
pub fn would(what: impl std::fmt::Display) {
    println!("dry run: would {what}");
}
