use std::collections::BTreeMap;
use std::path::PathBuf;

use accimg_core::corpus::{
    compute_stats, filter_by_length, load_sources, sample_balanced, write_corpus, DatasetSource, SentencePair,
};
use anyhow::{bail, Result};
use log::{info, warn};

use super::{ensure_parent, would, write_json, Ctx};
use crate::args::{CorpusBuildArgs, CorpusCmd};

pub fn run(ctx: &mut Ctx, cmd: CorpusCmd) -> Result<()> {
    match cmd {
        CorpusCmd::Build(args) => build(ctx, args),
    }
}

fn build(ctx: &mut Ctx, args: CorpusBuildArgs) -> Result<()> {
    let s = &mut ctx.settings;
    let sources = s.value("corpus.sources_dir", args.sources.map(|p| Some(p.display().to_string())), |c| {
        c.corpus.sources_dir.clone()
    });
    let min_tokens = s.value("corpus.min_tokens", args.min_tokens, |c| c.corpus.min_tokens);
    let max_tokens = s.value("corpus.max_tokens", args.max_tokens, |c| c.corpus.max_tokens);
    let per_source = s.value("corpus.per_source", args.per_source, |c| c.corpus.per_source);
    s.log_provenance();
    let Some(sources) = sources.map(PathBuf::from) else {
        bail!("no source directory: pass --sources or set corpus.sources_dir");
    };
    if min_tokens > max_tokens {
        bail!("--min-tokens {min_tokens} exceeds --max-tokens {max_tokens}");
    }

    let mut eligible: BTreeMap<DatasetSource, Vec<SentencePair>> = BTreeMap::new();
    for (source, report) in load_sources(&sources, ctx.seed)? {
        for row in &report.skipped {
            warn!("{source}: line {} skipped: {}", row.line, row.reason);
        }
        let total = report.pairs.len();
        let kept = filter_by_length(report.pairs, min_tokens, max_tokens);
        info!("{source}: {} of {total} pairs within {min_tokens}..={max_tokens} tokens", kept.len());
        eligible.insert(source, kept);
    }
    let corpus = sample_balanced(&eligible, per_source, ctx.seed)?;
    let stats = compute_stats(&corpus)?;

    if ctx.dry_run {
        would(format!("write {} pairs to {}", corpus.len(), args.out.display()));
    } else {
        ensure_parent(&args.out)?;
        write_corpus(&args.out, &corpus)?;
        if let Some(path) = &args.stats {
            write_json(path, &stats)?;
        }
    }
    for (source, n) in &stats.n_per_source {
        println!("{source}\t{n}");
    }
    println!(
        "mean length {:.1} -> {:.1} tokens ({:.1}% shorter)",
        stats.mean_len_original, stats.mean_len_simplified, stats.mean_reduction_pct
    );
    Ok(())
}
