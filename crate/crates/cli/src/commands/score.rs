use accimg_core::scoring::{
    component_stats, rank_templates, read_scores, score_bundles, score_table, write_scores, CompositeWeights,
    EmbeddingBackend, HashingBackend, MuNormalization,
};
use accimg_core::templates::read_bundles;
use accimg_http::ClipdBackend;
use anyhow::{anyhow, Result};
use log::warn;

use super::{ensure_parent, would, write_json, Ctx};
use crate::args::{EmbeddingProvider, Normalization, ScoreClipArgs, ScoreCmd, ScoreCompositeArgs};
use crate::Exit;

pub fn run(ctx: &mut Ctx, cmd: ScoreCmd) -> Result<()> {
    match cmd {
        ScoreCmd::Clip(args) => clip(ctx, args),
        ScoreCmd::Composite(args) => rank(ctx, args),
    }
}

fn clip(ctx: &mut Ctx, args: ScoreClipArgs) -> Result<()> {
    let s = &mut ctx.settings;
    let w = s.value("scoring.w", args.w, |c| c.scoring.w);
    let url = match args.backend {
        EmbeddingProvider::Http => s.url("scoring.scorer_url", args.backend_url, "SCORER_URL", |c| {
            c.scoring.scorer_url.clone()
        }),
        EmbeddingProvider::Hashing => None,
    };
    s.log_provenance();
    if !(w.is_finite() && w > 0.0) {
        return Err(Exit::validation(format!("--w must be positive, got {w}")).into());
    }

    let bundles = read_bundles(&args.bundles)?;
    if ctx.dry_run {
        let n: usize = bundles.iter().map(|b| b.template_prompts.len()).sum();
        would(format!("score up to {n} images under {} into {}", args.images.display(), args.out.display()));
        return Ok(());
    }
    let backend: Box<dyn EmbeddingBackend> = match args.backend {
        EmbeddingProvider::Hashing => Box::new(HashingBackend::new(256)),
        EmbeddingProvider::Http => {
            let url = url.ok_or_else(|| anyhow!("no embedding service: pass --backend-url or set SCORER_URL"))?;
            Box::new(ClipdBackend::connect(&url)?)
        }
    };
    let run = score_bundles(&bundles, &args.images, backend.as_ref(), w)?;
    for (item, style, template) in &run.missing {
        warn!("no image for {item} / {style} ({template})");
    }
    ensure_parent(&args.out)?;
    write_scores(&args.out, &run.records)?;
    let mean = if run.records.is_empty() {
        0.0
    } else {
        run.records.iter().map(|r| r.score).sum::<f64>() / run.records.len() as f64
    };
    println!(
        "{} images scored with {} (mean {mean:.4}), {} missing",
        run.records.len(),
        backend.model_id(),
        run.missing.len()
    );
    Ok(())
}

fn rank(ctx: &mut Ctx, args: ScoreCompositeArgs) -> Result<()> {
    let s = &mut ctx.settings;
    let display_scale = s.value("scoring.display_scale", args.display_scale, |c| c.scoring.display_scale);
    let w = s.value("scoring.w", None, |c| c.scoring.w);
    s.log_provenance();

    let mut records = Vec::new();
    for path in &args.scores {
        records.extend(read_scores(path)?);
    }
    let norm = match args.normalization {
        Normalization::MinMax => MuNormalization::MinMax,
        Normalization::Raw => MuNormalization::Raw { ceiling: w },
    };
    let components = component_stats(&score_table(&records), norm)?;
    let ranking = rank_templates(&components, &CompositeWeights::default(), display_scale)?;
    if ctx.dry_run {
        would(format!("write a ranking of {} templates to {}", ranking.templates.len(), args.out.display()));
    } else {
        write_json(&args.out, &ranking)?;
    }
    println!("rank\ttemplate\tmu\tC\tS\tB\tW\tcomposite");
    for t in &ranking.templates {
        let c = &t.components;
        println!(
            "{}\t{}\t{:.3}\t{:.3}\t{:.3}\t{:.3}\t{:.3}\t{:.4}",
            t.rank, c.template, c.mu, c.c, c.s, c.b, c.w, t.display
        );
    }
    Ok(())
}
