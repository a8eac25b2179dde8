use std::collections::BTreeMap;
use std::fs;

use accimg_core::evalkit::{
    accessibility_index, alpha_for_dimension, build_report, correlation_report, ingest_annotations,
    join_clip_scores, parse_export, read_records, recall_at_3, style_difficulty, write_records, Dimension,
    IndexKind, IndexWeights, Metric, ReportInputs,
};
use accimg_core::genpipe::AnonymizationMap;
use accimg_core::scoring::read_scores;
use anyhow::{Context, Result};
use serde_json::json;

use super::{ensure_parent, print_json, would, write_json, Ctx};
use crate::args::{AlphaArgs, CorrelateArgs, EvalCmd, IndexArgs, IngestArgs, RecordsArg, ReportArgs};
use crate::Exit;

pub fn run(ctx: &mut Ctx, cmd: EvalCmd) -> Result<()> {
    match cmd {
        EvalCmd::Ingest(args) => ingest(ctx, args),
        EvalCmd::Alpha(args) => alpha(ctx, args),
        EvalCmd::Recall3(args) => recall3(ctx, args),
        EvalCmd::Correlate(args) => correlate(ctx, args),
        EvalCmd::Index(args) => index(ctx, args),
        EvalCmd::Report(args) => report(ctx, args),
    }
}

fn metric(ctx: &mut Ctx, flag: Option<String>) -> Result<Metric> {
    let flag = flag.map(|m| m.parse::<Metric>()).transpose().map_err(Exit::validation)?;
    Ok(ctx.settings.value("eval.metric", flag, |c| c.eval.metric))
}

fn ingest(ctx: &mut Ctx, args: IngestArgs) -> Result<()> {
    ctx.settings.log_provenance();
    let text = fs::read_to_string(&args.export).with_context(|| format!("reading {}", args.export.display()))?;
    let rows = parse_export(&text).map_err(|e| Exit::validation(format!("{}: {e}", args.export.display())))?;
    let map = AnonymizationMap::load(&args.map)?;
    let records = ingest_annotations(&rows, &map)?;
    if ctx.dry_run {
        would(format!("write {} records to {}", records.len(), args.out.display()));
        return Ok(());
    }
    ensure_parent(&args.out)?;
    write_records(&args.out, &records)?;
    println!("{} records written to {}", records.len(), args.out.display());
    Ok(())
}

fn alpha(ctx: &mut Ctx, args: AlphaArgs) -> Result<()> {
    let metric = metric(ctx, args.metric)?;
    ctx.settings.log_provenance();
    let dimension: Dimension = args.dimension.parse().map_err(Exit::validation)?;
    let records = read_records(&args.records.records)?;
    let r = alpha_for_dimension(&records, dimension, metric, args.min_raters)?;
    print_json(&json!({
        "dimension": dimension.key(),
        "metric": metric,
        "min_raters": args.min_raters,
        "alpha": r.alpha,
        "n_items": r.n_items,
        "n_ratings": r.n_ratings,
    }))
}

fn recall3(ctx: &mut Ctx, args: RecordsArg) -> Result<()> {
    ctx.settings.log_provenance();
    let records = read_records(&args.records)?;
    print_json(&json!({
        "recall_at_3": recall_at_3(&records),
        "style_difficulty": style_difficulty(&records),
    }))
}

fn correlate(ctx: &mut Ctx, args: CorrelateArgs) -> Result<()> {
    ctx.settings.log_provenance();
    let records = read_records(&args.records.records)?;
    let scores = read_scores(&args.scores)?;
    let report = correlation_report(&join_clip_scores(&records, &scores)?);
    if args.standardize {
        let row = report.level("per_expert_standardized").expect("report always has a standardized row");
        print_json(&json!({
            "row": row,
            "excluded_from_standardization": report.excluded_from_standardization,
        }))
    } else {
        print_json(&report)
    }
}

fn index(ctx: &mut Ctx, args: IndexArgs) -> Result<()> {
    ctx.settings.log_provenance();
    let kind: IndexKind = args.kind.parse().map_err(Exit::validation)?;
    let records = read_records(&args.records.records)?;
    print_json(&accessibility_index(&records, kind, &IndexWeights::for_kind(kind))?)
}

fn report(ctx: &mut Ctx, args: ReportArgs) -> Result<()> {
    let metric = metric(ctx, args.metric)?;
    ctx.settings.log_provenance();
    let records = read_records(&args.records.records)?;
    let scores = args.scores.as_deref().map(read_scores).transpose()?;
    let assignments: Option<BTreeMap<String, Vec<String>>> = match &args.assignments {
        None => None,
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            Some(serde_json::from_str(&text).map_err(|e| Exit::validation(format!("{}: {e}", path.display())))?)
        }
    };
    let report = build_report(ReportInputs {
        records: &records,
        assignments: assignments.as_ref(),
        clip_scores: scores.as_deref(),
        metric,
    })?;
    if ctx.dry_run {
        would(format!("write the report to {}", args.out.display()));
        return Ok(());
    }
    write_json(&args.out, &report)?;
    for note in &report.notes {
        println!("note: {note}");
    }
    println!("report on {} records written to {}", report.n_records, args.out.display());
    Ok(())
}
