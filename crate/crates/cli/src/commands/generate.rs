use std::collections::BTreeMap;

use accimg_core::config::generation_digest;
use accimg_core::genpipe::{
    anonymize as anonymize_dir, anonymize_names, plan_digest, plan_tasks, split_assignments, AnonymizationMap,
    Checkpoint, DirStore, ImageClient, ImageSize, MockImageClient, RunOptions, Runner,
};
use accimg_core::retry::RetryPolicy;
use accimg_core::templates::read_bundles;
use accimg_http::HttpImageClient;
use anyhow::{anyhow, bail, Context, Result};
use log::info;

use super::{ensure_parent, would, write_json, Ctx};
use crate::args::{AnonymizeArgs, AssignArgs, GenerateArgs, GenerateCmd, ImageProvider};
use crate::settings::secret;
use crate::Exit;

pub fn run(ctx: &mut Ctx, cmd: GenerateCmd) -> Result<()> {
    match cmd {
        GenerateCmd::Run(args) => generate(ctx, args, false),
        GenerateCmd::Resume(args) => generate(ctx, args, true),
    }
}

fn generate(ctx: &mut Ctx, args: GenerateArgs, resume: bool) -> Result<()> {
    let s = &mut ctx.settings;
    let concurrency = s.value("generate.concurrency", args.concurrency, |c| c.generate.concurrency);
    let max_attempts = s.value("generate.retry.max_attempts", args.max_attempts, |c| c.generate.retry.max_attempts);
    let image_size = s.value("generate.image_size", args.image_size, |c| c.generate.image_size.clone());
    let model = s.value("generate.gen_model", args.model, |c| c.generate.gen_model.clone());
    let url = match args.provider {
        ImageProvider::Http => {
            s.url("generate.gen_api_url", args.gen_url, "GEN_API_URL", |c| c.generate.gen_api_url.clone())
        }
        ImageProvider::Mock => None,
    };
    s.log_provenance();
    let retry = RetryPolicy { max_attempts, ..s.file.generate.retry };

    if concurrency == 0 || max_attempts == 0 {
        bail!("--concurrency and --max-attempts must be at least 1");
    }
    let image_size: ImageSize = image_size.parse().map_err(Exit::validation)?;
    if resume && !args.checkpoint.is_file() {
        bail!("nothing to resume: {} does not exist", args.checkpoint.display());
    }
    let bundles = read_bundles(&args.bundles)?;
    let tasks = plan_tasks(&bundles)?;
    let digest = generation_digest(&plan_digest(&tasks), &model, image_size);

    if ctx.dry_run {
        let done = if args.checkpoint.is_file() {
            let ck = Checkpoint::load(&args.checkpoint)?;
            if ck.config_digest != digest {
                return Err(Exit::validation(format!(
                    "checkpoint {} belongs to a different run configuration",
                    args.checkpoint.display()
                ))
                .into());
            }
            ck.completed.values().filter(|e| e.status.is_terminal()).count()
        } else {
            0
        };
        would(format!(
            "generate up to {} of {} images into {} ({done} already recorded in {})",
            tasks.len().saturating_sub(done),
            tasks.len(),
            args.out.display(),
            args.checkpoint.display()
        ));
        return Ok(());
    }

    let client: Box<dyn ImageClient> = match args.provider {
        ImageProvider::Mock => Box::new(MockImageClient::new().blocking(args.block_token.clone())),
        ImageProvider::Http => {
            let url = url.ok_or_else(|| anyhow!("no image endpoint: pass --gen-url or set GEN_API_URL"))?;
            Box::new(HttpImageClient::new(&url, secret("GEN_API_KEY"), model))
        }
    };
    let store = DirStore::new(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let options = RunOptions { concurrency, retry, image_size, seed: ctx.seed, stop_after: None };
    ensure_parent(&args.checkpoint)?;
    let report = Runner::new(client.as_ref(), &store, options).run(tasks, &args.checkpoint, &digest)?;

    let report_path = args.report.unwrap_or_else(|| args.out.join("run_report.json"));
    write_json(&report_path, &report)?;
    println!(
        "{} tasks: {} succeeded, {} blocked, {} failed, {} pending ({} resumed, {} provider calls)",
        report.total,
        report.succeeded,
        report.blocked,
        report.failed,
        report.pending,
        report.resumed,
        report.provider_calls
    );
    for b in &report.moderation_log {
        info!("blocked {} / {}: {}", b.item_id, b.style, b.reason);
    }
    if report.pending > 0 || report.failed > 0 {
        return Err(Exit::provider(format!(
            "{} task(s) pending and {} failed; run `generate resume` once the provider is reachable",
            report.pending, report.failed
        ))
        .into());
    }
    Ok(())
}

pub fn anonymize(ctx: &mut Ctx, args: AnonymizeArgs) -> Result<()> {
    ctx.settings.log_provenance();
    if ctx.dry_run {
        let mut names = Vec::new();
        for entry in std::fs::read_dir(&args.input).with_context(|| format!("reading {}", args.input.display()))? {
            let name = entry?.file_name().to_string_lossy().into_owned();
            if name.ends_with(".png") {
                names.push(name);
            }
        }
        let map = anonymize_names(&names, ctx.seed)?;
        would(format!(
            "copy {} images to {} and write {}",
            map.len(),
            args.out.display(),
            args.map.display()
        ));
        return Ok(());
    }
    let map = anonymize_dir(&args.input, &args.out, ctx.seed)?;
    map.save(&args.map)?;
    println!("{} images anonymised into {}", map.len(), args.out.display());
    Ok(())
}

pub fn assign(ctx: &mut Ctx, args: AssignArgs) -> Result<()> {
    let s = &mut ctx.settings;
    let experts = s.value("eval.experts", args.experts, |c| c.eval.experts.clone());
    let shared = s.value("eval.shared", args.shared, |c| c.eval.shared);
    let unique = s.value("eval.unique_per_expert", args.unique_per_expert, |c| c.eval.unique_per_expert);
    s.log_provenance();

    let map = AnonymizationMap::load(&args.map)?;
    let ids: Vec<&String> = map.entries.keys().collect();
    let split: BTreeMap<String, Vec<String>> = split_assignments(&ids, &experts, shared, unique, ctx.seed)?;
    if ctx.dry_run {
        would(format!("write assignments for {} experts to {}", split.len(), args.out.display()));
        return Ok(());
    }
    write_json(&args.out, &split)?;
    for (expert, ids) in &split {
        println!("{expert}\t{}", ids.len());
    }
    Ok(())
}
