use std::path::Path;

use accimg_core::corpus::read_corpus;
use accimg_core::retry::RetryPolicy;
use accimg_core::templates::{
    parse_style_list, write_bundles, ChatClient, OfflineChatClient, PromptBuilder, PromptOptions, StyleFailure,
    TemplateSpec,
};
use accimg_http::HttpChatClient;
use anyhow::{anyhow, bail, Result};
use serde::Serialize;

use super::{ensure_parent, would, write_json, Ctx};
use crate::args::{ChatProvider, PromptsBuildArgs, PromptsCmd};
use crate::settings::secret;
use crate::Exit;

pub fn run(ctx: &mut Ctx, cmd: PromptsCmd) -> Result<()> {
    match cmd {
        PromptsCmd::Build(args) => build(ctx, args),
    }
}

#[derive(Serialize)]
struct FailureRow<'a> {
    id: &'a str,
    #[serde(flatten)]
    failure: &'a StyleFailure,
}

fn build(ctx: &mut Ctx, args: PromptsBuildArgs) -> Result<()> {
    let s = &mut ctx.settings;
    let template = s.value("prompts.template", args.template, |c| c.prompts.template.clone());
    let styles = s.value("prompts.styles", args.styles, |c| c.prompts.styles.clone());
    let model = s.value("prompts.chat_model", args.model, |c| c.prompts.chat_model.clone());
    let max_attempts = s.value("prompts.max_attempts", args.max_attempts, |c| c.prompts.max_attempts);
    let temperature = s.value("prompts.temperature", None, |c| c.prompts.temperature);
    let max_tokens = s.value("prompts.max_tokens", None, |c| c.prompts.max_tokens);
    let url = match args.provider {
        ChatProvider::Http => s.url("prompts.chat_api_url", args.chat_url, "CHAT_API_URL", |c| {
            c.prompts.chat_api_url.clone()
        }),
        ChatProvider::Offline => None,
    };
    s.log_provenance();

    let template: TemplateSpec = template.parse().map_err(|e: String| Exit::validation(e))?;
    let styles = parse_style_list(&styles).map_err(Exit::validation)?;
    if max_attempts == 0 {
        bail!("--max-attempts must be at least 1");
    }
    let pairs = read_corpus(&args.corpus)?;

    if ctx.dry_run {
        would(format!(
            "request {} prompts ({} sentences x {} styles) under {template} and write {}",
            pairs.len() * styles.len(),
            pairs.len(),
            styles.len(),
            args.out.display()
        ));
        return Ok(());
    }

    let client: Box<dyn ChatClient> = match args.provider {
        ChatProvider::Offline => Box::new(OfflineChatClient),
        ChatProvider::Http => {
            let url = url.ok_or_else(|| anyhow!("no chat endpoint: pass --chat-url or set CHAT_API_URL"))?;
            Box::new(HttpChatClient::new(&url, secret("CHAT_API_KEY"), model))
        }
    };
    let builder = PromptBuilder::new(client.as_ref()).with_options(PromptOptions {
        temperature: temperature as f32,
        max_tokens,
        retry: RetryPolicy { max_attempts, ..RetryPolicy::default() },
        seed: ctx.seed,
    });

    let mut bundles = Vec::with_capacity(pairs.len());
    let mut failures = Vec::new();
    for (index, pair) in pairs.iter().enumerate() {
        let outcome = builder.assemble_bundle(index, pair, &template, &styles)?;
        failures.extend(outcome.failures.into_iter().map(|f| (pair.id.clone(), f)));
        if !outcome.bundle.template_prompts.is_empty() {
            bundles.push(outcome.bundle);
        }
    }
    ensure_parent(&args.out)?;
    write_bundles(&args.out, &bundles)?;
    let prompts: usize = bundles.iter().map(|b| b.template_prompts.len()).sum();
    println!("{prompts} prompts in {} bundles written to {}", bundles.len(), args.out.display());

    if failures.is_empty() {
        return Ok(());
    }
    let path = failures_path(&args.out);
    let rows: Vec<FailureRow> = failures.iter().map(|(id, f)| FailureRow { id, failure: f }).collect();
    write_json(&path, &rows)?;
    let message = format!("{} prompt(s) failed; see {}", failures.len(), path.display());
    if failures.iter().any(|(_, f)| f.provider) {
        Err(Exit::provider(message).into())
    } else {
        Err(Exit::validation(message).into())
    }
}

fn failures_path(out: &Path) -> std::path::PathBuf {
    let mut name = out.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".failures.json");
    out.with_file_name(name)
}
