use std::fs;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn fixture_sources() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/sources")
}

fn accimg(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_accimg"))
        .current_dir(dir)
        .args(args)
        .env_remove("RUST_LOG")
        .env_remove("CHAT_API_URL")
        .env_remove("GEN_API_URL")
        .env_remove("SCORER_URL")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

/// A local port with nothing listening on it.
fn dead_url() -> String {
    let l = TcpListener::bind("127.0.0.1:0").unwrap();
    let port = l.local_addr().unwrap().port();
    drop(l);
    format!("http://127.0.0.1:{port}")
}

fn jsonl(path: &Path) -> Vec<Value> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect()
}

fn build_corpus(dir: &Path, per_source: &str) -> Output {
    let sources = fixture_sources();
    accimg(
        dir,
        &["-q", "corpus", "build", "--sources", sources.to_str().unwrap(), "--per-source", per_source, "--seed", "7", "--out", "corpus.jsonl"],
    )
}

#[test]
fn corpus_build_on_fixture_is_balanced() {
    let dir = tempfile::tempdir().unwrap();
    let out = build_corpus(dir.path(), "4");
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let rows = jsonl(&dir.path().join("corpus.jsonl"));
    assert_eq!(rows.len(), 16);
    for source in ["ASSET", "OneStopEnglish", "SimPA", "Wikipedia"] {
        assert_eq!(rows.iter().filter(|r| r["dataset"] == source).count(), 4, "{source}");
    }
    for r in &rows {
        let n = r["length_simplified"].as_u64().unwrap();
        assert!((10..=55).contains(&n), "{r}");
    }

    let first = fs::read(dir.path().join("corpus.jsonl")).unwrap();
    assert_eq!(code(&build_corpus(dir.path(), "4")), 0);
    assert_eq!(fs::read(dir.path().join("corpus.jsonl")).unwrap(), first, "rerun must be byte-identical");
}

#[test]
fn corpus_underflow_is_a_validation_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = build_corpus(dir.path(), "5");
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("OneStopEnglish"), "{}", stderr(&out));
    assert!(!dir.path().join("corpus.jsonl").exists());
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = accimg(dir.path(), &["corpus", "build", "--bogus"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("Usage"), "{}", stderr(&out));

    let out = accimg(dir.path(), &["--help"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("generate"));
}

#[test]
fn unreachable_provider_exits_3_with_empty_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&build_corpus(d, "1")), 0);
    let out = accimg(d, &["-q", "prompts", "build", "--corpus", "corpus.jsonl", "--provider", "offline", "--styles", "retro,cartoon", "--out", "bundles.jsonl"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));

    let url = dead_url();
    let out = accimg(
        d,
        &["-q", "generate", "run", "--bundles", "bundles.jsonl", "--out", "images", "--checkpoint", "ck.log", "--gen-url", &url, "--max-attempts", "1"],
    );
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    let ck = fs::read_to_string(d.join("ck.log")).unwrap();
    let lines: Vec<&str> = ck.lines().collect();
    assert_eq!(lines.len(), 1, "header only: {ck}");
    assert!(lines[0].contains("config_digest"));
    let report: Value = serde_json::from_str(&fs::read_to_string(d.join("images/run_report.json")).unwrap()).unwrap();
    assert_eq!(report["pending"], 8);
    assert_eq!(report["succeeded"], 0);
}

#[test]
fn chat_endpoint_from_environment_and_missing_endpoint() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&build_corpus(d, "1")), 0);

    let out = accimg(d, &["prompts", "build", "--corpus", "corpus.jsonl", "--styles", "retro", "--out", "b.jsonl"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("CHAT_API_URL"));

    let out = Command::new(env!("CARGO_BIN_EXE_accimg"))
        .current_dir(d)
        .args(["prompts", "build", "--corpus", "corpus.jsonl", "--styles", "retro", "--max-attempts", "1", "--out", "b.jsonl"])
        .env("CHAT_API_URL", dead_url())
        .env("CHAT_API_KEY", "sk-test-secret")
        .output()
        .unwrap();
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    let log = stderr(&out);
    assert!(log.contains("prompts.chat_api_url") && log.contains("(env)"), "{log}");
    assert!(!log.contains("sk-test-secret"), "credential leaked: {log}");
    assert!(d.join("b.jsonl.failures.json").exists());
}

#[test]
fn config_file_then_flags() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let sources = fixture_sources();
    fs::write(
        d.join("run.toml"),
        format!("seed = 7\n[corpus]\nsources_dir = {:?}\nper_source = 3\n", sources.to_str().unwrap()),
    )
    .unwrap();
    let out = accimg(d, &["--config", "run.toml", "corpus", "build", "--out", "a.jsonl"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(jsonl(&d.join("a.jsonl")).len(), 12);
    assert!(stderr(&out).contains("corpus.per_source = 3 (config)"));

    let out = accimg(d, &["--config", "run.toml", "corpus", "build", "--per-source", "2", "--out", "b.jsonl"]);
    assert_eq!(code(&out), 0);
    assert_eq!(jsonl(&d.join("b.jsonl")).len(), 8);
    assert!(stderr(&out).contains("corpus.per_source = 2 (flag)"));

    fs::write(d.join("bad.toml"), "[corpus]\nper_sauce = 3\n").unwrap();
    let out = accimg(d, &["--config", "bad.toml", "corpus", "build", "--out", "c.jsonl"]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
}

#[test]
fn dry_run_has_no_side_effects() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let sources = fixture_sources();
    let out = accimg(d, &["--dry-run", "corpus", "build", "--sources", sources.to_str().unwrap(), "--per-source", "4", "--out", "corpus.jsonl"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("dry run: would write 16 pairs"));
    assert_eq!(fs::read_dir(d).unwrap().count(), 0);

    assert_eq!(code(&build_corpus(d, "1")), 0);
    accimg(d, &["-q", "prompts", "build", "--corpus", "corpus.jsonl", "--provider", "offline", "--out", "b.jsonl"]);
    let out = accimg(d, &["--dry-run", "generate", "run", "--bundles", "b.jsonl", "--out", "img", "--checkpoint", "ck.log", "--gen-url", &dead_url()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).contains("up to 40 of 40"));
    assert!(!d.join("img").exists() && !d.join("ck.log").exists());
}

fn export_for(map_path: &Path) -> Value {
    let map: Value = serde_json::from_str(&fs::read_to_string(map_path).unwrap()).unwrap();
    let mut rows = Vec::new();
    for (i, (id, entry)) in map.as_object().unwrap().iter().enumerate() {
        let style = entry["style"].as_str().unwrap();
        for (k, annotator) in ["A", "K", "L"].iter().enumerate() {
            if k == 2 && i % 2 == 1 {
                continue;
            }
            let base = (i % 5) as i64;
            let guesses = if k == 0 { vec![style, "Cartoon"] } else { vec!["Minimalist"] };
            rows.push(json!({
                "annotator": annotator,
                "image_id": id.parse::<u64>().unwrap(),
                "scores": {
                    "image_simplicity": 8 + base + k as i64,
                    "image_quality": 9 + base,
                    "text_simplicity": 10 + (i % 3) as i64,
                    "text_quality": 11 - k as i64,
                    "ethics": 18,
                    "text_image_alignment": 10 + base + (k as i64) * ((i % 2) as i64),
                },
                "style_guesses": guesses,
            }));
        }
    }
    Value::Array(rows)
}

#[test]
fn offline_pipeline_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let run = |args: &[&str]| {
        let out = accimg(d, args);
        assert_eq!(code(&out), 0, "{args:?}\n{}", stderr(&out));
        stdout(&out)
    };

    assert_eq!(code(&build_corpus(d, "2")), 0);
    run(&["-q", "prompts", "build", "--corpus", "corpus.jsonl", "--provider", "offline", "--out", "b2.jsonl"]);
    run(&["-q", "prompts", "build", "--corpus", "corpus.jsonl", "--provider", "offline", "--template", "grid_layout", "--out", "b1.jsonl"]);
    assert_eq!(jsonl(&d.join("b2.jsonl")).len(), 8);

    let gen = ["-q", "generate", "run", "--bundles", "b2.jsonl", "--out", "img", "--checkpoint", "ck.log", "--provider", "mock", "--block-token", "retro style"];
    let s = run(&gen);
    assert!(s.contains("80 tasks: 72 succeeded, 8 blocked"), "{s}");
    let report: Value = serde_json::from_str(&fs::read_to_string(d.join("img/run_report.json")).unwrap()).unwrap();
    assert_eq!(report["moderation_log"].as_array().unwrap().len(), 8);
    let mut resume = gen.to_vec();
    resume[2] = "resume";
    let s = run(&resume);
    assert!(s.contains("80 resumed, 0 provider calls"), "{s}");
    run(&["-q", "generate", "run", "--bundles", "b1.jsonl", "--out", "img1", "--checkpoint", "ck1.log", "--provider", "mock"]);

    run(&["-q", "score", "clip", "--bundles", "b2.jsonl", "--images", "img", "--backend", "hashing", "--out", "s2.jsonl"]);
    run(&["-q", "score", "clip", "--bundles", "b1.jsonl", "--images", "img1", "--backend", "hashing", "--out", "s1.jsonl"]);
    assert_eq!(jsonl(&d.join("s2.jsonl")).len(), 72);
    run(&["-q", "score", "composite", "--scores", "s1.jsonl", "s2.jsonl", "--out", "ranking.json"]);
    let ranking: Value = serde_json::from_str(&fs::read_to_string(d.join("ranking.json")).unwrap()).unwrap();
    let templates = ranking["templates"].as_array().unwrap();
    assert_eq!(templates.len(), 2);
    assert_eq!(templates[0]["rank"], 1);
    assert!(templates[0]["composite"].as_f64().unwrap() >= templates[1]["composite"].as_f64().unwrap());

    run(&["-q", "anonymize", "--in", "img", "--out", "anon", "--map", "map.json", "--seed", "3"]);
    let map: Value = serde_json::from_str(&fs::read_to_string(d.join("map.json")).unwrap()).unwrap();
    assert_eq!(map.as_object().unwrap().len(), 72);
    assert!(d.join("anon/0001.png").exists());
    run(&["-q", "assign", "--map", "map.json", "--out", "assign.json", "--experts", "A,K,L", "--shared", "12", "--unique-per-expert", "20"]);

    fs::write(d.join("export.json"), serde_json::to_string(&export_for(&d.join("map.json"))).unwrap()).unwrap();
    run(&["-q", "eval", "ingest", "--export", "export.json", "--map", "map.json", "--out", "records.jsonl"]);
    assert_eq!(jsonl(&d.join("records.jsonl")).len(), 72 * 2 + 36);

    let out = accimg(d, &["-q", "eval", "alpha", "--dimension", "ethics"]);
    assert_eq!(code(&out), 2, "constant ratings have no defined alpha");
    let alpha: Value = serde_json::from_str(&run(&["-q", "eval", "alpha", "--dimension", "image_quality", "--min-raters", "3"])).unwrap();
    assert_eq!(alpha["alpha"], 1.0);
    assert_eq!(alpha["n_items"], 36);

    let recall: Value = serde_json::from_str(&run(&["-q", "eval", "recall3"])).unwrap();
    assert_eq!(recall["recall_at_3"]["per_expert"]["A"]["recall"], 1.0);
    let corr: Value = serde_json::from_str(&run(&["-q", "eval", "correlate", "--scores", "s2.jsonl", "--standardize"])).unwrap();
    assert_eq!(corr["row"]["level"], "per_expert_standardized");
    let index: Value = serde_json::from_str(&run(&["-q", "eval", "index", "--kind", "dataset"])).unwrap();
    assert_eq!(index.as_array().unwrap().len(), 4);

    run(&["-q", "eval", "report", "--scores", "s2.jsonl", "--assignments", "assign.json", "--out", "report.json"]);
    let first = fs::read(d.join("report.json")).unwrap();
    run(&["-q", "eval", "report", "--scores", "s2.jsonl", "--assignments", "assign.json", "--out", "report.json"]);
    assert_eq!(fs::read(d.join("report.json")).unwrap(), first);
    let report: Value = serde_json::from_slice(&first).unwrap();
    assert_eq!(report["n_records"], 180);
}
