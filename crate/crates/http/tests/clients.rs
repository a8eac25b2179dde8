mod common;

use accimg_core::genpipe::{GenerateError, ImageClient, ImageSize, PLACEHOLDER_PNG};
use accimg_core::scoring::{clip_score, EmbeddingBackend};
use accimg_core::templates::{ChatClient, ChatError, ChatRequest, Message};
use accimg_http::{ClipdBackend, HttpChatClient, HttpImageClient};
use base64::Engine;
use serde_json::json;

fn chat_request() -> ChatRequest {
    ChatRequest {
        messages: vec![Message::system("sys"), Message::user("Simplified sentence: A cat.")],
        temperature: 0.7,
        max_tokens: 500,
    }
}

#[test]
fn chat_sends_openai_shape_and_reads_content() {
    let stub = common::serve(|_| (200, json!({"choices": [{"message": {"content": "  A cartoon cat.  "}}]}).to_string()));
    let client = HttpChatClient::new(&format!("{}/v1", stub.url), Some("k-123".into()), "gpt-4");
    assert_eq!(client.send(&chat_request()).unwrap(), "A cartoon cat.");
    let reqs = stub.requests.lock().unwrap();
    assert_eq!(reqs[0].method, "POST");
    assert_eq!(reqs[0].path, "/v1/chat/completions");
    assert_eq!(reqs[0].header("authorization"), Some("Bearer k-123"));
    let body = reqs[0].json();
    assert_eq!(body["model"], "gpt-4");
    assert_eq!(body["messages"][0]["role"], "system");
    assert_eq!(body["max_tokens"], 500);
}

#[test]
fn chat_error_classes() {
    let stub = common::serve(|r| match r.json()["messages"][1]["content"].as_str().unwrap() {
        s if s.contains("busy") => (429, "{}".into()),
        _ => (401, r#"{"error":{"message":"bad key"}}"#.into()),
    });
    let client = HttpChatClient::new(&stub.url, None, "m");
    let mut req = chat_request();
    assert!(matches!(client.send(&req), Err(ChatError::Permanent(m)) if m.contains("401")));
    req.messages[1] = Message::user("busy");
    assert!(matches!(client.send(&req), Err(ChatError::Transient(_))));
    let dead = HttpChatClient::new(&common::dead_url(), None, "m");
    assert!(matches!(dead.send(&req), Err(ChatError::Transient(_))));
}

#[test]
fn image_decodes_b64_and_maps_moderation() {
    let b64 = base64::engine::general_purpose::STANDARD.encode(PLACEHOLDER_PNG);
    let stub = common::serve(move |r| {
        let prompt = r.json()["prompt"].as_str().unwrap().to_string();
        if prompt.contains("forbidden") {
            (400, json!({"error": {"code": "content_policy_violation", "message": "Your request was rejected by the safety system."}}).to_string())
        } else if prompt.contains("malformed") {
            (400, json!({"error": {"code": "invalid_size", "message": "bad size"}}).to_string())
        } else if prompt.contains("overloaded") {
            (503, "{}".into())
        } else {
            (200, json!({"data": [{"b64_json": b64}]}).to_string())
        }
    });
    let client = HttpImageClient::new(&stub.url, Some("g".into()), "dall-e-3");
    let size = ImageSize::default();
    assert_eq!(client.generate("a cat", size).unwrap(), PLACEHOLDER_PNG);
    assert!(matches!(client.generate("forbidden", size), Err(GenerateError::Blocked(m)) if m.contains("safety system")));
    assert!(matches!(client.generate("malformed", size), Err(GenerateError::Permanent(_))));
    assert!(matches!(client.generate("overloaded", size), Err(GenerateError::Transient(_))));
    let reqs = stub.requests.lock().unwrap();
    assert_eq!(reqs[0].path, "/images/generations");
    assert_eq!(reqs[0].json()["size"], "1024x1024");
    assert_eq!(reqs[0].json()["response_format"], "b64_json");
}

#[test]
fn clipd_contract() {
    let stub = common::serve(|r| match (r.method.as_str(), r.path.as_str()) {
        ("GET", "/healthz") => (200, json!({"status": "ok", "model_id": "ViT-L/14@336px", "dim": 2}).to_string()),
        ("POST", "/v1/embed/text") => {
            let n = r.json()["texts"].as_array().unwrap().len();
            (200, json!({"vectors": vec![[1.0, 0.0]; n], "model_id": "ViT-L/14@336px", "dim": 2}).to_string())
        }
        ("POST", "/v1/embed/image") => {
            let imgs = r.json()["images"].as_array().unwrap().clone();
            for i in &imgs {
                base64::engine::general_purpose::STANDARD.decode(i.as_str().unwrap()).unwrap();
            }
            (200, json!({"vectors": vec![[0.6, 0.8]; imgs.len()], "model_id": "ViT-L/14@336px", "dim": 2}).to_string())
        }
        _ => (404, "{}".into()),
    });
    let backend = ClipdBackend::connect(&stub.url).unwrap();
    assert_eq!(backend.model_id(), "ViT-L/14@336px");
    assert_eq!(backend.dim(), 2);
    let s = clip_score("a cat", PLACEHOLDER_PNG, &backend, 2.5).unwrap();
    assert!((s - 1.5).abs() < 1e-12);

    let texts: Vec<String> = (0..150).map(|i| format!("t{i}")).collect();
    assert_eq!(backend.embed_texts(&texts).unwrap().len(), 150);
    let sizes: Vec<usize> = stub
        .requests
        .lock()
        .unwrap()
        .iter()
        .filter(|r| r.path == "/v1/embed/text")
        .map(|r| r.json()["texts"].as_array().unwrap().len())
        .collect();
    assert_eq!(sizes, vec![1, 64, 64, 22]);
}

#[test]
fn clipd_rejects_bad_responses() {
    let stub = common::serve(|r| match r.path.as_str() {
        "/healthz" => (200, json!({"status": "ok", "model_id": "m", "dim": 3}).to_string()),
        _ => (200, json!({"vectors": [[1.0, 0.0]], "model_id": "m", "dim": 3}).to_string()),
    });
    let backend = ClipdBackend::connect(&stub.url).unwrap();
    assert!(backend.embed_text("x").is_err());
    assert!(backend.embed_texts(&["a".into(), "b".into()]).is_err());

    let loading = common::serve(|_| (503, r#"{"status":"loading"}"#.into()));
    assert!(ClipdBackend::connect(&loading.url).is_err());
    assert!(ClipdBackend::connect(&common::dead_url()).is_err());
}
