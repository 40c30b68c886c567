//! HTTP providers against a loopback server speaking just enough HTTP/1.1.

use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};

use hearth_core::dataset::bundled_corpus_dir;
use hearth_core::harness::{run_two_stage, PlannerSource, RunConfig};
use hearth_core::profile::NodeType;
use hearth_core::providers::{
    ChatMessage, ChatProvider, ChatRequest, Embedder, EndpointConfig, HttpChat, HttpEmbedder, ProviderError,
};

#[derive(Debug, Clone)]
struct Seen {
    path: String,
    auth: String,
    body: serde_json::Value,
}

type Handler = dyn Fn(usize, &Seen) -> (u16, String) + Send + Sync;

struct Mock {
    base_url: String,
    seen: Arc<Mutex<Vec<Seen>>>,
}

impl Mock {
    fn start(handler: impl Fn(usize, &Seen) -> (u16, String) + Send + Sync + 'static) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let base_url = format!("http://{}/v1", listener.local_addr().unwrap());
        let seen = Arc::new(Mutex::new(Vec::new()));
        let log = Arc::clone(&seen);
        let handler: Arc<Handler> = Arc::new(handler);
        std::thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(mut stream) = stream else { continue };
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap_or(0) == 0 {
                    continue;
                }
                let path = line.split_whitespace().nth(1).unwrap_or_default().to_string();
                let (mut len, mut auth) = (0usize, String::new());
                loop {
                    let mut h = String::new();
                    reader.read_line(&mut h).unwrap();
                    let h = h.trim_end();
                    if h.is_empty() {
                        break;
                    }
                    let (name, value) = h.split_once(':').unwrap();
                    match name.to_ascii_lowercase().as_str() {
                        "content-length" => len = value.trim().parse().unwrap(),
                        "authorization" => auth = value.trim().to_string(),
                        _ => {}
                    }
                }
                let mut body = vec![0; len];
                reader.read_exact(&mut body).unwrap();
                let seen = Seen {
                    path,
                    auth,
                    body: serde_json::from_slice(&body).unwrap_or(serde_json::Value::Null),
                };
                let n = {
                    let mut l = log.lock().unwrap();
                    l.push(seen.clone());
                    l.len() - 1
                };
                let (status, reply) = handler(n, &seen);
                let _ = write!(
                    stream,
                    "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\ncontent-length: {}\r\nconnection: close\r\n\r\n{reply}",
                    reply.len()
                );
            }
        });
        Self { base_url, seen }
    }

    fn requests(&self) -> Vec<Seen> {
        self.seen.lock().unwrap().clone()
    }

    fn config(&self, key_env: &str) -> EndpointConfig {
        std::env::set_var(key_env, "test-key-123");
        EndpointConfig {
            base_url: self.base_url.clone(),
            model: "mock-model".into(),
            embedding_model: Some("mock-embed".into()),
            credential_env: key_env.into(),
            timeout_s: 5.0,
            max_retries: 3,
            initial_backoff_ms: 1,
            send_top_k: false,
            rate_limit: None,
        }
    }
}

fn completion(text: &str) -> String {
    serde_json::json!({
        "choices": [{"message": {"role": "assistant", "content": text}}],
        "usage": {"prompt_tokens": 11, "completion_tokens": 3}
    })
    .to_string()
}

fn request() -> ChatRequest {
    ChatRequest::new(vec![ChatMessage::system("sys"), ChatMessage::user("hello")])
}

#[test]
fn canned_completion_roundtrip() {
    let mock = Mock::start(|_, _| (200, completion("Thought: ok\nAction: Wait[]")));
    let chat = HttpChat::new(mock.config("HEARTH_MOCK_KEY_A")).unwrap();
    let r = chat.chat(&request()).unwrap();
    assert_eq!(r.content, "Thought: ok\nAction: Wait[]");
    assert_eq!((r.usage.prompt_tokens, r.usage.completion_tokens), (11, 3));
    let seen = mock.requests();
    assert_eq!(seen.len(), 1);
    assert_eq!(seen[0].path, "/v1/chat/completions");
    assert_eq!(seen[0].auth, "Bearer test-key-123");
    assert_eq!(seen[0].body["model"], "mock-model");
    assert_eq!(seen[0].body["messages"][1]["content"], "hello");
    assert!(seen[0].body.get("top_k").is_none());
}

#[test]
fn rate_limit_is_retried_exactly_once() {
    let mock = Mock::start(|n, _| if n == 0 { (429, "{}".into()) } else { (200, completion("fine")) });
    let chat = HttpChat::new(mock.config("HEARTH_MOCK_KEY_B")).unwrap();
    assert_eq!(chat.chat(&request()).unwrap().content, "fine");
    assert_eq!(mock.requests().len(), 2);
}

#[test]
fn auth_failure_is_not_retried_and_hides_the_key() {
    let mock = Mock::start(|_, _| (401, "{\"error\":\"bad key\"}".into()));
    let chat = HttpChat::new(mock.config("HEARTH_MOCK_KEY_C")).unwrap();
    let err = chat.chat(&request()).unwrap_err();
    assert!(matches!(err, ProviderError::Auth(_)));
    assert!(!err.to_string().contains("test-key-123"));
    assert_eq!(mock.requests().len(), 1);
}

#[test]
fn server_errors_exhaust_retries() {
    let mock = Mock::start(|_, _| (503, "busy".into()));
    let mut cfg = mock.config("HEARTH_MOCK_KEY_D");
    cfg.max_retries = 2;
    let err = HttpChat::new(cfg).unwrap().chat(&request()).unwrap_err();
    assert!(matches!(err, ProviderError::Status { status: 503, .. }));
    assert_eq!(mock.requests().len(), 3);
}

#[test]
fn embeddings_are_reordered_and_dimension_checked() {
    let mock = Mock::start(|_, seen| {
        let dim = if seen.body["input"][0] == "short" { 2 } else { 3 };
        let v = |x: f64| vec![x; dim];
        (
            200,
            serde_json::json!({"data": [
                {"index": 1, "embedding": v(2.0)},
                {"index": 0, "embedding": v(1.0)}
            ]})
            .to_string(),
        )
    });
    let e = HttpEmbedder::new(mock.config("HEARTH_MOCK_KEY_E"), 3).unwrap();
    let out = e.embed_batch(&["a", "b"]).unwrap();
    assert_eq!(out[0].0, vec![1.0; 3]);
    assert_eq!(out[1].0, vec![2.0; 3]);
    assert_eq!(mock.requests()[0].path, "/v1/embeddings");
    let err = e.embed_batch(&["short", "b"]).unwrap_err();
    assert!(matches!(err, ProviderError::DimensionMismatch { expected: 3, actual: 2 }));
}

/// Routes by system prompt so one endpoint can play agent and profile model.
fn household_model(_: usize, seen: &Seen) -> (u16, String) {
    let system = seen.body["messages"][0]["content"].as_str().unwrap_or_default();
    let reply = if system.contains("list every piece of personal knowledge") {
        serde_json::json!({"knowledges": [{
            "alias": "my usual spot", "subtype": "object_semantics", "description": "where things go",
            "elements": [{"type": "object", "name": "red mug", "granularity": "instance"}]
        }]})
        .to_string()
    } else if system.contains("newly extracted piece of knowledge") {
        "add".to_string()
    } else if system.contains("one short paragraph") {
        "The user keeps a red mug.".to_string()
    } else {
        "Thought: The task is complete.\nAction: Done[]".to_string()
    };
    (200, completion(&reply))
}

#[test]
fn endpoint_run_with_profile_memory() {
    let mock = Mock::start(household_model);
    let dir = tempfile::tempdir().unwrap();
    let cfg_path = dir.path().join("endpoint.json");
    std::fs::write(&cfg_path, serde_json::to_string(&mock.config("HEARTH_MOCK_KEY_F")).unwrap()).unwrap();
    let mut cfg = RunConfig::new(bundled_corpus_dir(), PlannerSource::Endpoint { config: cfg_path });
    cfg.agent.use_profile_memory = true;
    cfg.jobs = 4;
    let out = run_two_stage(&cfg).unwrap();
    assert_eq!(out.report.infrastructure_errors, 0, "{:?}", out.report.rows.iter().find(|r| r.error.is_some()));
    assert_eq!(out.profile.count(NodeType::Knowledge), 24);
    out.profile.check_invariants().unwrap();
    // The model gives up at once, so nothing is achieved.
    assert!(out.report.rows.iter().all(|r| !r.success));
    let prompts = mock.requests();
    assert!(prompts
        .iter()
        .any(|s| s.body.to_string().contains("The user keeps a red mug.")));
    assert!(prompts.iter().all(|s| !s.body.to_string().contains("test-key-123")));
}
