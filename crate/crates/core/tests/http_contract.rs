use std::io::{BufRead, BufReader, Read, Write};
use std::net::TcpListener;
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::Duration;

use serde_json::{json, Value};

use scurank_core::cache::Cache;
use scurank_core::corpus::CandidateSummary;
use scurank_core::embedding::{encode_batch, offline_hash_encode, BridgeEncoder, Encoder};
use scurank_core::extraction::{
    ChatBackend, ChatMessage, ChatRequest, ExtractorConfig, HttpChatClient, LlmExtractor,
    ScuExtractor,
};
use scurank_core::{Error, RetryPolicy};

#[derive(Debug, Clone)]
struct Seen {
    path: String,
    authorization: Option<String>,
    body: Value,
}

type Handler = dyn Fn(usize, &Seen) -> (u16, String) + Send + Sync;

/// One-request-per-connection HTTP server; `handler` gets the request
/// number and the parsed request.
struct MockServer {
    url: String,
    seen: Arc<Mutex<Vec<Seen>>>,
}

impl MockServer {
    fn start(handler: impl Fn(usize, &Seen) -> (u16, String) + Send + Sync + 'static) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let url = format!("http://{}", listener.local_addr().unwrap());
        let seen = Arc::new(Mutex::new(Vec::new()));
        let log = Arc::clone(&seen);
        let handler: Arc<Handler> = Arc::new(handler);
        thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(mut stream) = stream else { return };
                let mut reader = BufReader::new(stream.try_clone().unwrap());
                let mut line = String::new();
                if reader.read_line(&mut line).unwrap_or(0) == 0 {
                    continue;
                }
                let path = line.split_whitespace().nth(1).unwrap_or("").to_string();
                let (mut length, mut authorization) = (0, None);
                loop {
                    let mut h = String::new();
                    reader.read_line(&mut h).unwrap();
                    let h = h.trim_end();
                    if h.is_empty() {
                        break;
                    }
                    let (name, value) = h.split_once(':').unwrap();
                    match name.to_ascii_lowercase().as_str() {
                        "content-length" => length = value.trim().parse().unwrap(),
                        "authorization" => authorization = Some(value.trim().to_string()),
                        _ => {}
                    }
                }
                let mut body = vec![0; length];
                reader.read_exact(&mut body).unwrap();
                let req = Seen {
                    path,
                    authorization,
                    body: serde_json::from_slice(&body).unwrap_or(Value::Null),
                };
                let n = {
                    let mut l = log.lock().unwrap();
                    l.push(req.clone());
                    l.len() - 1
                };
                let (status, text) = handler(n, &req);
                let _ = write!(
                    stream,
                    "HTTP/1.1 {status} X\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{text}",
                    text.len()
                );
            }
        });
        Self { url, seen }
    }

    fn requests(&self) -> Vec<Seen> {
        self.seen.lock().unwrap().clone()
    }
}

fn fast_retry(max_attempts: u32) -> RetryPolicy {
    RetryPolicy {
        max_attempts,
        backoff_base: Duration::from_millis(1),
        backoff_cap: Duration::from_millis(2),
    }
}

const DIM: usize = 16;

/// A well-behaved bridge: normalized hash vectors, indices in reverse order.
fn embed_reply(req: &Seen) -> String {
    let input: Vec<String> = serde_json::from_value(req.body["input"].clone()).unwrap();
    let data: Vec<Value> = input
        .iter()
        .enumerate()
        .rev()
        .map(|(i, t)| json!({"index": i, "embedding": offline_hash_encode(t, DIM, 0).values()}))
        .collect();
    json!({"data": data, "model": req.body["model"], "dim": DIM}).to_string()
}

fn texts(items: &[&str]) -> Vec<String> {
    items.iter().map(|s| s.to_string()).collect()
}

/// Index coverage, dimension, unit norm and same-text-same-vector.
fn check_encoder_contract(encoder: &dyn Encoder) {
    let input = texts(&["the cat sat", "a dog ran home", "the cat sat", "x"]);
    let out = encoder.encode(&input).unwrap();
    assert_eq!(out.len(), input.len());
    for v in &out {
        assert_eq!(v.dimension(), encoder.dimension());
        assert!((v.norm() - 1.0).abs() <= 1e-6, "norm {}", v.norm());
    }
    assert_eq!(out[0], out[2]);
    assert_ne!(out[0], out[1]);
    assert!(encoder.encode(&[]).unwrap().is_empty());
}

#[test]
fn bridge_reorders_by_index_and_meets_the_contract() {
    let server = MockServer::start(|_, req| (200, embed_reply(req)));
    let enc = BridgeEncoder::new(&server.url, "m", DIM, 64, fast_retry(1)).unwrap();
    check_encoder_contract(&enc);
    let out = enc.encode(&texts(&["alpha", "beta"])).unwrap();
    assert_eq!(out[0], offline_hash_encode("alpha", DIM, 0));
    assert_eq!(out[1], offline_hash_encode("beta", DIM, 0));
    let reqs = server.requests();
    assert!(reqs.iter().all(|r| r.path == "/embed"));
    assert_eq!(reqs[0].body["model"], "m");
}

#[test]
fn bridge_splits_input_into_batches() {
    let server = MockServer::start(|_, req| (200, embed_reply(req)));
    let enc = BridgeEncoder::new(&server.url, "m", DIM, 2, fast_retry(1)).unwrap();
    let input = texts(&["a1", "b2", "c3", "d4", "e5"]);
    let out = enc.encode(&input).unwrap();
    assert_eq!(out.len(), 5);
    assert_eq!(out[4], offline_hash_encode("e5", DIM, 0));
    let sizes: Vec<usize> = server
        .requests()
        .iter()
        .map(|r| r.body["input"].as_array().unwrap().len())
        .collect();
    assert_eq!(sizes, vec![2, 2, 1]);
}

#[test]
fn bridge_retries_server_errors_and_rate_limits() {
    let server = MockServer::start(|n, req| match n {
        0 => (503, "{}".into()),
        1 => (429, "{}".into()),
        _ => (200, embed_reply(req)),
    });
    let enc = BridgeEncoder::new(&server.url, "m", DIM, 64, fast_retry(3)).unwrap();
    assert_eq!(enc.encode(&texts(&["abc"])).unwrap().len(), 1);
    assert_eq!(server.requests().len(), 3);
}

#[test]
fn bridge_gives_up_after_max_attempts() {
    let server = MockServer::start(|_, _| (500, "{}".into()));
    let enc = BridgeEncoder::new(&server.url, "m", DIM, 64, fast_retry(2)).unwrap();
    assert!(matches!(enc.encode(&texts(&["abc"])), Err(Error::Transport(_))));
    assert_eq!(server.requests().len(), 2);
}

#[test]
fn client_errors_are_not_retried() {
    let server = MockServer::start(|_, _| (400, r#"{"error":"bad"}"#.into()));
    let enc = BridgeEncoder::new(&server.url, "m", DIM, 64, fast_retry(5)).unwrap();
    let err = enc.encode(&texts(&["abc"])).unwrap_err();
    assert!(err.to_string().contains("400"), "{err}");
    assert_eq!(server.requests().len(), 1);
}

#[test]
fn bridge_rejects_contract_violations() {
    let cases: Vec<(&str, Value)> = vec![
        ("wrong dim", json!({"data": [{"index": 0, "embedding": vec![1.0; DIM]}], "dim": 8})),
        ("short vector", json!({"data": [{"index": 0, "embedding": [1.0]}], "dim": DIM})),
        ("missing item", json!({"data": [], "dim": DIM})),
        ("bad index", json!({"data": [{"index": 3, "embedding": vec![0.25; DIM]}], "dim": DIM})),
    ];
    for (name, reply) in cases {
        let body = reply.to_string();
        let server = MockServer::start(move |_, _| (200, body.clone()));
        let enc = BridgeEncoder::new(&server.url, "m", DIM, 64, fast_retry(1)).unwrap();
        assert!(enc.encode(&texts(&["abc"])).is_err(), "{name}");
    }
    let dup = json!({"data": [
        {"index": 0, "embedding": vec![0.25; DIM]},
        {"index": 0, "embedding": vec![0.25; DIM]}
    ], "dim": DIM})
    .to_string();
    let server = MockServer::start(move |_, _| (200, dup.clone()));
    let enc = BridgeEncoder::new(&server.url, "m", DIM, 64, fast_retry(1)).unwrap();
    assert!(enc.encode(&texts(&["abc", "def"])).is_err());
}

#[test]
fn cached_embeddings_skip_the_bridge() {
    let server = MockServer::start(|_, req| (200, embed_reply(req)));
    let enc = BridgeEncoder::new(&server.url, "m", DIM, 64, fast_retry(1)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let cache = Cache::new(dir.path());
    let input = texts(&["one text", "two text"]);
    let first = encode_batch(&input, &enc, true, Some(&cache)).unwrap();
    let second = encode_batch(&input, &enc, true, Some(&cache)).unwrap();
    assert_eq!(first, second);
    assert_eq!(server.requests().len(), 1);
}

fn chat_reply(content: &str) -> String {
    json!({
        "choices": [{"message": {"role": "assistant", "content": content}, "finish_reason": "stop"}],
        "usage": {"prompt_tokens": 1, "completion_tokens": 1, "total_tokens": 2}
    })
    .to_string()
}

#[test]
fn chat_client_posts_the_request_and_retries() {
    let server = MockServer::start(|n, _| match n {
        0 => (429, "{}".into()),
        _ => (200, chat_reply("A # B")),
    });
    let client = HttpChatClient::new(&format!("{}/v1/", server.url), fast_retry(2)).unwrap();
    let req = ChatRequest {
        model: "gpt-4o-mini".into(),
        temperature: 0.0,
        messages: vec![ChatMessage::system("s"), ChatMessage::user("u")],
    };
    assert_eq!(client.complete(&req).unwrap().content, "A # B");
    let reqs = server.requests();
    assert_eq!(reqs.len(), 2);
    assert_eq!(reqs[1].path, "/v1/chat/completions");
    assert_eq!(reqs[1].body, serde_json::from_slice::<Value>(&req.to_bytes()).unwrap());
    assert_eq!(reqs[1].body["messages"][0]["role"], "system");
}

#[test]
fn api_key_is_sent_as_bearer_token() {
    let server = MockServer::start(|_, _| (200, chat_reply("x")));
    std::env::set_var("SCURANK_API_KEY", "sk-test");
    let client = HttpChatClient::new(&server.url, fast_retry(1)).unwrap();
    std::env::remove_var("SCURANK_API_KEY");
    let req = ChatRequest {
        model: "m".into(),
        temperature: 0.0,
        messages: vec![ChatMessage::user("u")],
    };
    client.complete(&req).unwrap();
    assert_eq!(
        server.requests()[0].authorization.as_deref(),
        Some("Bearer sk-test")
    );
}

#[test]
fn extractor_over_http_parses_and_caches_replies() {
    let server = MockServer::start(|_, _| (200, chat_reply("Kim won. # Kim is tall. #")));
    let backend = Arc::new(HttpChatClient::new(&server.url, fast_retry(1)).unwrap());
    let dir = tempfile::tempdir().unwrap();
    let extractor = LlmExtractor::new(
        ExtractorConfig::default(),
        backend,
        Some(Cache::new(dir.path())),
    )
    .unwrap();
    let cand = CandidateSummary::new("c0", "g0", "Kim, who is tall, won.");
    let first = extractor.extract("d0", &cand).unwrap();
    let texts: Vec<&str> = first.iter().map(|s| s.text.as_str()).collect();
    assert_eq!(texts, ["Kim won.", "Kim is tall."]);
    assert_eq!(extractor.extract("d0", &cand).unwrap(), first);
    let reqs = server.requests();
    assert_eq!(reqs.len(), 1);
    assert_eq!(reqs[0].body["model"], "gpt-4o-mini");
    assert_eq!(reqs[0].body["temperature"], 0.0);
    assert_eq!(reqs[0].body["messages"][1]["content"], "Kim, who is tall, won.");
}

#[test]
fn unreachable_endpoint_is_a_transport_error() {
    let addr = {
        let l = TcpListener::bind("127.0.0.1:0").unwrap();
        l.local_addr().unwrap()
    };
    let enc = BridgeEncoder::new(&format!("http://{addr}"), "m", DIM, 64, fast_retry(2)).unwrap();
    assert!(matches!(enc.encode(&texts(&["abc"])), Err(Error::Transport(_))));
}

/// Runs the contract against a live bridge when `SCURANK_BRIDGE_URL` is set.
#[test]
fn live_bridge_contract() {
    let Ok(url) = std::env::var("SCURANK_BRIDGE_URL") else {
        eprintln!("SCURANK_BRIDGE_URL not set; skipping live bridge check");
        return;
    };
    let dim: usize = std::env::var("SCURANK_BRIDGE_DIM")
        .ok()
        .and_then(|d| d.parse().ok())
        .unwrap_or(768);
    let model = std::env::var("SCURANK_BRIDGE_MODEL").unwrap_or_default();
    let enc = BridgeEncoder::new(&url, &model, dim, 64, RetryPolicy::default()).unwrap();
    check_encoder_contract(&enc);
}
