//! A chat-completion endpoint that replays the eval fixture's judge script.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use axum::extract::State;
use axum::http::{HeaderMap, StatusCode};
use axum::routing::post;
use axum::{Json, Router};
use serde_json::{json, Value};

#[derive(Default)]
struct Log {
    requests: usize,
    failures_left: HashMap<String, usize>,
    auth: Vec<String>,
}

#[derive(Clone)]
struct Shared {
    verdicts: Arc<HashMap<String, String>>,
    fail_first: usize,
    log: Arc<Mutex<Log>>,
}

pub struct MockJudge {
    addr: std::net::SocketAddr,
    log: Arc<Mutex<Log>>,
    _runtime: tokio::runtime::Runtime,
}

fn script() -> HashMap<String, String> {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures/eval20/judge.jsonl");
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| {
            let v: Value = serde_json::from_str(l).unwrap();
            (
                v["response"].as_str().unwrap().to_string(),
                v["judgement"].as_str().unwrap().to_string(),
            )
        })
        .collect()
}

/// The response embedded in a rendered judge prompt.
fn response_of(prompt: &str) -> &str {
    let start = prompt.rfind("\nResponse: ").expect("response line") + "\nResponse: ".len();
    let end = prompt.rfind("\nGround_truth: ").expect("ground truth line");
    &prompt[start..end]
}

async fn complete(State(s): State<Shared>, headers: HeaderMap, Json(body): Json<Value>) -> (StatusCode, Json<Value>) {
    let prompt = body["messages"][0]["content"].as_str().unwrap_or_default().to_string();
    let response = response_of(&prompt).to_string();
    {
        let mut log = s.log.lock().unwrap();
        log.requests += 1;
        if let Some(a) = headers.get("authorization") {
            log.auth.push(a.to_str().unwrap_or_default().to_string());
        }
        let left = log.failures_left.entry(response.clone()).or_insert(s.fail_first);
        if *left > 0 {
            *left -= 1;
            return (StatusCode::SERVICE_UNAVAILABLE, Json(json!({"error": "busy"})));
        }
    }
    let judgement = s.verdicts.get(&response).map(String::as_str).unwrap_or("incorrect");
    let content = format!("```json\n{{\n    \"judgement\": \"{judgement}\"\n}}\n```");
    (
        StatusCode::OK,
        Json(json!({"choices": [{"message": {"role": "assistant", "content": content}}]})),
    )
}

impl MockJudge {
    /// Serves on an ephemeral port; each distinct response fails
    /// `fail_first` times before it is answered.
    pub fn start(fail_first: usize) -> Self {
        let runtime = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(1)
            .enable_all()
            .build()
            .unwrap();
        let log = Arc::new(Mutex::new(Log::default()));
        let shared = Shared {
            verdicts: Arc::new(script()),
            fail_first,
            log: log.clone(),
        };
        let listener = runtime
            .block_on(tokio::net::TcpListener::bind("127.0.0.1:0"))
            .unwrap();
        let addr = listener.local_addr().unwrap();
        let app = Router::new()
            .route("/v1/chat/completions", post(complete))
            .with_state(shared);
        runtime.spawn(async move { axum::serve(listener, app).await.unwrap() });
        MockJudge {
            addr,
            log,
            _runtime: runtime,
        }
    }

    pub fn base_url(&self) -> String {
        format!("http://{}/v1", self.addr)
    }

    pub fn requests(&self) -> usize {
        self.log.lock().unwrap().requests
    }

    pub fn saw_bearer(&self, key: &str) -> bool {
        let want = format!("Bearer {key}");
        let log = self.log.lock().unwrap();
        !log.auth.is_empty() && log.auth.iter().all(|a| *a == want)
    }
}
