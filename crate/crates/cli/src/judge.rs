//! Remote LLM judge over a chat-completion HTTP endpoint.

use std::time::Duration;

use serde_json::json;
use tablerl_core::eval::{parse_judge_output, JudgeClient, JudgeError, JudgeVerdict};
use tablerl_core::prompt::render_judge_prompt;

pub const BASE_URL_ENV: &str = "JUDGE_BASE_URL";
pub const MODEL_ENV: &str = "JUDGE_MODEL";
pub const API_KEY_ENV: &str = "JUDGE_API_KEY";

/// Posts the judge prompt to `{base_url}/chat/completions` and parses the
/// first choice's message content.
#[derive(Debug, Clone)]
pub struct RemoteJudge {
    base_url: String,
    model: String,
    api_key: Option<String>,
    /// Attempts per call, including the first.
    attempts: usize,
    backoff: Duration,
    client: reqwest::blocking::Client,
}

impl RemoteJudge {
    pub fn new(base_url: impl Into<String>, model: impl Into<String>, api_key: Option<String>) -> Self {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(60))
            .build()
            .expect("http client builds");
        Self {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            model: model.into(),
            api_key,
            attempts: 3,
            backoff: Duration::from_millis(500),
            client,
        }
    }

    /// Reads the endpoint, model and optional key from the environment.
    pub fn from_env() -> Result<Self, JudgeError> {
        let var = |name: &str| {
            std::env::var(name).map_err(|_| JudgeError::Unavailable(format!("{name} is not set")))
        };
        Ok(Self::new(var(BASE_URL_ENV)?, var(MODEL_ENV)?, std::env::var(API_KEY_ENV).ok()))
    }

    pub fn with_retries(mut self, attempts: usize, backoff: Duration) -> Self {
        self.attempts = attempts.max(1);
        self.backoff = backoff;
        self
    }

    fn call(&self, prompt: &str) -> Result<String, String> {
        let body = json!({
            "model": self.model,
            "messages": [{ "role": "user", "content": prompt }],
            "temperature": 0.0,
        });
        let mut req = self
            .client
            .post(format!("{}/chat/completions", self.base_url))
            .json(&body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| e.to_string())?;
        let status = resp.status();
        if !status.is_success() {
            return Err(format!("judge endpoint returned {status}"));
        }
        let value: serde_json::Value = resp.json().map_err(|e| e.to_string())?;
        value["choices"][0]["message"]["content"]
            .as_str()
            .map(str::to_string)
            .ok_or_else(|| "response has no choices[0].message.content".to_string())
    }
}

impl JudgeClient for RemoteJudge {
    fn judge(&self, response: &str, ground_truth: &[String]) -> Result<JudgeVerdict, JudgeError> {
        let prompt = render_judge_prompt(response, ground_truth);
        let mut last = String::new();
        for attempt in 0..self.attempts {
            if attempt > 0 {
                std::thread::sleep(self.backoff * attempt as u32);
            }
            match self.call(&prompt) {
                Ok(content) => return Ok(parse_judge_output(&content)),
                Err(e) => last = e,
            }
        }
        Err(JudgeError::Unavailable(format!(
            "{} attempts failed, last error: {last}",
            self.attempts
        )))
    }
}
