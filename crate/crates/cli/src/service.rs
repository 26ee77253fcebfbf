//! Stateless HTTP reward scoring.
//!
//! - `POST /v1/score` takes a [`ScoreRequest`] and returns a [`ScoreResponse`].
//! - `GET /healthz` returns the engine version.
//!
//! Schema violations get a 400 with a machine-readable error body. Internal
//! failures get a 500 carrying only an opaque error id; details go to stderr.

use std::sync::Arc;
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tablerl_core::reward::batch_rewards;
use tablerl_core::{RewardBreakdown, RewardConfig, TaskInstance, ENGINE_VERSION};

/// Per-request overrides, limited to the numeric reward fields.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RewardOverrides {
    pub format_weight: Option<f64>,
    pub accuracy_weight: Option<f64>,
    pub fftqa_bleu_weight: Option<f64>,
    pub fftqa_rouge_weight: Option<f64>,
    pub bleu_max_n: Option<usize>,
}

impl RewardOverrides {
    pub fn apply(&self, base: &RewardConfig) -> RewardConfig {
        let mut cfg = base.clone();
        if let Some(v) = self.format_weight {
            cfg.format_weight = v;
        }
        if let Some(v) = self.accuracy_weight {
            cfg.accuracy_weight = v;
        }
        if let Some(v) = self.fftqa_bleu_weight {
            cfg.fftqa_bleu_weight = v;
        }
        if let Some(v) = self.fftqa_rouge_weight {
            cfg.fftqa_rouge_weight = v;
        }
        if let Some(v) = self.bleu_max_n {
            cfg.bleu_max_n = v;
        }
        cfg
    }
}

/// Wire form of a scoring request. `instance` uses the dataset record schema.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScoreRequest {
    pub instance: serde_json::Value,
    pub responses: Vec<String>,
    #[serde(default)]
    pub config: Option<RewardOverrides>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreResponse {
    pub breakdowns: Vec<RewardBreakdown>,
    pub engine_version: String,
    pub timing_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: ErrorDetail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorDetail {
    /// `malformed_json`, `schema`, `invalid_config` or `internal`.
    pub code: String,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub field: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error_id: Option<String>,
}

#[derive(Debug)]
pub enum ServiceError {
    BadRequest {
        code: &'static str,
        message: String,
        field: Option<String>,
    },
    Internal(String),
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        match self {
            ServiceError::BadRequest {
                code,
                message,
                field,
            } => {
                let body = ErrorBody {
                    error: ErrorDetail {
                        code: code.to_string(),
                        message,
                        field,
                        error_id: None,
                    },
                };
                (StatusCode::BAD_REQUEST, Json(body)).into_response()
            }
            ServiceError::Internal(detail) => {
                let id = uuid::Uuid::new_v4().to_string();
                eprintln!("internal error {id}: {detail}");
                let body = ErrorBody {
                    error: ErrorDetail {
                        code: "internal".into(),
                        message: "internal error".into(),
                        field: None,
                        error_id: Some(id),
                    },
                };
                (StatusCode::INTERNAL_SERVER_ERROR, Json(body)).into_response()
            }
        }
    }
}

fn bad(code: &'static str, message: impl Into<String>, field: Option<&str>) -> ServiceError {
    ServiceError::BadRequest {
        code,
        message: message.into(),
        field: field.map(str::to_string),
    }
}

/// A validated request ready for scoring.
#[derive(Debug, Clone)]
pub struct ScoreJob {
    pub instance: TaskInstance,
    pub responses: Vec<String>,
    pub config: RewardConfig,
}

/// Parses and validates a request body against the startup config.
pub fn validate_request(body: &[u8], base: &RewardConfig) -> Result<ScoreJob, ServiceError> {
    let value: serde_json::Value =
        serde_json::from_slice(body).map_err(|e| bad("malformed_json", e.to_string(), None))?;
    let req: ScoreRequest =
        serde_json::from_value(value).map_err(|e| bad("schema", e.to_string(), None))?;
    let instance = TaskInstance::from_json_value(req.instance).map_err(|e| {
        bad(
            "schema",
            e.message,
            Some(&format!("instance.{}", e.field)),
        )
    })?;
    if req.responses.is_empty() {
        return Err(bad("schema", "at least one response is required", Some("responses")));
    }
    let config = req.config.unwrap_or_default().apply(base);
    config
        .validate()
        .map_err(|e| bad("invalid_config", e.to_string(), Some("config")))?;
    Ok(ScoreJob {
        instance,
        responses: req.responses,
        config,
    })
}

/// Scores a validated job exactly as the library's batch scorer does.
pub fn score_job(job: &ScoreJob) -> Result<Vec<RewardBreakdown>, ServiceError> {
    batch_rewards(&job.responses, &job.instance, &job.config)
        .map_err(|e| ServiceError::Internal(e.to_string()))
}

#[derive(Debug, Clone)]
pub struct AppState {
    pub reward: Arc<RewardConfig>,
}

pub fn router(reward: RewardConfig) -> Router {
    let state = AppState {
        reward: Arc::new(reward),
    };
    Router::new()
        .route("/healthz", get(healthz))
        .route("/v1/score", post(score))
        .with_state(state)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub engine_version: String,
}

async fn healthz() -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        engine_version: ENGINE_VERSION.into(),
    })
}

async fn score(State(state): State<AppState>, body: Bytes) -> Result<Json<ScoreResponse>, ServiceError> {
    let start = Instant::now();
    let job = validate_request(&body, &state.reward)?;
    let breakdowns = tokio::task::spawn_blocking(move || score_job(&job))
        .await
        .map_err(|e| ServiceError::Internal(format!("scoring task failed: {e}")))??;
    Ok(Json(ScoreResponse {
        breakdowns,
        engine_version: ENGINE_VERSION.into(),
        timing_ms: start.elapsed().as_secs_f64() * 1e3,
    }))
}

/// Serves on an already bound listener until the future is dropped.
pub async fn serve(listener: tokio::net::TcpListener, reward: RewardConfig) -> std::io::Result<()> {
    axum::serve(listener, router(reward)).await
}
