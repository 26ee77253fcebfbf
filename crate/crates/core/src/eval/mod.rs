//! Automated evaluation: dataset/prediction ingestion, per-task metrics,
//! LLM-judge re-scoring of exact-match failures, and pass@k.

mod dataset;
mod judge;
mod passk;
mod report;

pub use dataset::{ingest_dataset, ingest_predictions, read_jsonl, Ingested, PredictionRecord, SchemaError};
pub use judge::{parse_judge_output, JudgeClient, JudgeError, JudgeVerdict, Judgement, LocalJudge};
pub use passk::{pass_at_k, pass_at_k_exact, pass_at_k_report};
pub use report::{
    evaluate, Counts, EvalConfig, EvalOutput, EvalReport, FfTqaMetrics, InstanceRow, TfvMetrics,
    TqaMetrics,
};

use crate::reward::RewardError;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error("prediction references unknown instance `{0}`")]
    UnknownInstance(String),
    #[error("duplicate prediction for instance `{0}`")]
    DuplicatePrediction(String),
    #[error("bad pass@k counts: n={n}, c={c}, k={k}")]
    BadCounts { n: usize, c: usize, k: usize },
    #[error("instance `{id}` has {n} samples but pass@{k} was requested")]
    InsufficientSamples { id: String, n: usize, k: usize },
    #[error(transparent)]
    Reward(#[from] RewardError),
}
