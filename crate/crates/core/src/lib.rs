//! Reward engineering and evaluation for reinforcement learning with
//! verifiable rewards on table reasoning tasks.
//!
//! The crate is organised bottom-up:
//!
//! - [`table`]: table data model, markdown/HTML serialization and task instances.
//! - [`prompt`]: the instruction templates sent to the policy and to the judge.
//! - [`response`]: parsing of `<think>…</think> <answer>…</answer>` responses and
//!   the cumulative format reward.
//! - [`metrics`]: normalization, exact match, BLEU and ROUGE-L.
//! - [`reward`]: accuracy + format rewards per rollout.
//! - [`grpo`]: group-normalized advantages and the token-level clipped objective.
//! - [`eval`]: dataset ingestion, evaluation reports, LLM-judge re-scoring, pass@k.
//! - [`config`]: the flat key-value run configuration shared by every tool.

pub mod config;
pub mod eval;
pub mod grpo;
pub mod metrics;
pub mod prompt;
pub mod response;
pub mod reward;
pub mod table;

pub use grpo::{ClipConfig, DegenerateGroupMode, GroupBatch, GrpoError, RolloutLogProbs};
pub use metrics::NormalizationPolicy;
pub use response::{parse_response, FormatSchedule, ParsedAnswer, ParsedResponse};
pub use reward::{RewardBreakdown, RewardConfig, RewardError};
pub use table::{GoldAnswer, Label, Table, TableFormat, TaskInstance, TaskKind};

/// Version string reported by the scoring service and written into reports.
pub const ENGINE_VERSION: &str = concat!("tablerl-core/", env!("CARGO_PKG_VERSION"));
