//! Desk-scale RLVR: synthetic table tasks, a tiny policy trained with GRPO on
//! the verifiable rewards of `tablerl-core`.

pub mod policy;
pub mod sampler;
pub mod task;
pub mod train;
pub mod vocab;

pub use policy::{GoldPolicy, Policy, PolicyShape, TinyPolicy};
pub use sampler::{sample_rollouts, Rollout, SamplingParams};
pub use task::{generate_task, Template, TemplateMix, TinyTabTask};
pub use train::{
    evaluate_policy, train, train_step, write_curve, Optimizer, OptimizerKind, StepStats,
    ToyEvalReport, TrainConfig, TrainError, TrainOutcome,
};
