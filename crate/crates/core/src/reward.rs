//! Verifiable rewards: task-specific accuracy plus the cumulative format reward.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::metrics::{self, MetricError, NormalizationPolicy};
use crate::response::{parse_response, FormatSchedule, ParsedAnswer, ParsedResponse};
use crate::table::{GoldAnswer, TaskInstance, TaskKind};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RewardError {
    #[error("gold answer is for {gold} but the task is {task}")]
    GoldTaskMismatch { gold: TaskKind, task: TaskKind },
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("invalid reward config: {0}")]
    InvalidConfig(String),
}

/// How accuracy and format rewards are computed and combined.
///
/// `total = accuracy_weight · accuracy + format_weight · format`. With
/// `format_gate` set, accuracy only counts when the response reaches
/// `format_gate_stage`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RewardConfig {
    pub format_weight: f64,
    pub accuracy_weight: f64,
    /// BLEU share of the FF-TQA accuracy reward.
    pub fftqa_bleu_weight: f64,
    /// ROUGE-L share of the FF-TQA accuracy reward.
    pub fftqa_rouge_weight: f64,
    #[serde(flatten)]
    pub normalization: NormalizationPolicy,
    pub format_gate: bool,
    pub format_gate_stage: u8,
    pub format_schedule: FormatSchedule,
    /// Compare short-answer lists in order instead of as multisets.
    pub order_sensitive_em: bool,
    pub bleu_max_n: usize,
}

impl Default for RewardConfig {
    fn default() -> Self {
        Self {
            format_weight: 0.2,
            accuracy_weight: 1.0,
            fftqa_bleu_weight: 0.5,
            fftqa_rouge_weight: 0.5,
            normalization: NormalizationPolicy::default(),
            format_gate: false,
            format_gate_stage: 3,
            format_schedule: FormatSchedule::default(),
            order_sensitive_em: false,
            bleu_max_n: 4,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<(), RewardError> {
        let bad = |m: &str| Err(RewardError::InvalidConfig(m.to_string()));
        let weights = [
            self.format_weight,
            self.accuracy_weight,
            self.fftqa_bleu_weight,
            self.fftqa_rouge_weight,
        ];
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return bad("weights must be finite and non-negative");
        }
        if ((self.fftqa_bleu_weight + self.fftqa_rouge_weight) - 1.0).abs() > 1e-9 {
            return bad("fftqa_bleu_weight + fftqa_rouge_weight must equal 1");
        }
        if self.format_gate_stage > 4 {
            return bad("format_gate_stage must be in 0..=4");
        }
        if self.bleu_max_n == 0 {
            return bad("bleu_max_n must be positive");
        }
        self.format_schedule
            .validate()
            .map_err(RewardError::InvalidConfig)
    }

    /// Largest attainable total reward.
    pub fn max_total(&self) -> f64 {
        self.accuracy_weight + self.format_weight
    }
}

/// Reward components for one rollout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub accuracy: f64,
    pub format: f64,
    pub total: f64,
    pub task: TaskKind,
    pub format_stage: u8,
}

fn check_gold(gold: &GoldAnswer, task: TaskKind) -> Result<(), RewardError> {
    if gold.task() != task {
        return Err(RewardError::GoldTaskMismatch {
            gold: gold.task(),
            task,
        });
    }
    Ok(())
}

/// Task-specific accuracy in `[0, 1]`. Absent or ill-typed answers score 0.
pub fn accuracy_reward(
    parsed: &ParsedResponse,
    gold: &GoldAnswer,
    task: TaskKind,
    config: &RewardConfig,
) -> Result<f64, RewardError> {
    check_gold(gold, task)?;
    let Some(answer) = &parsed.parsed_answer else {
        return Ok(0.0);
    };
    let policy = &config.normalization;
    Ok(match (answer, gold) {
        (ParsedAnswer::ShortList(pred), GoldAnswer::ShortList(gold)) => {
            let hit = if config.order_sensitive_em {
                metrics::exact_match_list_ordered(pred, gold, policy)
            } else {
                metrics::exact_match_list(pred, gold, policy)
            };
            f64::from(hit)
        }
        (ParsedAnswer::Label(pred), GoldAnswer::Label(gold)) => f64::from(u8::from(pred == gold)),
        (ParsedAnswer::Sentence(pred), GoldAnswer::Sentence(gold)) => {
            let b = metrics::bleu(pred, gold, policy, config.bleu_max_n)?;
            let r = metrics::rouge_l(pred, gold, policy)?;
            config.fftqa_bleu_weight * b + config.fftqa_rouge_weight * r
        }
        _ => 0.0,
    })
}

/// Parses `raw_response` and scores it against `gold`.
pub fn total_reward(
    raw_response: &str,
    gold: &GoldAnswer,
    task: TaskKind,
    config: &RewardConfig,
) -> Result<RewardBreakdown, RewardError> {
    check_gold(gold, task)?;
    let parsed = parse_response(raw_response, task);
    score_parsed(&parsed, gold, task, config)
}

/// Scores an already parsed response.
pub fn score_parsed(
    parsed: &ParsedResponse,
    gold: &GoldAnswer,
    task: TaskKind,
    config: &RewardConfig,
) -> Result<RewardBreakdown, RewardError> {
    let mut accuracy = accuracy_reward(parsed, gold, task, config)?;
    if config.format_gate && parsed.format_stage < config.format_gate_stage {
        accuracy = 0.0;
    }
    let format = config.format_schedule.reward(parsed.format_stage);
    Ok(RewardBreakdown {
        accuracy,
        format,
        total: config.accuracy_weight * accuracy + config.format_weight * format,
        task,
        format_stage: parsed.format_stage,
    })
}

/// Scores every response against `instance`, preserving input order.
pub fn batch_rewards(
    responses: &[String],
    instance: &TaskInstance,
    config: &RewardConfig,
) -> Result<Vec<RewardBreakdown>, RewardError> {
    responses
        .par_iter()
        .map(|r| total_reward(r, &instance.gold, instance.task, config))
        .collect()
}
