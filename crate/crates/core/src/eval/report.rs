use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{pass_at_k_report, EvalError, JudgeClient, JudgeVerdict, Judgement, PredictionRecord};
use crate::metrics;
use crate::response::{parse_response, ParsedAnswer};
use crate::reward::{accuracy_reward, RewardConfig};
use crate::table::{GoldAnswer, TaskInstance, TaskKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub reward: RewardConfig,
    /// pass@k values to estimate; empty disables the pass@k table.
    pub ks: Vec<usize>,
    /// Maximum concurrent judge calls.
    pub judge_max_in_flight: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            reward: RewardConfig::default(),
            ks: Vec::new(),
            judge_max_in_flight: 4,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TqaMetrics {
    pub count: usize,
    pub em_accuracy: Option<f64>,
    pub judge_adjusted_accuracy: Option<f64>,
    pub judge_calls: usize,
    pub judge_flips: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TfvMetrics {
    pub count: usize,
    pub accuracy: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FfTqaMetrics {
    pub count: usize,
    pub bleu: Option<f64>,
    pub rouge_l: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counts {
    pub evaluated: usize,
    /// Instances without a prediction record.
    pub skipped: usize,
    /// Headline responses below format stage 3 (no parseable answer).
    pub parse_failed: usize,
}

/// Aggregate metrics. All rates are in `[0, 1]`; a rate is `None` when no
/// instance of that task was evaluated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub engine_version: String,
    pub tqa: TqaMetrics,
    pub tfv: TfvMetrics,
    pub fftqa: FfTqaMetrics,
    pub pass_at_k: BTreeMap<usize, f64>,
    pub counts: Counts,
    /// Set when a judge call failed; affected items keep their EM verdict.
    pub judge_unavailable: bool,
}

/// Per-instance scores behind the report, for CSV export.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRow {
    pub id: String,
    pub task: TaskKind,
    pub format_stage: u8,
    pub accuracy: f64,
    pub judge: Option<Judgement>,
    pub bleu: Option<f64>,
    pub rouge_l: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalOutput {
    pub report: EvalReport,
    pub rows: Vec<InstanceRow>,
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Runs `judge` over `jobs` with at most `max_in_flight` concurrent calls.
/// Results come back in job order.
fn run_judge(
    judge: &dyn JudgeClient,
    jobs: &[(String, Vec<String>)],
    max_in_flight: usize,
) -> Vec<Result<JudgeVerdict, super::JudgeError>> {
    let slots: Vec<Mutex<Option<_>>> = jobs.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = max_in_flight.max(1).min(jobs.len());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some((response, gold)) = jobs.get(i) else {
                    break;
                };
                let verdict = judge.judge(response, gold);
                *slots[i].lock().expect("slot lock") = Some(verdict);
            });
        }
    });
    slots
        .into_iter()
        .map(|m| m.into_inner().expect("slot lock").expect("every job ran"))
        .collect()
}

/// Scores the first response of every prediction record. TQA exact-match
/// failures are re-scored by `judge` when one is supplied; a "correct"
/// verdict only affects the judge-adjusted accuracy.
pub fn evaluate(
    instances: &[TaskInstance],
    predictions: &[PredictionRecord],
    config: &EvalConfig,
    judge: Option<&dyn JudgeClient>,
) -> Result<EvalOutput, EvalError> {
    config.reward.validate()?;
    let by_id: HashMap<&str, &TaskInstance> =
        instances.iter().map(|i| (i.id.as_str(), i)).collect();
    let mut seen = HashMap::new();
    for rec in predictions {
        if !by_id.contains_key(rec.instance_id.as_str()) {
            return Err(EvalError::UnknownInstance(rec.instance_id.clone()));
        }
        if seen.insert(rec.instance_id.as_str(), ()).is_some() {
            return Err(EvalError::DuplicatePrediction(rec.instance_id.clone()));
        }
    }

    let policy = &config.reward.normalization;
    let mut rows = Vec::with_capacity(predictions.len());
    let mut counts = Counts {
        evaluated: 0,
        skipped: instances.len() - predictions.len(),
        parse_failed: 0,
    };
    let mut judge_jobs = Vec::new();
    let mut judge_rows = Vec::new();

    for rec in predictions {
        let inst = by_id[rec.instance_id.as_str()];
        let response = rec.responses.first().map(String::as_str).unwrap_or("");
        let parsed = parse_response(response, inst.task);
        let accuracy = accuracy_reward(&parsed, &inst.gold, inst.task, &config.reward)?;
        counts.evaluated += 1;
        if parsed.format_stage < 3 {
            counts.parse_failed += 1;
        }
        let (mut bleu, mut rouge_l) = (None, None);
        if let GoldAnswer::Sentence(reference) = &inst.gold {
            let candidate = match &parsed.parsed_answer {
                Some(ParsedAnswer::Sentence(s)) => s.as_str(),
                _ => "",
            };
            bleu = Some(
                metrics::bleu(candidate, reference, policy, config.reward.bleu_max_n)
                    .map_err(crate::reward::RewardError::from)?,
            );
            rouge_l = Some(
                metrics::rouge_l(candidate, reference, policy)
                    .map_err(crate::reward::RewardError::from)?,
            );
        }
        if let (TaskKind::Tqa, GoldAnswer::ShortList(gold), Some(_)) = (inst.task, &inst.gold, judge) {
            if accuracy < 1.0 {
                judge_jobs.push((response.to_string(), gold.clone()));
                judge_rows.push(rows.len());
            }
        }
        rows.push(InstanceRow {
            id: inst.id.clone(),
            task: inst.task,
            format_stage: parsed.format_stage,
            accuracy,
            judge: None,
            bleu,
            rouge_l,
        });
    }

    let mut judge_unavailable = false;
    if let Some(judge) = judge {
        if !judge_jobs.is_empty() {
            let verdicts = run_judge(judge, &judge_jobs, config.judge_max_in_flight);
            for (row, verdict) in judge_rows.into_iter().zip(verdicts) {
                match verdict {
                    Ok(v) => rows[row].judge = Some(v.judgement),
                    Err(_) => judge_unavailable = true,
                }
            }
        }
    }

    let select = |task: TaskKind| rows.iter().filter(move |r| r.task == task);
    let tqa_em: Vec<f64> = select(TaskKind::Tqa).map(|r| r.accuracy).collect();
    let tqa_adj: Vec<f64> = select(TaskKind::Tqa)
        .map(|r| {
            if r.accuracy == 1.0 || r.judge == Some(Judgement::Correct) {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    let tfv: Vec<f64> = select(TaskKind::Tfv).map(|r| r.accuracy).collect();
    let ff_bleu: Vec<f64> = select(TaskKind::FfTqa).filter_map(|r| r.bleu).collect();
    let ff_rouge: Vec<f64> = select(TaskKind::FfTqa).filter_map(|r| r.rouge_l).collect();

    let pass_at_k = if config.ks.is_empty() {
        BTreeMap::new()
    } else {
        pass_at_k_report(instances, predictions, &config.ks, &config.reward)?
    };

    let report = EvalReport {
        engine_version: crate::ENGINE_VERSION.to_string(),
        tqa: TqaMetrics {
            count: tqa_em.len(),
            em_accuracy: mean(&tqa_em),
            judge_adjusted_accuracy: mean(&tqa_adj),
            judge_calls: judge_jobs.len(),
            judge_flips: select(TaskKind::Tqa)
                .filter(|r| r.accuracy < 1.0 && r.judge == Some(Judgement::Correct))
                .count(),
        },
        tfv: TfvMetrics {
            count: tfv.len(),
            accuracy: mean(&tfv),
        },
        fftqa: FfTqaMetrics {
            count: ff_bleu.len(),
            bleu: mean(&ff_bleu),
            rouge_l: mean(&ff_rouge),
        },
        pass_at_k,
        counts,
        judge_unavailable,
    };
    Ok(EvalOutput { report, rows })
}
