use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use tablerl_core::grpo::{grpo_grad_new_logp, grpo_objective};
use tablerl_core::reward::{accuracy_reward, total_reward};
use tablerl_core::{
    parse_response, ClipConfig, DegenerateGroupMode, GroupBatch, GrpoError, RewardConfig,
    RewardError, RolloutLogProbs,
};

use crate::policy::{encode_prompt, Policy, PolicyShape, TinyPolicy};
use crate::sampler::{sample_rollouts, Rollout, SamplingParams};
use crate::task::{generate_task, Template, TemplateMix, TinyTabTask};

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("invalid train config: {0}")]
    Config(String),
    #[error("prompt has {len} items, limit is {max}")]
    PromptTooLong { len: usize, max: usize },
    #[error(transparent)]
    Grpo(#[from] GrpoError),
    #[error(transparent)]
    Reward(#[from] RewardError),
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub group_size: usize,
    pub groups_per_step: usize,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub max_prompt_tokens: usize,
    pub max_response_tokens: usize,
    pub sample_temperature: f64,
    pub eval_temperature: f64,
    pub eval_top_p: f64,
    /// Treat `</answer>` as a stop sequence, as rollout engines usually do.
    pub stop_at_answer_close: bool,
    pub total_steps: usize,
    pub seed: u64,
    /// Optimization passes over each sampled batch; passes after the first
    /// see ratios away from 1, so clipping can bind.
    pub inner_epochs: usize,
    pub template_mix: TemplateMix,
    /// Held-out evaluation every this many steps; 0 disables it.
    pub eval_every: usize,
    pub eval_tasks: usize,
    /// Stop once held-out accuracy exceeds this; 0 never stops early.
    pub early_stop_accuracy: f64,
    #[serde(flatten)]
    pub shape: PolicyShape,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            group_size: 16,
            groups_per_step: 16,
            learning_rate: 3e-3,
            optimizer: OptimizerKind::Adam,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            max_prompt_tokens: 256,
            max_response_tokens: 64,
            sample_temperature: 1.0,
            eval_temperature: 0.6,
            eval_top_p: 1.0,
            stop_at_answer_close: true,
            total_steps: 2000,
            seed: 0,
            inner_epochs: 2,
            template_mix: TemplateMix::default(),
            eval_every: 50,
            eval_tasks: 256,
            early_stop_accuracy: 0.0,
            shape: PolicyShape::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.to_string()));
        if self.group_size < 2 {
            return bad("group_size must be at least 2");
        }
        if self.groups_per_step == 0 || self.inner_epochs == 0 {
            return bad("groups_per_step and inner_epochs must be positive");
        }
        if self.max_prompt_tokens == 0 || self.max_response_tokens == 0 {
            return bad("token limits must be positive");
        }
        if !(self.sample_temperature > 0.0 && self.eval_temperature > 0.0) {
            return bad("temperatures must be positive");
        }
        if !(self.eval_top_p > 0.0 && self.eval_top_p <= 1.0) {
            return bad("eval_top_p must lie in (0, 1]");
        }
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return bad("learning_rate must be finite and non-negative");
        }
        if !((0.0..1.0).contains(&self.adam_beta1) && (0.0..1.0).contains(&self.adam_beta2)) {
            return bad("adam betas must lie in [0, 1)");
        }
        if self.shape.embed_dim == 0 || self.shape.hidden == 0 || self.shape.heads == 0 {
            return bad("policy dimensions must be positive");
        }
        self.template_mix.validate().map_err(TrainError::Config)
    }

    fn sampling(&self) -> SamplingParams {
        SamplingParams {
            temperature: self.sample_temperature,
            top_p: 1.0,
            max_len: self.max_response_tokens,
            stop_at_answer_close: self.stop_at_answer_close,
        }
    }

    pub fn eval_sampling(&self) -> SamplingParams {
        SamplingParams {
            temperature: self.eval_temperature,
            top_p: self.eval_top_p,
            max_len: self.max_response_tokens,
            stop_at_answer_close: self.stop_at_answer_close,
        }
    }
}

const TRAIN_TASKS: u64 = 1;
const TRAIN_SAMPLES: u64 = 2;
const EVAL_TASKS: u64 = 3;
const EVAL_SAMPLES: u64 = 4;
const INIT: u64 = 5;

/// Seed for item `index` of stream `stream` under the run seed.
pub fn derive_seed(seed: u64, stream: u64, index: u64) -> u64 {
    let mut x = seed
        ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        ^ index.wrapping_mul(0xD1B5_4A32_D192_ED03);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

pub fn init_policy(cfg: &TrainConfig) -> TinyPolicy {
    TinyPolicy::new(cfg.shape, derive_seed(cfg.seed, INIT, 0))
}

pub fn train_tasks(cfg: &TrainConfig, step: usize) -> Vec<TinyTabTask> {
    (0..cfg.groups_per_step)
        .map(|i| {
            let index = (step * cfg.groups_per_step + i) as u64;
            generate_task(derive_seed(cfg.seed, TRAIN_TASKS, index), &cfg.template_mix)
        })
        .collect()
}

/// Held-out tasks, disjoint in seed stream from the training tasks.
pub fn eval_tasks(cfg: &TrainConfig, mix: &TemplateMix) -> Vec<TinyTabTask> {
    (0..cfg.eval_tasks)
        .map(|i| generate_task(derive_seed(cfg.seed, EVAL_TASKS, i as u64), mix))
        .collect()
}

/// Gradient-ascent state carried across steps.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimizer {
    kind: OptimizerKind,
    lr: f64,
    beta1: f64,
    beta2: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Optimizer {
    const EPS: f64 = 1e-8;

    pub fn new(cfg: &TrainConfig, param_count: usize) -> Self {
        let moments = if cfg.optimizer == OptimizerKind::Adam { param_count } else { 0 };
        Self {
            kind: cfg.optimizer,
            lr: cfg.learning_rate,
            beta1: cfg.adam_beta1,
            beta2: cfg.adam_beta2,
            m: vec![0.0; moments],
            v: vec![0.0; moments],
            t: 0,
        }
    }

    /// Moves `policy` along the ascent direction `grad`.
    pub fn step(&mut self, policy: &mut TinyPolicy, grad: &[f64]) {
        match self.kind {
            OptimizerKind::Sgd => policy.apply_update(grad, self.lr),
            OptimizerKind::Adam => {
                self.t += 1;
                let c1 = 1.0 - self.beta1.powi(self.t);
                let c2 = 1.0 - self.beta2.powi(self.t);
                let mut update = vec![0.0; grad.len()];
                for (i, &g) in grad.iter().enumerate() {
                    self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
                    self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
                    update[i] = (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + Self::EPS);
                }
                policy.apply_update(&update, self.lr);
            }
        }
    }
}

/// Statistics of one training step, measured on the rollouts sampled from
/// the pre-step policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepStats {
    pub step: usize,
    pub mean_reward: f64,
    pub mean_accuracy: f64,
    pub mean_format: f64,
    pub mean_response_len: f64,
    /// Objective at the sampling policy, averaged over used groups.
    pub objective: f64,
    /// Groups that contributed to the update.
    pub groups_used: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval_accuracy: Option<f64>,
}

struct Group {
    prompt: crate::policy::PreparedPrompt,
    rollouts: Vec<Rollout>,
    batch: GroupBatch,
}

/// One GRPO step over `tasks`: sample `group_size` rollouts per task from the
/// current policy, score them, standardize rewards per group, then take
/// `inner_epochs` ascent steps on the clipped objective, averaged over groups.
pub fn train_step(
    policy: &mut TinyPolicy,
    opt: &mut Optimizer,
    tasks: &[TinyTabTask],
    step: usize,
    cfg: &TrainConfig,
    reward_cfg: &RewardConfig,
    clip: &ClipConfig,
) -> Result<StepStats, TrainError> {
    let sampling = cfg.sampling();
    let mut groups = Vec::with_capacity(tasks.len());
    let (mut sum_reward, mut sum_acc, mut sum_fmt, mut sum_len, mut count) = (0.0, 0.0, 0.0, 0.0, 0);

    for (i, task) in tasks.iter().enumerate() {
        let items = task.prompt_items();
        if items.len() > cfg.max_prompt_tokens {
            return Err(TrainError::PromptTooLong {
                len: items.len(),
                max: cfg.max_prompt_tokens,
            });
        }
        let prompt = policy.prepare_features(encode_prompt(&items));
        let index = (step * tasks.len() + i) as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, TRAIN_SAMPLES, index));
        let rollouts = sample_rollouts(policy, &prompt, cfg.group_size, &sampling, &mut rng);
        let mut rewards = Vec::with_capacity(rollouts.len());
        for r in &rollouts {
            let b = total_reward(&r.text(), &task.instance.gold, task.instance.task, reward_cfg)?;
            sum_reward += b.total;
            sum_acc += b.accuracy;
            sum_fmt += b.format;
            sum_len += r.len() as f64;
            count += 1;
            rewards.push(b.total);
        }
        let logps = rollouts
            .iter()
            .map(|r| RolloutLogProbs::on_policy(r.logp.clone()))
            .collect::<Result<Vec<_>, _>>()?;
        let batch = match GroupBatch::new(logps, rewards)?.with_advantages(clip.degenerate_group_mode) {
            Ok(b) => b,
            Err(GrpoError::DegenerateGroup) if clip.degenerate_group_mode == DegenerateGroupMode::SkipGroup => {
                continue
            }
            Err(e) => return Err(e.into()),
        };
        groups.push(Group {
            prompt,
            rollouts,
            batch,
        });
    }

    let mut objective = 0.0;
    let mut grad = vec![0.0; policy.param_count()];
    for epoch in 0..cfg.inner_epochs {
        grad.fill(0.0);
        for g in &mut groups {
            if epoch > 0 {
                g.prompt = policy.prepare_features(g.prompt.features.clone());
                for (lp, r) in g.batch.rollouts.iter_mut().zip(&g.rollouts) {
                    lp.new_logp = policy.sequence_log_probs(&g.prompt, &r.tokens);
                }
            } else {
                objective += grpo_objective(&g.batch, clip)?;
            }
            if g.batch.advantages.as_ref().is_some_and(|a| a.iter().all(|&x| x == 0.0)) {
                continue;
            }
            let coeffs = grpo_grad_new_logp(&g.batch, clip)?;
            let seqs: Vec<(&[usize], &[f64])> = g
                .rollouts
                .iter()
                .zip(&coeffs)
                .map(|(r, c)| (r.tokens.as_slice(), c.as_slice()))
                .collect();
            policy.accumulate_grad(&g.prompt, &seqs, &mut grad);
        }
        if !groups.is_empty() {
            let scale = 1.0 / groups.len() as f64;
            grad.iter_mut().for_each(|g| *g *= scale);
            opt.step(policy, &grad);
        }
    }

    let n = count.max(1) as f64;
    Ok(StepStats {
        step,
        mean_reward: sum_reward / n,
        mean_accuracy: sum_acc / n,
        mean_format: sum_fmt / n,
        mean_response_len: sum_len / n,
        objective: if groups.is_empty() { 0.0 } else { objective / groups.len() as f64 },
        groups_used: groups.len(),
        eval_accuracy: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateScore {
    pub count: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyEvalReport {
    pub count: usize,
    pub accuracy: f64,
    pub mean_format_stage: f64,
    pub mean_response_len: f64,
    pub by_template: BTreeMap<String, TemplateScore>,
}

/// One rollout per task at the evaluation temperature and top-p, scored by
/// accuracy alone. Deterministic given `cfg.seed`.
pub fn evaluate_policy<P: Policy>(
    policy: &P,
    tasks: &[TinyTabTask],
    cfg: &TrainConfig,
    reward_cfg: &RewardConfig,
) -> Result<ToyEvalReport, TrainError> {
    if tasks.is_empty() {
        return Err(TrainError::Config("evaluation set is empty".into()));
    }
    let params = cfg.eval_sampling();
    let mut per: BTreeMap<Template, (usize, f64)> = BTreeMap::new();
    let (mut acc, mut stage, mut len) = (0.0, 0.0, 0.0);
    for (i, task) in tasks.iter().enumerate() {
        let prompt = policy.prepare(task);
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, EVAL_SAMPLES, i as u64));
        let r = &sample_rollouts(policy, &prompt, 1, &params, &mut rng)[0];
        let parsed = parse_response(&r.text(), task.instance.task);
        let a = accuracy_reward(&parsed, &task.instance.gold, task.instance.task, reward_cfg)?;
        acc += a;
        stage += f64::from(parsed.format_stage);
        len += r.len() as f64;
        let e = per.entry(task.question.template).or_default();
        e.0 += 1;
        e.1 += a;
    }
    let n = tasks.len() as f64;
    Ok(ToyEvalReport {
        count: tasks.len(),
        accuracy: acc / n,
        mean_format_stage: stage / n,
        mean_response_len: len / n,
        by_template: per
            .into_iter()
            .map(|(t, (c, a))| {
                (
                    t.as_str().to_string(),
                    TemplateScore {
                        count: c,
                        accuracy: a / c as f64,
                    },
                )
            })
            .collect(),
    })
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub policy: TinyPolicy,
    pub curve: Vec<StepStats>,
    pub initial_eval: ToyEvalReport,
    pub final_eval: ToyEvalReport,
}

/// Runs up to `cfg.total_steps` steps from a seeded initialization,
/// evaluating on held-out tasks of the same mix every `cfg.eval_every` steps.
/// `on_step` sees every curve point as it is produced.
pub fn train(
    cfg: &TrainConfig,
    reward_cfg: &RewardConfig,
    clip: &ClipConfig,
    mut on_step: impl FnMut(&StepStats),
) -> Result<TrainOutcome, TrainError> {
    cfg.validate()?;
    reward_cfg.validate()?;
    clip.validate()?;
    let mut policy = init_policy(cfg);
    let mut opt = Optimizer::new(cfg, policy.param_count());
    let held_out = eval_tasks(cfg, &cfg.template_mix);
    let initial_eval = evaluate_policy(&policy, &held_out, cfg, reward_cfg)?;
    let mut last_eval = initial_eval.clone();
    let mut curve = Vec::with_capacity(cfg.total_steps);
    for step in 1..=cfg.total_steps {
        let tasks = train_tasks(cfg, step);
        let mut stats = train_step(&mut policy, &mut opt, &tasks, step, cfg, reward_cfg, clip)?;
        let evaluate_now = (cfg.eval_every > 0 && step % cfg.eval_every == 0) || step == cfg.total_steps;
        if evaluate_now {
            last_eval = evaluate_policy(&policy, &held_out, cfg, reward_cfg)?;
            stats.eval_accuracy = Some(last_eval.accuracy);
        }
        on_step(&stats);
        curve.push(stats);
        if evaluate_now && cfg.early_stop_accuracy > 0.0 && last_eval.accuracy > cfg.early_stop_accuracy {
            break;
        }
    }
    Ok(TrainOutcome {
        policy,
        curve,
        initial_eval,
        final_eval: last_eval,
    })
}

/// Writes one JSON record per line.
pub fn write_curve(path: &Path, curve: &[StepStats]) -> Result<(), TrainError> {
    let io = |source| TrainError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    for s in curve {
        let line = serde_json::to_string(s).expect("stats serialize");
        writeln!(f, "{line}").map_err(io)?;
    }
    f.flush().map_err(io)
}

pub fn read_curve(path: &Path) -> Result<Vec<StepStats>, TrainError> {
    let text = std::fs::read_to_string(path).map_err(|source| TrainError::Io {
        path: path.display().to_string(),
        source,
    })?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            serde_json::from_str(l).map_err(|e| TrainError::Config(format!("bad curve line: {e}")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::GoldPolicy;

    fn small() -> TrainConfig {
        TrainConfig {
            group_size: 4,
            groups_per_step: 3,
            total_steps: 3,
            max_response_tokens: 16,
            eval_tasks: 8,
            eval_every: 0,
            shape: PolicyShape {
                embed_dim: 4,
                window: 2,
                hidden: 8,
                heads: 1,
                emitted_flags: false,
                logit_cap: 0.0,
                copy_digits: false,
            },
            ..TrainConfig::default()
        }
    }

    #[test]
    fn constant_rewards_leave_parameters_unchanged() {
        let cfg = small();
        let reward = RewardConfig {
            accuracy_weight: 0.0,
            format_weight: 0.0,
            ..RewardConfig::default()
        };
        let mut policy = init_policy(&cfg);
        let mut opt = Optimizer::new(&cfg, policy.param_count());
        let before = policy.clone();
        let stats = train_step(&mut policy, &mut opt, &train_tasks(&cfg, 1), 1, &cfg, &reward, &ClipConfig::default()).unwrap();
        assert_eq!(policy, before);
        assert_eq!(stats.objective, 0.0);
        assert_eq!(stats.groups_used, 3);

        let skip = ClipConfig {
            degenerate_group_mode: DegenerateGroupMode::SkipGroup,
            ..ClipConfig::default()
        };
        let stats = train_step(&mut policy, &mut opt, &train_tasks(&cfg, 1), 1, &cfg, &reward, &skip).unwrap();
        assert_eq!(stats.groups_used, 0);
        assert_eq!(policy, before);
    }

    #[test]
    fn training_is_bit_reproducible() {
        let cfg = small();
        let run = || train(&cfg, &RewardConfig::default(), &ClipConfig::default(), |_| {}).unwrap();
        let (a, b) = (run(), run());
        assert_eq!(a.policy, b.policy);
        assert_eq!(a.curve, b.curve);
        assert_ne!(a.policy, init_policy(&cfg));
    }

    #[test]
    fn gold_policy_scores_perfectly() {
        let cfg = TrainConfig {
            eval_tasks: 40,
            template_mix: TemplateMix::uniform(),
            ..TrainConfig::default()
        };
        let tasks = eval_tasks(&cfg, &cfg.template_mix);
        let r = evaluate_policy(&GoldPolicy, &tasks, &cfg, &RewardConfig::default()).unwrap();
        assert_eq!(r.accuracy, 1.0);
        assert_eq!(r.mean_format_stage, 4.0);
    }

    #[test]
    fn untrained_policy_is_near_chance() {
        let cfg = TrainConfig::default();
        let tasks = eval_tasks(&cfg, &TemplateMix::only(Template::CellLookup));
        let r = evaluate_policy(&init_policy(&cfg), &tasks, &cfg, &RewardConfig::default()).unwrap();
        assert!(r.accuracy <= 0.1, "{}", r.accuracy);
        let again = evaluate_policy(&init_policy(&cfg), &tasks, &cfg, &RewardConfig::default()).unwrap();
        assert_eq!(r, again);
    }

    #[test]
    fn curve_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("curve.jsonl");
        let out = train(&small(), &RewardConfig::default(), &ClipConfig::default(), |_| {}).unwrap();
        write_curve(&path, &out.curve).unwrap();
        assert_eq!(read_curve(&path).unwrap(), out.curve);
        let first: serde_json::Value =
            serde_json::from_str(std::fs::read_to_string(&path).unwrap().lines().next().unwrap()).unwrap();
        for key in ["step", "mean_reward", "mean_accuracy", "mean_format", "mean_response_len", "objective"] {
            assert!(first.get(key).is_some(), "{key}");
        }
    }

    #[test]
    fn config_validation() {
        assert!(TrainConfig::default().validate().is_ok());
        let bad = TrainConfig {
            group_size: 1,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = TrainConfig {
            eval_top_p: 0.0,
            ..TrainConfig::default()
        };
        assert!(bad.validate().is_err());
    }
}
