//! Group-normalized advantages, per-token probability ratios, and the
//! token-level objective with decoupled (asymmetric) ratio clipping.
//!
//! For a group of `G` rollouts with rewards `R_i` and per-token log-probs
//! under the old and new policy:
//!
//! ```text
//! A_i   = (R_i − mean(R)) / std(R)                  population std
//! r_it  = exp(new_logp_it − old_logp_it)
//! J     = 1/Σ|o_i| · Σ_i Σ_t min(r_it·A_i, clip(r_it, 1−ε_low, 1+ε_high)·A_i)
//! ```
//!
//! There is no KL penalty term.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GrpoError {
    #[error("group has {0} rollouts, need at least 2")]
    GroupTooSmall(usize),
    #[error("all rewards in the group are equal")]
    DegenerateGroup,
    #[error("advantages have not been computed for this batch")]
    MissingAdvantages,
    #[error("invalid rollout: {0}")]
    InvalidRollout(String),
    #[error("invalid clip config: {0}")]
    InvalidConfig(String),
}

/// What to do with a group whose rewards are all equal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DegenerateGroupMode {
    /// Every advantage is 0, so the group contributes nothing.
    #[default]
    ZeroAdvantages,
    /// Report [`GrpoError::DegenerateGroup`] so the caller can drop the group.
    SkipGroup,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClipConfig {
    pub eps_low: f64,
    pub eps_high: f64,
    pub degenerate_group_mode: DegenerateGroupMode,
}

impl Default for ClipConfig {
    fn default() -> Self {
        Self {
            eps_low: 0.2,
            eps_high: 0.28,
            degenerate_group_mode: DegenerateGroupMode::ZeroAdvantages,
        }
    }
}

impl ClipConfig {
    pub fn validate(&self) -> Result<(), GrpoError> {
        if !(self.eps_low > 0.0 && self.eps_low < 1.0) {
            return Err(GrpoError::InvalidConfig("eps_low must be in (0, 1)".into()));
        }
        if !(self.eps_high > 0.0 && self.eps_high.is_finite()) {
            return Err(GrpoError::InvalidConfig("eps_high must be positive".into()));
        }
        Ok(())
    }

    pub fn lower(&self) -> f64 {
        1.0 - self.eps_low
    }

    pub fn upper(&self) -> f64 {
        1.0 + self.eps_high
    }
}

/// Per-token log-probabilities of one rollout under the sampling (old) and
/// current (new) policy. Natural log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutLogProbs {
    pub old_logp: Vec<f64>,
    pub new_logp: Vec<f64>,
}

impl RolloutLogProbs {
    pub fn new(old_logp: Vec<f64>, new_logp: Vec<f64>) -> Result<Self, GrpoError> {
        let r = Self { old_logp, new_logp };
        r.validate()?;
        Ok(r)
    }

    /// Rollout scored at sampling time, where the new policy equals the old.
    pub fn on_policy(logp: Vec<f64>) -> Result<Self, GrpoError> {
        Self::new(logp.clone(), logp)
    }

    pub fn len(&self) -> usize {
        self.old_logp.len()
    }

    pub fn is_empty(&self) -> bool {
        self.old_logp.is_empty()
    }

    pub fn validate(&self) -> Result<(), GrpoError> {
        if self.old_logp.is_empty() {
            return Err(GrpoError::InvalidRollout("rollout has no tokens".into()));
        }
        if self.old_logp.len() != self.new_logp.len() {
            return Err(GrpoError::InvalidRollout(format!(
                "old/new lengths differ: {} vs {}",
                self.old_logp.len(),
                self.new_logp.len()
            )));
        }
        let ok = |x: &f64| x.is_finite() && *x <= 0.0;
        if !self.old_logp.iter().all(ok) || !self.new_logp.iter().all(ok) {
            return Err(GrpoError::InvalidRollout(
                "log-probabilities must be finite and <= 0".into(),
            ));
        }
        Ok(())
    }
}

/// The rollouts sampled for one prompt, their rewards and advantages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupBatch {
    pub rollouts: Vec<RolloutLogProbs>,
    pub rewards: Vec<f64>,
    pub advantages: Option<Vec<f64>>,
}

impl GroupBatch {
    pub fn new(rollouts: Vec<RolloutLogProbs>, rewards: Vec<f64>) -> Result<Self, GrpoError> {
        if rollouts.len() < 2 {
            return Err(GrpoError::GroupTooSmall(rollouts.len()));
        }
        if rollouts.len() != rewards.len() {
            return Err(GrpoError::InvalidRollout(format!(
                "{} rollouts but {} rewards",
                rollouts.len(),
                rewards.len()
            )));
        }
        for r in &rollouts {
            r.validate()?;
        }
        Ok(Self {
            rollouts,
            rewards,
            advantages: None,
        })
    }

    /// Computes and stores the group-normalized advantages.
    pub fn with_advantages(mut self, mode: DegenerateGroupMode) -> Result<Self, GrpoError> {
        self.advantages = Some(group_advantages(&self.rewards, mode)?);
        Ok(self)
    }

    pub fn total_tokens(&self) -> usize {
        self.rollouts.iter().map(RolloutLogProbs::len).sum()
    }

    pub fn group_size(&self) -> usize {
        self.rollouts.len()
    }

    fn advantages(&self) -> Result<&[f64], GrpoError> {
        match &self.advantages {
            Some(a) if a.len() == self.rollouts.len() => Ok(a),
            Some(a) => Err(GrpoError::InvalidRollout(format!(
                "{} advantages for {} rollouts",
                a.len(),
                self.rollouts.len()
            ))),
            None => Err(GrpoError::MissingAdvantages),
        }
    }
}

/// `(R_i − mean) / std` with the population standard deviation.
pub fn group_advantages(rewards: &[f64], mode: DegenerateGroupMode) -> Result<Vec<f64>, GrpoError> {
    let g = rewards.len();
    if g < 2 {
        return Err(GrpoError::GroupTooSmall(g));
    }
    if rewards.iter().any(|r| !r.is_finite()) {
        return Err(GrpoError::InvalidRollout("rewards must be finite".into()));
    }
    let first = rewards[0];
    if rewards.iter().all(|&r| r == first) {
        return match mode {
            DegenerateGroupMode::ZeroAdvantages => Ok(vec![0.0; g]),
            DegenerateGroupMode::SkipGroup => Err(GrpoError::DegenerateGroup),
        };
    }
    let n = g as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    let var = rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    Ok(rewards.iter().map(|r| (r - mean) / std).collect())
}

/// Probability ratio `π_new / π_old` from log-probabilities.
pub fn ratio(old_logp: f64, new_logp: f64) -> f64 {
    (new_logp - old_logp).exp()
}

/// The per-token surrogate `min(r·A, clip(r)·A)` and whether the unclipped
/// branch attains the minimum (ties count as unclipped).
fn token_term(r: f64, adv: f64, clip: &ClipConfig) -> (f64, bool) {
    let unclipped = r * adv;
    let clipped = r.clamp(clip.lower(), clip.upper()) * adv;
    if unclipped <= clipped {
        (unclipped, true)
    } else {
        (clipped, false)
    }
}

/// Token-level clipped objective for one group, normalized by the group's
/// total token count.
pub fn grpo_objective(batch: &GroupBatch, clip: &ClipConfig) -> Result<f64, GrpoError> {
    let adv = batch.advantages()?;
    let n = batch.total_tokens() as f64;
    let mut sum = 0.0;
    for (rollout, &a) in batch.rollouts.iter().zip(adv) {
        for (&old, &new) in rollout.old_logp.iter().zip(&rollout.new_logp) {
            sum += token_term(ratio(old, new), a, clip).0;
        }
    }
    Ok(sum / n)
}

/// `∂J/∂new_logp` per token, aligned with the rollouts. Tokens where the
/// clipped branch is active get zero gradient.
pub fn grpo_grad_new_logp(
    batch: &GroupBatch,
    clip: &ClipConfig,
) -> Result<Vec<Vec<f64>>, GrpoError> {
    let adv = batch.advantages()?;
    let n = batch.total_tokens() as f64;
    Ok(batch
        .rollouts
        .iter()
        .zip(adv)
        .map(|(rollout, &a)| {
            rollout
                .old_logp
                .iter()
                .zip(&rollout.new_logp)
                .map(|(&old, &new)| {
                    let r = ratio(old, new);
                    match token_term(r, a, clip) {
                        (_, true) => r * a / n,
                        (_, false) => 0.0,
                    }
                })
                .collect()
        })
        .collect())
}
