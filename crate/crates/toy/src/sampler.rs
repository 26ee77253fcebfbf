use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::policy::Policy;
use crate::vocab::{detokenize, Token, ANSWER_CLOSE, EOS, VOCAB_SIZE};

/// One sampled response with the policy's log-probability of every token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rollout {
    pub tokens: Vec<Token>,
    /// Untempered `log π(token_t | prefix)` under the sampling policy.
    pub logp: Vec<f64>,
}

impl Rollout {
    pub fn text(&self) -> String {
        detokenize(&self.tokens)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplingParams {
    /// `0` decodes greedily.
    pub temperature: f64,
    pub top_p: f64,
    pub max_len: usize,
    /// Also end a response right after its first `</answer>`.
    pub stop_at_answer_close: bool,
}

/// Picks the next token from log-probabilities `logp`.
fn choose(logp: &[f64], params: &SamplingParams, rng: &mut impl Rng, probs: &mut Vec<f64>) -> Token {
    if params.temperature <= 0.0 {
        let mut best = 0;
        for (i, &l) in logp.iter().enumerate() {
            if l > logp[best] {
                best = i;
            }
        }
        return best;
    }
    let max = logp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    probs.clear();
    probs.extend(logp.iter().map(|l| ((l - max) / params.temperature).exp()));

    if params.top_p < 1.0 {
        let mut order: Vec<usize> = (0..probs.len()).collect();
        order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));
        let total: f64 = probs.iter().sum();
        let mut kept = 0.0;
        let mut cut = order.len();
        for (n, &i) in order.iter().enumerate() {
            kept += probs[i] / total;
            if kept >= params.top_p {
                cut = n + 1;
                break;
            }
        }
        for &i in &order[cut..] {
            probs[i] = 0.0;
        }
    }

    let total: f64 = probs.iter().sum();
    let mut x = rng.random_range(0.0..total);
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            if x < p {
                return i;
            }
            x -= p;
            last = i;
        }
    }
    last
}

/// Samples one response, stopping after [`EOS`], the optional stop tag or
/// `max_len` tokens.
pub fn sample_one<P: Policy>(
    policy: &P,
    prompt: &P::Prompt,
    params: &SamplingParams,
    rng: &mut impl Rng,
) -> Rollout {
    let mut tokens = Vec::new();
    let mut logps = Vec::new();
    let mut dist = vec![0.0; VOCAB_SIZE];
    let mut scratch = Vec::with_capacity(VOCAB_SIZE);
    while tokens.len() < params.max_len {
        policy.next_log_probs(prompt, &tokens, &mut dist);
        let t = choose(&dist, params, rng, &mut scratch);
        tokens.push(t);
        logps.push(dist[t]);
        if t == EOS || (params.stop_at_answer_close && t == ANSWER_CLOSE) {
            break;
        }
    }
    Rollout {
        tokens,
        logp: logps,
    }
}

/// Samples `g` independent responses to one prompt.
pub fn sample_rollouts<P: Policy>(
    policy: &P,
    prompt: &P::Prompt,
    g: usize,
    params: &SamplingParams,
    rng: &mut impl Rng,
) -> Vec<Rollout> {
    (0..g).map(|_| sample_one(policy, prompt, params, rng)).collect()
}
