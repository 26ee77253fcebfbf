//! A tiny autoregressive policy over the toy vocabulary.
//!
//! The prompt is read once per task. Each head scores every table cell with a
//! bilinear form between question features and cell key features, and the
//! softmax-weighted cell values form a pooled encoding. Each output step then
//! applies one tanh layer to the embeddings of the previous `window` tokens,
//! the pooled encoding and the question features, followed by a softmax over
//! the vocabulary. Optionally the step also sees which tokens the response
//! has emitted so far, a cheap stand-in for state a longer context would hold.
//! An optional copy path adds each head's pooled tens and units digits to the
//! digit logits, scaled per previous token, so the policy can point at a cell.
//!
//! All parameters live in one flat vector. Gradients are hand-written.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::task::{PromptItem, Template, TinyTabTask, MAX_COLS, MAX_ROWS};
use crate::vocab::{conformant_tokens, Token, BOS, DIGIT_0, VOCAB_SIZE};

/// Question features: template, row, column, second column, bias.
pub const QDIM: usize = Template::ALL.len() + MAX_ROWS + 2 * MAX_COLS + 1;
/// Cell key features: row, column, descending rank, ascending rank, bias.
pub const KDIM: usize = MAX_ROWS + MAX_COLS + 2 * MAX_ROWS + 1;
/// Cell value features: tens digit (or none), units digit, magnitude.
pub const VDIM: usize = 11 + 10 + 1;
/// Previous-token contexts of the copy path: every digit maps to one context.
const COPY_CONTEXTS: usize = VOCAB_SIZE + 1 - 9;

/// Anything that can drive the sampler.
pub trait Policy {
    type Prompt;

    fn prepare(&self, task: &TinyTabTask) -> Self::Prompt;

    /// Writes the log-probabilities of the next token after `context`.
    fn next_log_probs(&self, prompt: &Self::Prompt, context: &[Token], out: &mut [f64]);
}

/// Parameter-free encoding of a task's prompt items.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskFeatures {
    pub query: [f64; QDIM],
    pub keys: Vec<[f64; KDIM]>,
    pub values: Vec<[f64; VDIM]>,
}

/// Encodes prompt items. Count targets are not represented.
pub fn encode_prompt(items: &[PromptItem]) -> TaskFeatures {
    let mut query = [0.0; QDIM];
    query[QDIM - 1] = 1.0;
    let t0 = 0;
    let r0 = Template::ALL.len();
    let c0 = r0 + MAX_ROWS;
    let c20 = c0 + MAX_COLS;
    let mut cells = Vec::new();
    for item in items {
        match *item {
            PromptItem::Template(t) => query[t0 + t.index()] = 1.0,
            PromptItem::Row(r) => query[r0 + r] = 1.0,
            PromptItem::Col(c) => query[c0 + c] = 1.0,
            PromptItem::Col2(c) => query[c20 + c] = 1.0,
            PromptItem::Value(_) => {}
            PromptItem::Cell { row, col, value } => cells.push((row, col, value)),
        }
    }

    let mut keys = Vec::with_capacity(cells.len());
    let mut values = Vec::with_capacity(cells.len());
    for &(row, col, value) in &cells {
        let mut column: Vec<u8> = cells
            .iter()
            .filter(|c| c.1 == col)
            .map(|c| c.2)
            .collect();
        column.sort_unstable();
        column.dedup();
        let above = column.iter().filter(|&&v| v > value).count();
        let below = column.iter().filter(|&&v| v < value).count();

        let mut k = [0.0; KDIM];
        k[row] = 1.0;
        k[MAX_ROWS + col] = 1.0;
        k[MAX_ROWS + MAX_COLS + above.min(MAX_ROWS - 1)] = 1.0;
        k[2 * MAX_ROWS + MAX_COLS + below.min(MAX_ROWS - 1)] = 1.0;
        k[KDIM - 1] = 1.0;
        keys.push(k);

        let mut v = [0.0; VDIM];
        let tens = if value >= 10 { usize::from(value / 10) } else { 10 };
        v[tens] = 1.0;
        v[11 + usize::from(value % 10)] = 1.0;
        v[VDIM - 1] = f64::from(value) / 100.0;
        values.push(v);
    }
    TaskFeatures {
        query,
        keys,
        values,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PolicyShape {
    pub embed_dim: usize,
    pub window: usize,
    pub hidden: usize,
    pub heads: usize,
    /// Feed one flag per vocabulary token: has it appeared in the response so far.
    pub emitted_flags: bool,
    /// Soft cap on output logits, `c · tanh(logit / c)`; 0 disables it.
    pub logit_cap: f64,
    /// Add the pooled cell digits to the digit logits.
    pub copy_digits: bool,
}

impl Default for PolicyShape {
    fn default() -> Self {
        Self {
            embed_dim: 16,
            window: 4,
            hidden: 64,
            heads: 2,
            emitted_flags: true,
            logit_cap: 3.5,
            copy_digits: true,
        }
    }
}

impl PolicyShape {
    pub fn input_dim(&self) -> usize {
        self.window * self.embed_dim + self.flag_dim() + self.heads * VDIM + QDIM
    }

    fn flag_dim(&self) -> usize {
        if self.emitted_flags {
            VOCAB_SIZE
        } else {
            0
        }
    }

    fn offsets(&self) -> Offsets {
        let emb = 0;
        let attn = emb + (VOCAB_SIZE + 1) * self.embed_dim;
        let w1 = attn + self.heads * QDIM * KDIM;
        let b1 = w1 + self.hidden * self.input_dim();
        let w2 = b1 + self.hidden;
        let b2 = w2 + VOCAB_SIZE * self.hidden;
        let copy = b2 + VOCAB_SIZE;
        let copy_len = if self.copy_digits { COPY_CONTEXTS * self.heads * 2 } else { 0 };
        Offsets {
            emb,
            attn,
            w1,
            b1,
            w2,
            b2,
            copy,
            len: copy + copy_len,
        }
    }

    pub fn param_count(&self) -> usize {
        self.offsets().len
    }
}

#[derive(Debug, Clone, Copy)]
struct Offsets {
    emb: usize,
    attn: usize,
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
    /// Copy scales, `COPY_CONTEXTS × heads × {tens, units}`.
    copy: usize,
    len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TinyPolicy {
    shape: PolicyShape,
    params: Vec<f64>,
}

/// A task prompt read by a [`TinyPolicy`]: features plus attention state.
#[derive(Debug, Clone)]
pub struct PreparedPrompt {
    pub features: TaskFeatures,
    /// Attention weights, `heads × cells`.
    pub attention: Vec<f64>,
    /// Pooled cell values, `heads × VDIM`.
    pub pooled: Vec<f64>,
    /// Hidden pre-activation from the pooled values, question and bias.
    base: Vec<f64>,
    /// First-layer projection of every token embedding at every window
    /// slot, `window × (VOCAB_SIZE + 1) × hidden`.
    token_proj: Vec<f64>,
    /// First-layer column of each emitted-token flag, `flags × hidden`.
    flag_proj: Vec<f64>,
}

/// Per-step activations kept for the backward pass.
struct StepCache {
    h: Vec<f64>,
    /// Capped logits before normalization.
    logits: Vec<f64>,
    logp: Vec<f64>,
}

impl StepCache {
    fn new(shape: &PolicyShape) -> Self {
        Self {
            h: vec![0.0; shape.hidden],
            logits: vec![0.0; VOCAB_SIZE],
            logp: vec![0.0; VOCAB_SIZE],
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for i in 0..4 {
            acc[i] += x[i] * y[i];
        }
    }
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Which tokens occur in `context`.
fn emitted(context: &[Token]) -> [bool; VOCAB_SIZE] {
    let mut seen = [false; VOCAB_SIZE];
    for &t in context {
        seen[t] = true;
    }
    seen
}

/// Token at window slot `w` (oldest first) for a step after `context`.
fn window_token(window: usize, context: &[Token], w: usize) -> Token {
    let back = window - w;
    if context.len() >= back {
        context[context.len() - back]
    } else {
        BOS
    }
}

fn log_softmax_in_place(x: &mut [f64]) {
    let max = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + x.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    for v in x {
        *v -= lse;
    }
}

impl TinyPolicy {
    /// Random initialization. Attention weights start at zero, so every
    /// head initially averages all cells. Copy scales start at one.
    pub fn new(shape: PolicyShape, seed: u64) -> Self {
        let o = shape.offsets();
        let mut params = vec![0.0; o.len];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut fill = |range: std::ops::Range<usize>, std: f64| {
            let normal = Normal::new(0.0, std).expect("positive std");
            for p in &mut params[range] {
                *p = normal.sample(&mut rng);
            }
        };
        fill(o.emb..o.attn, 1.0);
        fill(o.w1..o.b1, 1.0 / (shape.input_dim() as f64).sqrt());
        fill(o.w2..o.b2, 0.5 / (shape.hidden as f64).sqrt());
        params[o.copy..o.len].fill(1.0);
        Self { shape, params }
    }

    pub fn from_params(shape: PolicyShape, params: Vec<f64>) -> Result<Self, String> {
        if params.len() != shape.param_count() {
            return Err(format!(
                "expected {} parameters, got {}",
                shape.param_count(),
                params.len()
            ));
        }
        Ok(Self { shape, params })
    }

    pub fn shape(&self) -> &PolicyShape {
        &self.shape
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    /// Gradient ascent: `θ += lr · grad`.
    pub fn apply_update(&mut self, grad: &[f64], lr: f64) {
        for (p, g) in self.params.iter_mut().zip(grad) {
            *p += lr * g;
        }
    }

    pub fn prepare_features(&self, features: TaskFeatures) -> PreparedPrompt {
        let o = self.shape.offsets();
        let n = features.keys.len();
        let heads = self.shape.heads;
        let mut attention = vec![0.0; heads * n];
        let mut pooled = vec![0.0; heads * VDIM];
        for h in 0..heads {
            let b = &self.params[o.attn + h * QDIM * KDIM..o.attn + (h + 1) * QDIM * KDIM];
            let mut qb = [0.0; KDIM];
            for (a, &qa) in features.query.iter().enumerate() {
                if qa != 0.0 {
                    for (j, x) in qb.iter_mut().enumerate() {
                        *x += qa * b[a * KDIM + j];
                    }
                }
            }
            let scores = &mut attention[h * n..(h + 1) * n];
            for (s, k) in scores.iter_mut().zip(&features.keys) {
                *s = qb.iter().zip(k).map(|(x, y)| x * y).sum();
            }
            log_softmax_in_place(scores);
            for s in scores.iter_mut() {
                *s = s.exp();
            }
            let out = &mut pooled[h * VDIM..(h + 1) * VDIM];
            for (alpha, v) in scores.iter().zip(&features.values) {
                for (p, x) in out.iter_mut().zip(v) {
                    *p += alpha * x;
                }
            }
        }
        let s = &self.shape;
        let d = s.embed_dim;
        let in_dim = s.input_dim();
        let p0 = s.window * d + s.flag_dim();
        let w1 = &self.params[o.w1..o.b1];
        let mut tail = pooled.clone();
        tail.extend_from_slice(&features.query);
        let base: Vec<f64> = (0..s.hidden)
            .map(|k| dot(&w1[k * in_dim + p0..(k + 1) * in_dim], &tail) + self.params[o.b1 + k])
            .collect();
        let mut token_proj = vec![0.0; s.window * (VOCAB_SIZE + 1) * s.hidden];
        for w in 0..s.window {
            for tok in 0..=VOCAB_SIZE {
                let e = &self.params[o.emb + tok * d..o.emb + (tok + 1) * d];
                let out = &mut token_proj[(w * (VOCAB_SIZE + 1) + tok) * s.hidden..][..s.hidden];
                for (k, x) in out.iter_mut().enumerate() {
                    *x = dot(&w1[k * in_dim + w * d..k * in_dim + (w + 1) * d], e);
                }
            }
        }
        let f0 = s.window * d;
        let mut flag_proj = vec![0.0; s.flag_dim() * s.hidden];
        for (tok, out) in flag_proj.chunks_exact_mut(s.hidden).enumerate() {
            for (k, x) in out.iter_mut().enumerate() {
                *x = w1[k * in_dim + f0 + tok];
            }
        }
        PreparedPrompt {
            features,
            attention,
            pooled,
            base,
            token_proj,
            flag_proj,
        }
    }

    fn forward_step(&self, prompt: &PreparedPrompt, context: &[Token], cache: &mut StepCache) {
        let s = &self.shape;
        let o = s.offsets();
        cache.h.copy_from_slice(&prompt.base);
        for w in 0..s.window {
            let tok = window_token(s.window, context, w);
            let proj = &prompt.token_proj[(w * (VOCAB_SIZE + 1) + tok) * s.hidden..][..s.hidden];
            for (h, p) in cache.h.iter_mut().zip(proj) {
                *h += p;
            }
        }
        if s.emitted_flags {
            for (tok, _) in emitted(context).iter().enumerate().filter(|(_, e)| **e) {
                for (h, p) in cache.h.iter_mut().zip(&prompt.flag_proj[tok * s.hidden..(tok + 1) * s.hidden]) {
                    *h += p;
                }
            }
        }
        for h in cache.h.iter_mut() {
            *h = h.tanh();
        }
        let w2 = &self.params[o.w2..o.b2];
        let b2 = &self.params[o.b2..o.copy];
        for (v, l) in cache.logits.iter_mut().enumerate() {
            *l = dot(&w2[v * s.hidden..(v + 1) * s.hidden], &cache.h) + b2[v];
        }
        if s.copy_digits {
            let scales = self.copy_scales(context);
            for (h, sc) in scales.chunks_exact(2).enumerate() {
                let pv = &prompt.pooled[h * VDIM..(h + 1) * VDIM];
                for d in 0..10 {
                    cache.logits[DIGIT_0 + d] += sc[0] * pv[d] + sc[1] * pv[11 + d];
                }
            }
        }
        if s.logit_cap > 0.0 {
            for l in cache.logits.iter_mut() {
                *l = s.logit_cap * (*l / s.logit_cap).tanh();
            }
        }
        cache.logp.copy_from_slice(&cache.logits);
        log_softmax_in_place(&mut cache.logp);
    }

    fn copy_offset(&self, context: &[Token]) -> usize {
        let prev = context.last().copied().unwrap_or(BOS);
        // All digits share one context so the units scale is learnt once.
        let class = if prev > DIGIT_0 + 9 { prev - 9 } else { prev.min(DIGIT_0) };
        self.shape.offsets().copy + class * self.shape.heads * 2
    }

    /// Tens and units scales of every head after `context`.
    fn copy_scales(&self, context: &[Token]) -> &[f64] {
        let start = self.copy_offset(context);
        &self.params[start..start + self.shape.heads * 2]
    }

    /// Log-probability of each token of `tokens` given the tokens before it.
    pub fn sequence_log_probs(&self, prompt: &PreparedPrompt, tokens: &[Token]) -> Vec<f64> {
        let mut cache = StepCache::new(&self.shape);
        (0..tokens.len())
            .map(|t| {
                self.forward_step(prompt, &tokens[..t], &mut cache);
                cache.logp[tokens[t]]
            })
            .collect()
    }

    /// Adds `Σ_t coeff_t · ∂ log π(token_t) / ∂θ` over every sequence to
    /// `grad`. Steps with a zero coefficient are skipped.
    ///
    /// First-layer gradients are summed per window slot and token, then
    /// expanded once at the end.
    pub fn accumulate_grad(
        &self,
        prompt: &PreparedPrompt,
        sequences: &[(&[Token], &[f64])],
        grad: &mut [f64],
    ) {
        let s = &self.shape;
        let o = s.offsets();
        let d = s.embed_dim;
        let in_dim = s.input_dim();
        let hid = s.hidden;
        let mut cache = StepCache::new(s);
        let mut dlogit = [0.0; VOCAB_SIZE];
        let mut dh = vec![0.0; hid];
        let mut slot_sum = vec![0.0; s.window * (VOCAB_SIZE + 1) * hid];
        let mut slot_used = vec![false; s.window * (VOCAB_SIZE + 1)];
        let mut base_sum = vec![0.0; hid];
        let mut flag_sum = vec![0.0; s.flag_dim() * hid];
        let mut dpooled = vec![0.0; prompt.pooled.len()];
        let mut touched = false;
        let w2 = &self.params[o.w2..o.b2];

        for (tokens, coeffs) in sequences {
            for (t, &c) in coeffs.iter().enumerate() {
                if c == 0.0 {
                    continue;
                }
                touched = true;
                let context = &tokens[..t];
                self.forward_step(prompt, context, &mut cache);
                for (v, g) in dlogit.iter_mut().enumerate() {
                    let p = cache.logp[v].exp();
                    *g = c * (f64::from(u8::from(v == tokens[t])) - p);
                    if s.logit_cap > 0.0 {
                        let u = cache.logits[v] / s.logit_cap;
                        *g *= 1.0 - u * u;
                    }
                }
                if s.copy_digits {
                    let start = self.copy_offset(context);
                    for h in 0..s.heads {
                        let pv = &prompt.pooled[h * VDIM..(h + 1) * VDIM];
                        let (a, b) = (self.params[start + 2 * h], self.params[start + 2 * h + 1]);
                        for d in 0..10 {
                            let g = dlogit[DIGIT_0 + d];
                            grad[start + 2 * h] += g * pv[d];
                            grad[start + 2 * h + 1] += g * pv[11 + d];
                            dpooled[h * VDIM + d] += g * a;
                            dpooled[h * VDIM + 11 + d] += g * b;
                        }
                    }
                }
                dh.fill(0.0);
                for (v, &g) in dlogit.iter().enumerate() {
                    grad[o.b2 + v] += g;
                    let row = &mut grad[o.w2 + v * hid..o.w2 + (v + 1) * hid];
                    for (r, h) in row.iter_mut().zip(&cache.h) {
                        *r += g * h;
                    }
                    for (x, wv) in dh.iter_mut().zip(&w2[v * hid..(v + 1) * hid]) {
                        *x += g * wv;
                    }
                }
                for ((x, h), b) in dh.iter_mut().zip(&cache.h).zip(base_sum.iter_mut()) {
                    *x *= 1.0 - h * h;
                    *b += *x;
                }
                if s.emitted_flags {
                    for (tok, _) in emitted(context).iter().enumerate().filter(|(_, e)| **e) {
                        for (acc, x) in flag_sum[tok * hid..(tok + 1) * hid].iter_mut().zip(&dh) {
                            *acc += x;
                        }
                    }
                }
                for w in 0..s.window {
                    let slot = w * (VOCAB_SIZE + 1) + window_token(s.window, context, w);
                    slot_used[slot] = true;
                    for (acc, x) in slot_sum[slot * hid..(slot + 1) * hid].iter_mut().zip(&dh) {
                        *acc += x;
                    }
                }
            }
        }
        if !touched {
            return;
        }

        let w1 = &self.params[o.w1..o.b1];
        for (slot, _) in slot_used.iter().enumerate().filter(|(_, u)| **u) {
            let w = slot / (VOCAB_SIZE + 1);
            let tok = slot % (VOCAB_SIZE + 1);
            let e = &self.params[o.emb + tok * d..o.emb + (tok + 1) * d];
            let mut de = vec![0.0; d];
            for (k, &g) in slot_sum[slot * hid..(slot + 1) * hid].iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                let row = k * in_dim + w * d;
                for (x, e) in grad[o.w1 + row..o.w1 + row + d].iter_mut().zip(e) {
                    *x += g * e;
                }
                for (x, wi) in de.iter_mut().zip(&w1[row..row + d]) {
                    *x += g * wi;
                }
            }
            for (x, g) in grad[o.emb + tok * d..o.emb + (tok + 1) * d].iter_mut().zip(&de) {
                *x += g;
            }
        }

        let f0 = s.window * d;
        for (tok, sums) in flag_sum.chunks_exact(hid).enumerate() {
            for (k, &g) in sums.iter().enumerate() {
                grad[o.w1 + k * in_dim + f0 + tok] += g;
            }
        }

        let p0 = f0 + s.flag_dim();
        let np = prompt.pooled.len();
        for (k, &g) in base_sum.iter().enumerate() {
            grad[o.b1 + k] += g;
            let row = k * in_dim + p0;
            let gw = &mut grad[o.w1 + row..o.w1 + (k + 1) * in_dim];
            for (x, z) in gw.iter_mut().zip(prompt.pooled.iter().chain(&prompt.features.query)) {
                *x += g * z;
            }
            for (x, wi) in dpooled.iter_mut().zip(&w1[row..row + np]) {
                *x += g * wi;
            }
        }
        self.attention_backward(prompt, &dpooled, grad);
    }

    fn attention_backward(&self, prompt: &PreparedPrompt, dpooled: &[f64], grad: &mut [f64]) {
        let o = self.shape.offsets();
        let f = &prompt.features;
        let n = f.keys.len();
        for h in 0..self.shape.heads {
            let alpha = &prompt.attention[h * n..(h + 1) * n];
            let dp = &dpooled[h * VDIM..(h + 1) * VDIM];
            let dalpha: Vec<f64> = f
                .values
                .iter()
                .map(|v| v.iter().zip(dp).map(|(a, b)| a * b).sum())
                .collect();
            let mean: f64 = alpha.iter().zip(&dalpha).map(|(a, b)| a * b).sum();
            let mut dk = [0.0; KDIM];
            for ((a, da), k) in alpha.iter().zip(&dalpha).zip(&f.keys) {
                let ds = a * (da - mean);
                for (x, kj) in dk.iter_mut().zip(k) {
                    *x += ds * kj;
                }
            }
            let gb = &mut grad[o.attn + h * QDIM * KDIM..o.attn + (h + 1) * QDIM * KDIM];
            for (a, &qa) in f.query.iter().enumerate() {
                if qa != 0.0 {
                    for (j, x) in dk.iter().enumerate() {
                        gb[a * KDIM + j] += qa * x;
                    }
                }
            }
        }
    }
}

impl Policy for TinyPolicy {
    type Prompt = PreparedPrompt;

    fn prepare(&self, task: &TinyTabTask) -> PreparedPrompt {
        self.prepare_features(encode_prompt(&task.prompt_items()))
    }

    fn next_log_probs(&self, prompt: &PreparedPrompt, context: &[Token], out: &mut [f64]) {
        let mut cache = StepCache::new(&self.shape);
        self.forward_step(prompt, context, &mut cache);
        out.copy_from_slice(&cache.logp);
    }
}

/// Emits the shortest conformant response for the gold answer with
/// probability one. Used to check the evaluation path end to end.
#[derive(Debug, Clone, Copy, Default)]
pub struct GoldPolicy;

impl Policy for GoldPolicy {
    type Prompt = Vec<Token>;

    fn prepare(&self, task: &TinyTabTask) -> Vec<Token> {
        conformant_tokens(task.gold()).expect("tiny tasks have digit or label answers")
    }

    fn next_log_probs(&self, prompt: &Vec<Token>, context: &[Token], out: &mut [f64]) {
        out.fill(f64::NEG_INFINITY);
        let next = prompt.get(context.len()).copied().unwrap_or(crate::vocab::EOS);
        out[next] = 0.0;
    }
}
