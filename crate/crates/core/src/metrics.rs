//! Text normalization, exact match, BLEU and ROUGE-L.
//!
//! All metrics tokenize by whitespace after [`normalize`]; there is no
//! stemming or language-specific tokenization.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum MetricError {
    #[error("reference is empty after normalization")]
    EmptyReference,
}

/// Which normalization steps to apply. Every flag is independent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct NormalizationPolicy {
    pub lowercase: bool,
    pub strip_punct_edges: bool,
    pub collapse_whitespace: bool,
    pub strip_thousands_separators: bool,
}

impl Default for NormalizationPolicy {
    fn default() -> Self {
        Self {
            lowercase: true,
            strip_punct_edges: true,
            collapse_whitespace: true,
            strip_thousands_separators: true,
        }
    }
}

impl NormalizationPolicy {
    /// Policy with every step disabled (only the final trim remains).
    pub const fn none() -> Self {
        Self {
            lowercase: false,
            strip_punct_edges: false,
            collapse_whitespace: false,
            strip_thousands_separators: false,
        }
    }
}

fn is_punct(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(
            c,
            '“' | '”' | '‘' | '’' | '«' | '»' | '…' | '–' | '—' | '。' | '，' | '、' | '¿' | '¡'
        )
}

/// Trims punctuation from both ends of a token. A leading sign or decimal
/// point directly followed by a digit is kept so `-5` and `.5` survive.
fn strip_token_edges(token: &str) -> &str {
    let mut s = token;
    loop {
        let mut chars = s.chars();
        match (chars.next(), chars.next()) {
            (Some('-' | '+' | '.'), Some(d)) if d.is_ascii_digit() => break,
            (Some(c), _) if is_punct(c) => s = &s[c.len_utf8()..],
            _ => break,
        }
    }
    s.trim_end_matches(is_punct)
}

fn map_tokens(text: &str, f: impl Fn(&str) -> &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut token_start: Option<usize> = None;
    for (i, c) in text.char_indices() {
        if c.is_whitespace() {
            if let Some(start) = token_start.take() {
                out.push_str(f(&text[start..i]));
            }
            out.push(c);
        } else if token_start.is_none() {
            token_start = Some(i);
        }
    }
    if let Some(start) = token_start {
        out.push_str(f(&text[start..]));
    }
    out
}

fn strip_thousands(text: &str) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len());
    for (i, &c) in chars.iter().enumerate() {
        let between_digits = c == ','
            && i > 0
            && chars[i - 1].is_ascii_digit()
            && chars.get(i + 1).is_some_and(|n| n.is_ascii_digit());
        if !between_digits {
            out.push(c);
        }
    }
    out
}

/// Applies the enabled steps in a fixed order: lowercase, strip edge
/// punctuation per token, drop thousands separators inside digit runs,
/// collapse whitespace runs, trim.
pub fn normalize(text: &str, policy: &NormalizationPolicy) -> String {
    let mut s = if policy.lowercase {
        text.to_lowercase()
    } else {
        text.to_string()
    };
    if policy.strip_punct_edges {
        s = map_tokens(&s, strip_token_edges);
    }
    if policy.strip_thousands_separators {
        s = strip_thousands(&s);
    }
    if policy.collapse_whitespace {
        s = s.split_whitespace().collect::<Vec<_>>().join(" ");
    }
    s.trim().to_string()
}

fn tokens(text: &str, policy: &NormalizationPolicy) -> Vec<String> {
    normalize(text, policy)
        .split_whitespace()
        .map(str::to_string)
        .collect()
}

fn normalized_sorted(items: &[String], policy: &NormalizationPolicy) -> Vec<String> {
    let mut v: Vec<String> = items.iter().map(|s| normalize(s, policy)).collect();
    v.sort_unstable();
    v
}

/// 1 if the normalized answer lists are equal as multisets, else 0.
pub fn exact_match_list(pred: &[String], gold: &[String], policy: &NormalizationPolicy) -> u8 {
    u8::from(normalized_sorted(pred, policy) == normalized_sorted(gold, policy))
}

/// Order-sensitive variant of [`exact_match_list`].
pub fn exact_match_list_ordered(
    pred: &[String],
    gold: &[String],
    policy: &NormalizationPolicy,
) -> u8 {
    let p = pred.iter().map(|s| normalize(s, policy));
    let g = gold.iter().map(|s| normalize(s, policy));
    u8::from(pred.len() == gold.len() && p.eq(g))
}

/// Longest common subsequence length, `O(|a|·|b|)` time and `O(min(|a|,|b|))` space.
pub fn lcs_length<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let (long, short) = if a.len() >= b.len() { (a, b) } else { (b, a) };
    if short.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; short.len() + 1];
    let mut cur = vec![0usize; short.len() + 1];
    for x in long {
        for (j, y) in short.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[short.len()]
}

/// Sentence-level ROUGE-L F1 (β = 1).
pub fn rouge_l(
    candidate: &str,
    reference: &str,
    policy: &NormalizationPolicy,
) -> Result<f64, MetricError> {
    let r = tokens(reference, policy);
    if r.is_empty() {
        return Err(MetricError::EmptyReference);
    }
    let c = tokens(candidate, policy);
    Ok(rouge_l_tokens(&c, &r))
}

pub(crate) fn rouge_l_tokens(c: &[String], r: &[String]) -> f64 {
    let lcs = lcs_length(c, r);
    if lcs == 0 {
        return 0.0;
    }
    let p = lcs as f64 / c.len() as f64;
    let rec = lcs as f64 / r.len() as f64;
    2.0 * p * rec / (p + rec)
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    for gram in tokens.windows(n) {
        *counts.entry(gram).or_insert(0) += 1;
    }
    counts
}

/// Smoothed sentence-level BLEU in `[0, 1]`.
///
/// Modified n-gram precisions for `n = 1..=max_n` are combined by geometric
/// mean. Orders the candidate is too short to contain are left out of the
/// mean. A zero precision is replaced by `1 / (2^k · t_n)`, where `t_n` is
/// the number of candidate n-grams and `k` counts the zero orders seen so
/// far, this one included. The brevity penalty is `exp(1 − |ref|/|cand|)`
/// when the candidate is shorter than the reference.
pub fn bleu(
    candidate: &str,
    reference: &str,
    policy: &NormalizationPolicy,
    max_n: usize,
) -> Result<f64, MetricError> {
    let r = tokens(reference, policy);
    if r.is_empty() {
        return Err(MetricError::EmptyReference);
    }
    let c = tokens(candidate, policy);
    Ok(bleu_tokens(&c, &r, max_n))
}

pub(crate) fn bleu_tokens(c: &[String], r: &[String], max_n: usize) -> f64 {
    if c.is_empty() || max_n == 0 {
        return 0.0;
    }
    let orders = max_n.min(c.len());
    let mut log_sum = 0.0;
    let mut zeros = 0u32;
    for n in 1..=orders {
        let cand = ngram_counts(c, n);
        let refs = ngram_counts(r, n);
        let total = c.len() + 1 - n;
        let matched: usize = cand
            .iter()
            .map(|(gram, &count)| count.min(refs.get(gram).copied().unwrap_or(0)))
            .sum();
        let precision = if matched == 0 {
            zeros += 1;
            1.0 / (2f64.powi(zeros as i32) * total as f64)
        } else {
            matched as f64 / total as f64
        };
        log_sum += precision.ln();
    }
    let bp = if c.len() < r.len() {
        (1.0 - r.len() as f64 / c.len() as f64).exp()
    } else {
        1.0
    };
    bp * (log_sum / orders as f64).exp()
}
