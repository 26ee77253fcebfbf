use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::metrics::{normalize, NormalizationPolicy};
use crate::response::{parse_response, ParsedAnswer};
use crate::table::TaskKind;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum JudgeError {
    #[error("judge unavailable: {0}")]
    Unavailable(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Judgement {
    Correct,
    Incorrect,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeVerdict {
    pub judgement: Judgement,
    pub raw_judge_output: String,
}

/// Re-scores a short-answer response that failed exact match.
pub trait JudgeClient: Send + Sync {
    fn judge(&self, response: &str, ground_truth: &[String]) -> Result<JudgeVerdict, JudgeError>;
}

static JUDGEMENT_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r#"(?s)\{[^{}]*"judgement"\s*:\s*"([^"]*)"[^{}]*\}"#).expect("valid regex")
});

/// Reads `{"judgement": "correct" | "incorrect"}` from judge output, fenced
/// or bare. Anything unparseable is recorded as incorrect.
pub fn parse_judge_output(raw: &str) -> JudgeVerdict {
    let judgement = JUDGEMENT_RE
        .captures_iter(raw)
        .filter_map(|cap| {
            let obj: serde_json::Value = serde_json::from_str(cap.get(0)?.as_str()).ok()?;
            obj.get("judgement")?.as_str().map(str::to_string)
        })
        .next();
    let judgement = match judgement {
        Some(j) if j.trim().eq_ignore_ascii_case("correct") => Judgement::Correct,
        _ => Judgement::Incorrect,
    };
    JudgeVerdict {
        judgement,
        raw_judge_output: raw.to_string(),
    }
}

static NUMBER_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"[-+]?(?:\d+(?:\.\d+)?|\.\d+)").expect("valid regex"));

/// Deterministic stand-in for the LLM judge that applies only the mechanical
/// rules of the judge prompt: every ground-truth item must be matched, order
/// is irrelevant, numbers match within an absolute tolerance, and phrases
/// match by normalized containment on token boundaries. It never attempts
/// semantic paraphrase matching, so it is stricter than a real judge.
#[derive(Debug, Clone)]
pub struct LocalJudge {
    pub policy: NormalizationPolicy,
    pub tolerance: f64,
}

impl Default for LocalJudge {
    fn default() -> Self {
        Self {
            policy: NormalizationPolicy::default(),
            tolerance: 0.01,
        }
    }
}

impl LocalJudge {
    /// Text the gold items are matched against: the parsed answer list when
    /// the response follows the template, otherwise the whole response.
    fn candidates(&self, response: &str) -> Vec<String> {
        let parsed = parse_response(response, TaskKind::Tqa);
        let raw: Vec<String> = match parsed.parsed_answer {
            Some(ParsedAnswer::ShortList(items)) if !items.is_empty() => items,
            Some(ParsedAnswer::Untyped(v)) => vec![match v {
                serde_json::Value::String(s) => s,
                other => other.to_string(),
            }],
            _ => vec![response.to_string()],
        };
        raw.iter().map(|s| normalize(s, &self.policy)).collect()
    }

    fn parse_number(text: &str) -> Option<f64> {
        let m = NUMBER_RE.find(text)?;
        (m.start() == 0 && m.end() == text.len())
            .then(|| m.as_str().parse().ok())
            .flatten()
    }

    fn item_matched(&self, gold: &str, candidates: &[String]) -> bool {
        let gold = normalize(gold, &self.policy);
        if gold.is_empty() {
            return false;
        }
        if let Some(target) = Self::parse_number(&gold) {
            return candidates.iter().any(|c| {
                NUMBER_RE
                    .find_iter(c)
                    .filter_map(|m| m.as_str().parse::<f64>().ok())
                    .any(|x| (x - target).abs() < self.tolerance)
            });
        }
        let needle = format!(" {gold} ");
        candidates
            .iter()
            .any(|c| format!(" {c} ").contains(&needle))
    }

    pub fn verdict(&self, response: &str, ground_truth: &[String]) -> Judgement {
        let candidates = self.candidates(response);
        let all = !ground_truth.is_empty()
            && ground_truth
                .iter()
                .all(|g| self.item_matched(g, &candidates));
        if all {
            Judgement::Correct
        } else {
            Judgement::Incorrect
        }
    }
}

impl JudgeClient for LocalJudge {
    fn judge(&self, response: &str, ground_truth: &[String]) -> Result<JudgeVerdict, JudgeError> {
        let judgement = self.verdict(response, ground_truth);
        let word = match judgement {
            Judgement::Correct => "correct",
            Judgement::Incorrect => "incorrect",
        };
        Ok(JudgeVerdict {
            judgement,
            raw_judge_output: format!("{{\"judgement\": \"{word}\"}}"),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gt(items: &[&str]) -> Vec<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn numeric_tolerance() {
        let j = LocalJudge::default();
        let resp = "<think>sum</think> <answer>{\"answer\": [\"2.0049\"]}</answer>";
        assert_eq!(j.verdict(resp, &gt(&["2.01"])), Judgement::Correct);
        assert_eq!(j.verdict(resp, &gt(&["2.02"])), Judgement::Incorrect);
        assert_eq!(j.verdict("The total is 1,234.", &gt(&["1234"])), Judgement::Correct);
    }

    #[test]
    fn every_item_must_match() {
        let j = LocalJudge::default();
        assert_eq!(j.verdict("The answer is a.", &gt(&["a", "b"])), Judgement::Incorrect);
        assert_eq!(j.verdict("b and then a", &gt(&["a", "b"])), Judgement::Correct);
    }

    #[test]
    fn phrase_containment_respects_token_boundaries() {
        let j = LocalJudge::default();
        assert_eq!(
            j.verdict("It was the New York Yankees.", &gt(&["new york yankees"])),
            Judgement::Correct
        );
        assert_eq!(j.verdict("cathedral", &gt(&["cat"])), Judgement::Incorrect);
    }

    #[test]
    fn parses_judge_output() {
        let v = parse_judge_output("```json\n{\n    \"judgement\": \"correct\"\n}\n```");
        assert_eq!(v.judgement, Judgement::Correct);
        assert_eq!(parse_judge_output("{\"judgement\": \"incorrect\"}").judgement, Judgement::Incorrect);
        assert_eq!(parse_judge_output("I think it's correct").judgement, Judgement::Incorrect);
        assert_eq!(parse_judge_output("").raw_judge_output, "");
    }
}
