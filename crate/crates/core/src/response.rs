//! Parsing of `<think>…</think> <answer>…</answer>` responses and the
//! cumulative format reward.
//!
//! Parsing never fails. A response is graded by the highest structural stage
//! it satisfies, each stage requiring every lower one:
//!
//! | stage | requirement |
//! |-------|-------------|
//! | 1 | a well-nested `<think>…</think>` pair |
//! | 2 | an `<answer>…</answer>` pair after the think block |
//! | 3 | the answer block holds a JSON object with an `"answer"` key (fenced or bare) |
//! | 4 | the answer value is well typed for the task and only whitespace surrounds the two tag pairs |

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::table::{Label, TaskKind};

static THINK_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?s)<think>(.*?)</think>").expect("valid regex"));
static ANSWER_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?s)<answer>(.*?)</answer>").expect("valid regex"));
static FENCE_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?s)```[A-Za-z]*[ \t]*\r?\n?(.*?)```").expect("valid regex"));
static STRICT_RE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?s)\A\s*<think>.*?</think>\s*<answer>.*?</answer>\s*\z").expect("valid regex")
});

/// The typed content of the `"answer"` field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum ParsedAnswer {
    ShortList(Vec<String>),
    Label(Label),
    Sentence(String),
    /// JSON that does not have the shape the task expects, including empty
    /// lists, blank list items and blank sentences.
    Untyped(serde_json::Value),
}

impl ParsedAnswer {
    fn from_json(value: serde_json::Value, task: TaskKind) -> Self {
        use serde_json::Value;
        match (task, value) {
            (TaskKind::Tqa, Value::Array(items))
                if !items.is_empty()
                    && items
                        .iter()
                        .all(|v| v.as_str().is_some_and(|s| !s.trim().is_empty())) =>
            {
                ParsedAnswer::ShortList(
                    items
                        .into_iter()
                        .map(|v| match v {
                            Value::String(s) => s,
                            _ => unreachable!("checked above"),
                        })
                        .collect(),
                )
            }
            (TaskKind::Tfv, Value::String(s)) => match Label::parse(&s) {
                Some(label) => ParsedAnswer::Label(label),
                None => ParsedAnswer::Untyped(Value::String(s)),
            },
            (TaskKind::FfTqa, Value::String(s)) if !s.trim().is_empty() => ParsedAnswer::Sentence(s),
            (_, other) => ParsedAnswer::Untyped(other),
        }
    }

    pub fn is_typed(&self) -> bool {
        !matches!(self, ParsedAnswer::Untyped(_))
    }

    /// The JSON value this answer would be written as.
    pub fn to_json(&self) -> serde_json::Value {
        match self {
            ParsedAnswer::ShortList(items) => serde_json::json!(items),
            ParsedAnswer::Label(l) => serde_json::Value::String(l.as_str().to_string()),
            ParsedAnswer::Sentence(s) => serde_json::Value::String(s.clone()),
            ParsedAnswer::Untyped(v) => v.clone(),
        }
    }
}

/// Stage-graded parse of one raw response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParsedResponse {
    pub think: Option<String>,
    pub answer_block: Option<String>,
    /// Present exactly when `format_stage >= 3`.
    pub parsed_answer: Option<ParsedAnswer>,
    pub format_stage: u8,
}

/// Extracts the `"answer"` value from an answer block: the first fenced code
/// block that parses, else the whole block, else the outermost `{…}` span.
fn extract_answer_json(block: &str) -> Option<serde_json::Value> {
    let from_object = |text: &str| -> Option<serde_json::Value> {
        match serde_json::from_str::<serde_json::Value>(text.trim()) {
            Ok(serde_json::Value::Object(mut map)) => map.remove("answer"),
            _ => None,
        }
    };
    for cap in FENCE_RE.captures_iter(block) {
        if let Some(v) = from_object(&cap[1]) {
            return Some(v);
        }
    }
    if let Some(v) = from_object(block) {
        return Some(v);
    }
    let start = block.find('{')?;
    let end = block.rfind('}')?;
    (start < end).then(|| from_object(&block[start..=end])).flatten()
}

/// Parses `raw` for `task`. Total over all inputs.
pub fn parse_response(raw: &str, task: TaskKind) -> ParsedResponse {
    let mut out = ParsedResponse {
        think: None,
        answer_block: None,
        parsed_answer: None,
        format_stage: 0,
    };

    // Stage 1: a think pair whose body holds no nested opening tag.
    let Some(think) = THINK_RE.captures(raw) else {
        return out;
    };
    let body = think.get(1).expect("group 1");
    if body.as_str().contains("<think>") {
        return out;
    }
    out.think = Some(body.as_str().to_string());
    out.format_stage = 1;

    // Stage 2: the last answer pair after the think block.
    let after = think.get(0).expect("group 0").end();
    let answers: Vec<_> = ANSWER_RE.captures_iter(&raw[after..]).collect();
    let Some(answer) = answers.last() else {
        return out;
    };
    let block = answer.get(1).expect("group 1").as_str();
    out.answer_block = Some(block.to_string());
    out.format_stage = 2;

    // Stage 3: a JSON object with an "answer" key.
    let Some(value) = extract_answer_json(block) else {
        return out;
    };
    let parsed = ParsedAnswer::from_json(value, task);
    out.format_stage = 3;

    // Stage 4: well typed and nothing but whitespace outside exactly one pair of each tag.
    let single_pairs = ["<think>", "</think>", "<answer>", "</answer>"]
        .iter()
        .all(|tag| raw.matches(tag).count() == 1);
    if parsed.is_typed() && single_pairs && STRICT_RE.is_match(raw) {
        out.format_stage = 4;
    }
    out.parsed_answer = Some(parsed);
    out
}

/// Writes a strictly conformant response with a fenced JSON answer block.
pub fn render_response(think: &str, answer: &ParsedAnswer) -> String {
    let json = serde_json::to_string(&serde_json::json!({ "answer": answer.to_json() }))
        .expect("json value serializes");
    format!("<think>{think}</think> <answer>```json\n{json}\n```</answer>")
}

/// Reward for each format stage `0..=4`. Must be non-decreasing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FormatSchedule(pub [f64; 5]);

impl Default for FormatSchedule {
    fn default() -> Self {
        FormatSchedule([0.0, 0.2, 0.4, 0.7, 1.0])
    }
}

impl FormatSchedule {
    pub fn validate(&self) -> Result<(), String> {
        let w = &self.0;
        if w.iter().any(|x| !x.is_finite() || !(0.0..=1.0).contains(x)) {
            return Err("format stage weights must lie in [0, 1]".into());
        }
        if w.windows(2).any(|p| p[1] < p[0]) {
            return Err("format stage weights must be non-decreasing".into());
        }
        Ok(())
    }

    pub fn reward(&self, stage: u8) -> f64 {
        self.0[usize::from(stage.min(4))]
    }
}

/// Format reward of a parsed response under the default stage schedule.
pub fn format_reward(parsed: &ParsedResponse) -> f64 {
    FormatSchedule::default().reward(parsed.format_stage)
}
