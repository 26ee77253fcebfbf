//! The 20-instance hand-scored evaluation fixture and its scripted judge.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};

use serde::Deserialize;
use tablerl_core::eval::{
    ingest_dataset, ingest_predictions, JudgeClient, JudgeError, JudgeVerdict, Judgement,
    PredictionRecord,
};
use tablerl_core::TaskInstance;

pub fn dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures/eval20")
        .canonicalize()
        .expect("fixture dir")
}

/// Replays recorded verdicts keyed by response text.
pub struct ScriptedJudge {
    verdicts: HashMap<String, Judgement>,
    pub calls: AtomicUsize,
}

#[derive(Deserialize)]
struct ScriptLine {
    response: String,
    judgement: Judgement,
}

impl ScriptedJudge {
    pub fn load() -> Self {
        let text = std::fs::read_to_string(dir().join("judge.jsonl")).unwrap();
        let verdicts = text
            .lines()
            .map(|l| {
                let s: ScriptLine = serde_json::from_str(l).unwrap();
                (s.response, s.judgement)
            })
            .collect();
        ScriptedJudge {
            verdicts,
            calls: AtomicUsize::new(0),
        }
    }
}

impl JudgeClient for ScriptedJudge {
    fn judge(&self, response: &str, _ground_truth: &[String]) -> Result<JudgeVerdict, JudgeError> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        let judgement = *self
            .verdicts
            .get(response)
            .ok_or_else(|| JudgeError::Unavailable(format!("no scripted verdict for {response:?}")))?;
        Ok(JudgeVerdict {
            judgement,
            raw_judge_output: String::new(),
        })
    }
}

#[derive(Debug, Deserialize)]
pub struct ExpectedTqa {
    pub count: usize,
    pub em_accuracy: f64,
    pub judge_adjusted_accuracy: f64,
    pub judge_calls: usize,
    pub judge_flips: usize,
}

#[derive(Debug, Deserialize)]
pub struct ExpectedTfv {
    pub count: usize,
    pub accuracy: f64,
}

#[derive(Debug, Deserialize)]
pub struct ExpectedFfTqa {
    pub count: usize,
    pub bleu: f64,
    pub rouge_l: f64,
}

#[derive(Debug, Deserialize)]
pub struct ExpectedCounts {
    pub evaluated: usize,
    pub skipped: usize,
    pub parse_failed: usize,
}

#[derive(Debug, Deserialize)]
pub struct Expected {
    pub tqa: ExpectedTqa,
    pub tfv: ExpectedTfv,
    pub fftqa: ExpectedFfTqa,
    pub pass_at_1: f64,
    pub counts: ExpectedCounts,
}

pub fn load() -> (Vec<TaskInstance>, Vec<PredictionRecord>, Expected) {
    let d = dir();
    let inst = ingest_dataset(&d.join("instances.jsonl"), true).unwrap();
    let pred = ingest_predictions(&d.join("predictions.jsonl"), true).unwrap();
    let expected = serde_json::from_str(&std::fs::read_to_string(d.join("expected.json")).unwrap()).unwrap();
    (inst.records, pred.records, expected)
}
