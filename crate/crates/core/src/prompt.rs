//! Instruction templates for the three table tasks, the response-format system
//! prompt, and the LLM-as-a-judge prompt.
//!
//! The template text is fixed; golden files under `tests/golden/` pin the
//! rendered output byte for byte. Bump [`TEMPLATE_VERSION`] on any change.

use serde::{Deserialize, Serialize};

use crate::table::{TableError, TableFormat, TaskInstance, TaskKind};

pub const TEMPLATE_VERSION: &str = "v1";

pub const SYSTEM_PROMPT: &str = "A conversation between User and Assistant. The user asks a question, and the assistant solves it. The assistant first thinks about the reasoning process in the mind and then provides the user with the answer. The reasoning process and answer are enclosed within <think> </think> and <answer> </answer> tags, respectively, i.e., <think> reasoning process here </think> <answer> answer here </answer>.";

const TQA_INSTRUCTION: &str =
    "This is a short-answer table QA task. Answer the question based on the provided table.";
const TFV_INSTRUCTION: &str = "This is a table fact verification task. The goal is to determine whether the given statement is entailed or refuted by the table.";
const FFTQA_INSTRUCTION: &str =
    "This is a free-form table QA task. Answer the question based on the provided table.";

const TQA_FORMAT: &str = r#"The final answer should be concise and use the following format:
```json
{
    "answer": [
        "answer1",
        "answer2",
        ...
    ]
}
```"#;

const TFV_FORMAT: &str = r#"The final answer should be either "entailed" or "refuted" and use the following format:
```json
{
    "answer": "entailed" or "refuted"
}
```"#;

const FFTQA_FORMAT: &str = r#"The final answer should be a sentence and use the following format:
```json
{
    "answer": "your_generated_sentence_here"
}
```"#;

const JUDGE_TEMPLATE: &str = r#"You are given two answers for a short-answer Table QA task: response and ground_truth.

- response: This is the LLM's answer to the task. It may include reasoning steps and a final answer.
- ground_truth: A list of short answers, typically 2-3 word noun phrases or numbers.

Your task is to determine whether the response is fully correct, using these rules:
- Noun phrases: Considered correct if meaning matches ground_truth regardless of wording.
- Numbers: Considered correct if numerically close (tolerance < 0.01).
- Every ground_truth item must be matched in the response. Order doesn't matter.

Your output must be in the following format:
```json
{
    "judgement": "correct" or "incorrect"
}
```
Do not provide any explanation or additional output.

Input:
Response: {response}
Ground_truth: {ground_truth}

Evaluate and output the judgement."#;

/// Chat role of a prompt message.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

/// A rendered prompt: the optional system message and the user message.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Prompt {
    pub system: Option<String>,
    pub user: String,
}

impl Prompt {
    pub fn messages(&self) -> Vec<Message> {
        let mut out = Vec::with_capacity(2);
        if let Some(system) = &self.system {
            out.push(Message {
                role: Role::System,
                content: system.clone(),
            });
        }
        out.push(Message {
            role: Role::User,
            content: self.user.clone(),
        });
        out
    }
}

/// Renders the task prompt for `instance` with its table in `format`.
pub fn render_prompt(
    instance: &TaskInstance,
    format: TableFormat,
    include_system: bool,
) -> Result<Prompt, TableError> {
    let table_repr = instance.table.render(format)?;
    let title = instance.table.title().unwrap_or("");
    let (instruction, query_label, answer_format) = match instance.task {
        TaskKind::Tqa => (TQA_INSTRUCTION, "Question", TQA_FORMAT),
        TaskKind::Tfv => (TFV_INSTRUCTION, "Statement", TFV_FORMAT),
        TaskKind::FfTqa => (FFTQA_INSTRUCTION, "Question", FFTQA_FORMAT),
    };
    let user = format!(
        "Instruction: {instruction}\n\n\
         Table\n\
         Table Title: {title}\n\
         Table Content: {table_repr}\n\n\
         {query_label}: {query}\n\n\
         Answer Format:\n\
         {answer_format}",
        query = instance.query,
    );
    Ok(Prompt {
        system: include_system.then(|| SYSTEM_PROMPT.to_string()),
        user,
    })
}

/// Renders the judge prompt. `ground_truth` is embedded as a JSON array.
pub fn render_judge_prompt(response: &str, ground_truth: &[String]) -> String {
    let gt = serde_json::to_string(ground_truth).expect("string list serializes");
    // Single pass so that a response containing `{ground_truth}` is left alone.
    let (head, rest) = JUDGE_TEMPLATE
        .split_once("{response}")
        .expect("template has response slot");
    let (mid, tail) = rest
        .split_once("{ground_truth}")
        .expect("template has ground_truth slot");
    format!("{head}{response}{mid}{gt}{tail}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::{GoldAnswer, Label, Table};

    fn instance(task: TaskKind, gold: GoldAnswer) -> TaskInstance {
        let table = Table::from_rows(Some("Scores"), &[vec!["A", "B"], vec!["1", "2"]]).unwrap();
        TaskInstance::new("t", task, table, "What is B?", gold).unwrap()
    }

    #[test]
    fn tqa_contains_answer_block() {
        let p = render_prompt(
            &instance(TaskKind::Tqa, GoldAnswer::ShortList(vec!["2".into()])),
            TableFormat::Markdown,
            false,
        )
        .unwrap();
        assert!(p.user.contains("short-answer table QA task"));
        assert!(p.user.contains(r#""answer": ["#));
        assert!(p.system.is_none());
    }

    #[test]
    fn tfv_and_fftqa_markers() {
        let p = render_prompt(
            &instance(TaskKind::Tfv, GoldAnswer::Label(Label::Entailed)),
            TableFormat::Html,
            true,
        )
        .unwrap();
        assert!(p.user.contains(r#""entailed" or "refuted""#));
        assert!(p.user.contains("Statement: What is B?"));
        assert_eq!(p.messages().len(), 2);
        assert_eq!(p.messages()[0].role, Role::System);

        let p = render_prompt(
            &instance(TaskKind::FfTqa, GoldAnswer::Sentence("B is 2.".into())),
            TableFormat::Markdown,
            false,
        )
        .unwrap();
        assert!(p.user.contains("should be a sentence"));
    }

    #[test]
    fn judge_prompt_slots() {
        let p = render_judge_prompt("it is {ground_truth}", &["a".into(), "b".into()]);
        assert!(p.contains("Response: it is {ground_truth}\n"));
        assert!(p.contains("Ground_truth: [\"a\",\"b\"]\n"));
    }

    #[test]
    fn rendering_is_deterministic() {
        let i = instance(TaskKind::Tqa, GoldAnswer::ShortList(vec!["2".into()]));
        let a = render_prompt(&i, TableFormat::Markdown, true).unwrap();
        let b = render_prompt(&i, TableFormat::Markdown, true).unwrap();
        assert_eq!(a, b);
    }
}
