//! Structured response fuzzer shared by the format-reward property tests.
//!
//! Each response is assembled from five independent structural flags; the
//! expected stage follows from the flags alone, independently of the parser.

use rand::seq::IndexedRandom;
use rand::Rng;
use tablerl_core::TaskKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Flags {
    pub think: bool,
    pub answer_tags: bool,
    pub json: bool,
    pub typed: bool,
    pub clean: bool,
}

impl Flags {
    pub fn random(rng: &mut impl Rng) -> Self {
        Flags {
            think: rng.random(),
            answer_tags: rng.random(),
            json: rng.random(),
            typed: rng.random(),
            clean: rng.random(),
        }
    }

    pub fn expected_stage(self) -> u8 {
        match self {
            Flags { think: false, .. } => 0,
            Flags { answer_tags: false, .. } => 1,
            Flags { json: false, .. } => 2,
            Flags { typed: true, clean: true, .. } => 4,
            _ => 3,
        }
    }

    /// Variants with exactly one more flag set.
    pub fn upgrades(self) -> Vec<Flags> {
        let mut out = Vec::new();
        let mut push = |f: Flags| {
            if f != self {
                out.push(f)
            }
        };
        push(Flags { think: true, ..self });
        push(Flags { answer_tags: true, ..self });
        push(Flags { json: true, ..self });
        push(Flags { typed: true, ..self });
        push(Flags { clean: true, ..self });
        out
    }
}

/// Free text that can never form a tag, fence or JSON object.
pub fn junk(rng: &mut impl Rng, min_len: usize) -> String {
    const WORDS: &[&str] = &[
        "the", "table", "shows", "42", "row", "answer", "think", "so", "col", "1,200", "=", "x",
        "json", "\"answer\"", ":", "[", "]", "sum", "\n", "max", "-3.5",
    ];
    let n = rng.random_range(min_len..min_len + 8);
    (0..n)
        .map(|_| *WORDS.choose(rng).unwrap())
        .collect::<Vec<_>>()
        .join(" ")
}

fn answer_value(task: TaskKind, typed: bool, rng: &mut impl Rng) -> serde_json::Value {
    use serde_json::json;
    match (task, typed) {
        (TaskKind::Tqa, true) => json!([format!("{} x", junk(rng, 0)), format!("row {}", junk(rng, 0))]),
        (TaskKind::Tqa, false) => json!({ "value": 3 }),
        (TaskKind::Tfv, true) => json!(*["entailed", "Refuted", " ENTAILED"].choose(rng).unwrap()),
        (TaskKind::Tfv, false) => json!("maybe"),
        (TaskKind::FfTqa, true) => json!(format!("{} x", junk(rng, 0))),
        (TaskKind::FfTqa, false) => json!(7),
    }
}

pub fn build(flags: Flags, task: TaskKind, rng: &mut impl Rng) -> String {
    let mut s = String::new();
    if !flags.clean {
        s.push_str(&junk(rng, 1));
        s.push(' ');
    }
    s.push_str("<think>");
    s.push_str(&junk(rng, 0));
    if flags.think {
        s.push_str("</think>");
    }
    s.push(' ');
    let body = if flags.json {
        let obj = serde_json::json!({ "answer": answer_value(task, flags.typed, rng) });
        if rng.random() {
            format!("```json\n{obj}\n```")
        } else {
            obj.to_string()
        }
    } else {
        junk(rng, 1)
    };
    if flags.answer_tags {
        s.push_str(&format!("<answer>{body}</answer>"));
    } else {
        s.push_str(&body);
    }
    if !flags.clean {
        s.push(' ');
        s.push_str(&junk(rng, 1));
    }
    s
}
