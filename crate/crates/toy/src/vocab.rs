//! The fixed output vocabulary. JSON punctuation is merged into a few
//! multi-character tokens so a conformant answer is only a handful of steps.

use tablerl_core::{GoldAnswer, Label};

pub type Token = usize;

pub const THINK_OPEN: Token = 0;
pub const THINK_CLOSE: Token = 1;
pub const ANSWER_OPEN: Token = 2;
pub const ANSWER_CLOSE: Token = 3;
pub const LIST_OPEN: Token = 4;
pub const LIST_CLOSE: Token = 5;
pub const STRING_OPEN: Token = 6;
pub const STRING_CLOSE: Token = 7;
pub const LIST_SEP: Token = 8;
pub const DIGIT_0: Token = 9;
pub const ENTAILED: Token = 19;
pub const REFUTED: Token = 20;
pub const SPACE: Token = 21;
pub const EOS: Token = 22;

pub const VOCAB_SIZE: usize = 23;
/// Embedding index used to pad the context window before the first token.
pub const BOS: usize = VOCAB_SIZE;

const TEXT: [&str; VOCAB_SIZE] = [
    "<think>",
    "</think>",
    "<answer>",
    "</answer>",
    r#"{"answer": [""#,
    r#""]}"#,
    r#"{"answer": ""#,
    r#""}"#,
    r#"", ""#,
    "0",
    "1",
    "2",
    "3",
    "4",
    "5",
    "6",
    "7",
    "8",
    "9",
    "entailed",
    "refuted",
    " ",
    "",
];

pub fn token_text(t: Token) -> &'static str {
    TEXT[t]
}

pub fn digit(d: u8) -> Token {
    DIGIT_0 + usize::from(d)
}

/// Concatenates token texts; the end token renders as nothing.
pub fn detokenize(tokens: &[Token]) -> String {
    tokens.iter().map(|&t| TEXT[t]).collect()
}

fn number_tokens(n: &str, out: &mut Vec<Token>) -> Option<()> {
    for c in n.chars() {
        out.push(digit(c.to_digit(10)? as u8));
    }
    Some(())
}

/// Shortest strictly conformant response for `gold`, ending in [`EOS`].
/// `None` when an answer item is not a run of digits.
pub fn conformant_tokens(gold: &GoldAnswer) -> Option<Vec<Token>> {
    let mut out = vec![THINK_OPEN, THINK_CLOSE, ANSWER_OPEN];
    match gold {
        GoldAnswer::ShortList(items) => {
            out.push(LIST_OPEN);
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(LIST_SEP);
                }
                number_tokens(item, &mut out)?;
            }
            out.push(LIST_CLOSE);
        }
        GoldAnswer::Label(label) => {
            out.push(STRING_OPEN);
            out.push(match label {
                Label::Entailed => ENTAILED,
                Label::Refuted => REFUTED,
            });
            out.push(STRING_CLOSE);
        }
        GoldAnswer::Sentence(_) => return None,
    }
    out.extend([ANSWER_CLOSE, EOS]);
    Some(out)
}
