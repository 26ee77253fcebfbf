//! TinyTab: small integer tables with questions whose answers are computed
//! directly from the grid.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use tablerl_core::{GoldAnswer, Label, Table, TaskInstance, TaskKind};

pub const MAX_ROWS: usize = 6;
pub const MAX_COLS: usize = 4;
const MIN_ROWS: usize = 3;
const MIN_COLS: usize = 2;
pub const COLUMN_NAMES: [&str; MAX_COLS] = ["A", "B", "C", "D"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Template {
    CellLookup,
    ColumnMax,
    ColumnMin,
    CountEqual,
    ClaimCompare,
}

impl Template {
    pub const ALL: [Template; 5] = [
        Template::CellLookup,
        Template::ColumnMax,
        Template::ColumnMin,
        Template::CountEqual,
        Template::ClaimCompare,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn task(self) -> TaskKind {
        match self {
            Template::ClaimCompare => TaskKind::Tfv,
            _ => TaskKind::Tqa,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Template::CellLookup => "cell_lookup",
            Template::ColumnMax => "column_max",
            Template::ColumnMin => "column_min",
            Template::CountEqual => "count_equal",
            Template::ClaimCompare => "claim_compare",
        }
    }
}

/// Sampling weights over [`Template::ALL`], in that order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TemplateMix(pub [f64; 5]);

impl Default for TemplateMix {
    fn default() -> Self {
        Self::lookup_max()
    }
}

impl TemplateMix {
    /// The training curriculum: cell lookups and column maxima, evenly.
    pub fn lookup_max() -> Self {
        TemplateMix([1.0, 1.0, 0.0, 0.0, 0.0])
    }

    pub fn only(t: Template) -> Self {
        let mut w = [0.0; 5];
        w[t.index()] = 1.0;
        TemplateMix(w)
    }

    pub fn uniform() -> Self {
        TemplateMix([1.0; 5])
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.0.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err("template weights must be finite and non-negative".into());
        }
        if self.0.iter().sum::<f64>() <= 0.0 {
            return Err("template weights must not all be zero".into());
        }
        Ok(())
    }

    fn pick(&self, rng: &mut impl Rng) -> Template {
        let total: f64 = self.0.iter().sum();
        let mut x = rng.random_range(0.0..total);
        for (t, w) in Template::ALL.iter().zip(self.0) {
            if x < w {
                return *t;
            }
            x -= w;
        }
        // Rounding left x just under the total; take the last weighted template.
        *Template::ALL
            .iter()
            .zip(self.0)
            .rev()
            .find(|(_, w)| *w > 0.0)
            .map(|(t, _)| t)
            .expect("validated mix")
    }
}

/// Structured form of the question. Rows and columns are 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Question {
    pub template: Template,
    pub row: Option<usize>,
    pub col: usize,
    /// Second column of a comparison claim.
    pub col2: Option<usize>,
    /// Target value of a count question.
    pub value: Option<u8>,
}

/// One unit of the structured prompt the toy policy reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PromptItem {
    Template(Template),
    Row(usize),
    Col(usize),
    Col2(usize),
    Value(u8),
    Cell { row: usize, col: usize, value: u8 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TinyTabTask {
    /// Data cells, row-major, without the header.
    pub cells: Vec<Vec<u8>>,
    pub question: Question,
    /// The same task as a scoreable instance with an English query.
    pub instance: TaskInstance,
    pub seed: u64,
}

impl TinyTabTask {
    pub fn rows(&self) -> usize {
        self.cells.len()
    }

    pub fn cols(&self) -> usize {
        self.cells[0].len()
    }

    pub fn prompt_items(&self) -> Vec<PromptItem> {
        let q = &self.question;
        let mut items = vec![PromptItem::Template(q.template)];
        if let Some(r) = q.row {
            items.push(PromptItem::Row(r));
        }
        items.push(PromptItem::Col(q.col));
        if let Some(c) = q.col2 {
            items.push(PromptItem::Col2(c));
        }
        if let Some(v) = q.value {
            items.push(PromptItem::Value(v));
        }
        for (row, cells) in self.cells.iter().enumerate() {
            for (col, &value) in cells.iter().enumerate() {
                items.push(PromptItem::Cell { row, col, value });
            }
        }
        items
    }

    pub fn gold(&self) -> &GoldAnswer {
        &self.instance.gold
    }
}

fn gold_for(cells: &[Vec<u8>], q: &Question) -> GoldAnswer {
    let column = || cells.iter().map(move |r| r[q.col]);
    let number = |v: usize| GoldAnswer::ShortList(vec![v.to_string()]);
    match q.template {
        Template::CellLookup => number(cells[q.row.expect("row")][q.col].into()),
        Template::ColumnMax => number(column().max().expect("rows").into()),
        Template::ColumnMin => number(column().min().expect("rows").into()),
        Template::CountEqual => {
            let v = q.value.expect("value");
            number(column().filter(|&x| x == v).count())
        }
        Template::ClaimCompare => {
            let row = &cells[q.row.expect("row")];
            let label = if row[q.col] > row[q.col2.expect("col2")] {
                Label::Entailed
            } else {
                Label::Refuted
            };
            GoldAnswer::Label(label)
        }
    }
}

fn query_text(q: &Question) -> String {
    let col = COLUMN_NAMES[q.col];
    match q.template {
        Template::CellLookup => {
            format!("What is the value in column {col} of row {}?", q.row.expect("row") + 1)
        }
        Template::ColumnMax => format!("What is the largest value in column {col}?"),
        Template::ColumnMin => format!("What is the smallest value in column {col}?"),
        Template::CountEqual => format!(
            "How many rows have the value {} in column {col}?",
            q.value.expect("value")
        ),
        Template::ClaimCompare => format!(
            "In row {}, the value in column {col} is greater than the value in column {}.",
            q.row.expect("row") + 1,
            COLUMN_NAMES[q.col2.expect("col2")]
        ),
    }
}

/// Builds a task from explicit cells and question.
pub fn build_task(cells: Vec<Vec<u8>>, question: Question, seed: u64) -> TinyTabTask {
    let mut grid: Vec<Vec<String>> = vec![COLUMN_NAMES[..cells[0].len()]
        .iter()
        .map(|s| s.to_string())
        .collect()];
    grid.extend(cells.iter().map(|r| r.iter().map(u8::to_string).collect()));
    let table = Table::grid(Some("TinyTab".into()), grid).expect("rectangular grid");
    let gold = gold_for(&cells, &question);
    let instance = TaskInstance::new(
        format!("tinytab-{seed}"),
        question.template.task(),
        table,
        query_text(&question),
        gold,
    )
    .expect("gold matches task");
    TinyTabTask {
        cells,
        question,
        instance,
        seed,
    }
}

/// Draws one task. A pure function of `seed` and `mix`.
pub fn generate_task(seed: u64, mix: &TemplateMix) -> TinyTabTask {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let template = mix.pick(&mut rng);
    let rows = rng.random_range(MIN_ROWS..=MAX_ROWS);
    let cols = rng.random_range(MIN_COLS..=MAX_COLS);
    let cells: Vec<Vec<u8>> = (0..rows)
        .map(|_| (0..cols).map(|_| rng.random_range(0..100)).collect())
        .collect();
    let col = rng.random_range(0..cols);
    let question = match template {
        Template::CellLookup => Question {
            template,
            row: Some(rng.random_range(0..rows)),
            col,
            col2: None,
            value: None,
        },
        Template::ColumnMax | Template::ColumnMin => Question {
            template,
            row: None,
            col,
            col2: None,
            value: None,
        },
        Template::CountEqual => {
            let column: Vec<u8> = cells.iter().map(|r| r[col]).collect();
            Question {
                template,
                row: None,
                col,
                col2: None,
                value: Some(*column.choose(&mut rng).expect("rows")),
            }
        }
        Template::ClaimCompare => {
            let other = (col + rng.random_range(1..cols)) % cols;
            Question {
                template,
                row: Some(rng.random_range(0..rows)),
                col,
                col2: Some(other),
                value: None,
            }
        }
    };
    build_task(cells, question, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(template: Template, row: Option<usize>, col: usize, col2: Option<usize>) -> Question {
        Question {
            template,
            row,
            col,
            col2,
            value: None,
        }
    }

    #[test]
    fn gold_examples() {
        let cells = vec![vec![3, 10], vec![9, 37], vec![4, 2]];
        let t = build_task(cells.clone(), q(Template::CellLookup, Some(1), 1, None), 0);
        assert_eq!(t.gold(), &GoldAnswer::ShortList(vec!["37".into()]));
        let t = build_task(cells.clone(), q(Template::ColumnMax, None, 0, None), 0);
        assert_eq!(t.gold(), &GoldAnswer::ShortList(vec!["9".into()]));
        let t = build_task(cells.clone(), q(Template::ColumnMin, None, 1, None), 0);
        assert_eq!(t.gold(), &GoldAnswer::ShortList(vec!["2".into()]));

        let claim = build_task(vec![vec![5, 7], vec![1, 1], vec![0, 0]], q(Template::ClaimCompare, Some(0), 0, Some(1)), 0);
        assert_eq!(claim.gold(), &GoldAnswer::Label(Label::Refuted));
        assert_eq!(claim.instance.task, TaskKind::Tfv);

        let mut count = q(Template::CountEqual, None, 0, None);
        count.value = Some(4);
        let t = build_task(vec![vec![4, 0], vec![4, 1], vec![5, 2]], count, 0);
        assert_eq!(t.gold(), &GoldAnswer::ShortList(vec!["2".into()]));
    }

    #[test]
    fn generation_is_deterministic_and_in_range() {
        let mix = TemplateMix::uniform();
        for seed in 0..500 {
            let a = generate_task(seed, &mix);
            assert_eq!(a, generate_task(seed, &mix));
            assert!((MIN_ROWS..=MAX_ROWS).contains(&a.rows()));
            assert!((MIN_COLS..=MAX_COLS).contains(&a.cols()));
            assert!(a.cells.iter().flatten().all(|&v| v < 100));
            assert_eq!(a.instance.table.rows().unwrap().len(), a.rows() + 1);
            assert_eq!(a.gold(), &gold_for(&a.cells, &a.question));
            if let Some(c2) = a.question.col2 {
                assert_ne!(c2, a.question.col);
            }
        }
    }

    #[test]
    fn mix_restricts_templates() {
        let mix = TemplateMix::lookup_max();
        for seed in 0..200 {
            let t = generate_task(seed, &mix).question.template;
            assert!(matches!(t, Template::CellLookup | Template::ColumnMax));
        }
        let only = TemplateMix::only(Template::ClaimCompare);
        assert_eq!(generate_task(3, &only).instance.task, TaskKind::Tfv);
        assert!(TemplateMix([0.0; 5]).validate().is_err());
        assert!(TemplateMix([1.0, -1.0, 0.0, 0.0, 0.0]).validate().is_err());
    }

    #[test]
    fn prompt_items_cover_every_cell() {
        let t = generate_task(11, &TemplateMix::uniform());
        let cells = t
            .prompt_items()
            .iter()
            .filter(|i| matches!(i, PromptItem::Cell { .. }))
            .count();
        assert_eq!(cells, t.rows() * t.cols());
    }
}
