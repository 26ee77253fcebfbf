//! Table data model, canonical markdown/HTML serialization and task instances.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Errors raised while constructing, rendering or parsing tables.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TableError {
    #[error("table is stored as {stored} but {requested} was requested")]
    FormatMismatch {
        stored: TableFormat,
        requested: TableFormat,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid table: {0}")]
    Invalid(String),
}

/// Serialization format of a table inside a prompt.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum TableFormat {
    #[default]
    Markdown,
    Html,
}

impl fmt::Display for TableFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TableFormat::Markdown => f.write_str("markdown"),
            TableFormat::Html => f.write_str("html"),
        }
    }
}

impl std::str::FromStr for TableFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "markdown" | "md" => Ok(TableFormat::Markdown),
            "html" => Ok(TableFormat::Html),
            other => Err(format!("unknown table format `{other}`")),
        }
    }
}

/// Contents of a table: either a structured grid or an opaque pre-rendered block.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TableBody {
    /// Rectangular grid; the first row is the header.
    Grid(Vec<Vec<String>>),
    /// Text already serialized in `format` (e.g. hierarchical tables).
    PreRendered { text: String, format: TableFormat },
}

/// A table with an optional title.
///
/// Grid tables are validated on construction: at least one row, at least one
/// column, and every row of the same width.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "TableRecord", into = "TableRecord")]
pub struct Table {
    title: Option<String>,
    body: TableBody,
}

impl Table {
    pub fn grid(title: Option<String>, rows: Vec<Vec<String>>) -> Result<Self, TableError> {
        let width = rows
            .first()
            .map(Vec::len)
            .ok_or_else(|| TableError::Invalid("grid has no rows".into()))?;
        if width == 0 {
            return Err(TableError::Invalid("grid has no columns".into()));
        }
        if let Some((i, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != width) {
            return Err(TableError::Invalid(format!(
                "row {i} has {} cells, expected {width}",
                row.len()
            )));
        }
        Ok(Self {
            title,
            body: TableBody::Grid(rows),
        })
    }

    /// Convenience constructor from string slices.
    pub fn from_rows<S: AsRef<str>>(
        title: Option<&str>,
        rows: &[Vec<S>],
    ) -> Result<Self, TableError> {
        let rows = rows
            .iter()
            .map(|r| r.iter().map(|c| c.as_ref().to_string()).collect())
            .collect();
        Self::grid(title.map(str::to_string), rows)
    }

    pub fn pre_rendered(title: Option<String>, text: String, format: TableFormat) -> Self {
        Self {
            title,
            body: TableBody::PreRendered { text, format },
        }
    }

    pub fn title(&self) -> Option<&str> {
        self.title.as_deref()
    }

    pub fn body(&self) -> &TableBody {
        &self.body
    }

    /// Grid rows, if this is a grid table.
    pub fn rows(&self) -> Option<&[Vec<String>]> {
        match &self.body {
            TableBody::Grid(rows) => Some(rows),
            TableBody::PreRendered { .. } => None,
        }
    }

    pub fn with_title(mut self, title: Option<String>) -> Self {
        self.title = title;
        self
    }

    /// Serializes the table body. Pre-rendered tables are returned verbatim
    /// when the requested format matches the stored one.
    pub fn render(&self, format: TableFormat) -> Result<String, TableError> {
        match &self.body {
            TableBody::Grid(rows) => Ok(match format {
                TableFormat::Markdown => render_markdown(rows),
                TableFormat::Html => render_html(rows),
            }),
            TableBody::PreRendered {
                text,
                format: stored,
            } => {
                if *stored == format {
                    Ok(text.clone())
                } else {
                    Err(TableError::FormatMismatch {
                        stored: *stored,
                        requested: format,
                    })
                }
            }
        }
    }
}

/// Free-function form of [`Table::render`].
pub fn render_table(table: &Table, format: TableFormat) -> Result<String, TableError> {
    table.render(format)
}

fn escape_markdown_cell(cell: &str) -> String {
    let mut out = String::with_capacity(cell.len());
    for ch in cell.chars() {
        match ch {
            '\\' => out.push_str("\\\\"),
            '|' => out.push_str("\\|"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

fn markdown_row(cells: impl Iterator<Item = String>) -> String {
    let mut line = String::from("|");
    for cell in cells {
        line.push(' ');
        line.push_str(&cell);
        line.push_str(" |");
    }
    line
}

fn render_markdown(rows: &[Vec<String>]) -> String {
    let width = rows[0].len();
    let mut lines = Vec::with_capacity(rows.len() + 1);
    lines.push(markdown_row(rows[0].iter().map(|c| escape_markdown_cell(c))));
    lines.push(markdown_row((0..width).map(|_| "---".to_string())));
    for row in &rows[1..] {
        lines.push(markdown_row(row.iter().map(|c| escape_markdown_cell(c))));
    }
    lines.join("\n")
}

fn escape_html(cell: &str) -> String {
    let mut out = String::with_capacity(cell.len());
    for ch in cell.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            c => out.push(c),
        }
    }
    out
}

fn render_html(rows: &[Vec<String>]) -> String {
    let mut out = String::from("<table>");
    for (i, row) in rows.iter().enumerate() {
        let tag = if i == 0 { "th" } else { "td" };
        out.push_str("<tr>");
        for cell in row {
            out.push_str(&format!("<{tag}>{}</{tag}>", escape_html(cell)));
        }
        out.push_str("</tr>");
    }
    out.push_str("</table>");
    out
}

/// Splits one markdown table line into raw cells, honouring backslash escapes.
fn split_markdown_row(line: &str, line_no: usize) -> Result<Vec<String>, TableError> {
    let trimmed = line.trim_end_matches(['\r']);
    let Some(inner) = trimmed.strip_prefix('|') else {
        return Err(TableError::Parse {
            line: line_no,
            column: 1,
            message: "row must start with `|`".into(),
        });
    };
    let mut cells = Vec::new();
    let mut current = String::new();
    let mut chars = inner.char_indices().peekable();
    let mut closed = false;
    while let Some((idx, ch)) = chars.next() {
        match ch {
            '\\' => match chars.next() {
                Some((_, '\\')) => current.push('\\'),
                Some((_, '|')) => current.push('|'),
                Some((_, 'n')) => current.push('\n'),
                Some((_, 'r')) => current.push('\r'),
                Some((_, other)) => {
                    current.push('\\');
                    current.push(other);
                }
                None => {
                    return Err(TableError::Parse {
                        line: line_no,
                        column: idx + 2,
                        message: "dangling escape".into(),
                    })
                }
            },
            '|' => {
                cells.push(strip_cell_padding(&current));
                current.clear();
                closed = chars.peek().is_none();
            }
            c => current.push(c),
        }
    }
    if !closed {
        if current.trim().is_empty() && !cells.is_empty() {
            // trailing whitespace after the closing pipe
        } else {
            return Err(TableError::Parse {
                line: line_no,
                column: trimmed.chars().count() + 1,
                message: "row must end with `|`".into(),
            });
        }
    }
    Ok(cells)
}

/// Removes the single space of padding the renderer puts on each side of a cell.
fn strip_cell_padding(raw: &str) -> String {
    let s = raw.strip_prefix(' ').unwrap_or(raw);
    s.strip_suffix(' ').unwrap_or(s).to_string()
}

fn is_separator_cell(cell: &str) -> bool {
    let c = cell.trim();
    let c = c.strip_prefix(':').unwrap_or(c);
    let c = c.strip_suffix(':').unwrap_or(c);
    !c.is_empty() && c.chars().all(|ch| ch == '-')
}

/// Parses a pipe-delimited markdown table (header row, separator row, data rows).
///
/// Inverse of the markdown renderer on grid tables. The title is not part of
/// the markdown body, so the result is always untitled.
pub fn parse_markdown_table(text: &str) -> Result<Table, TableError> {
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| !l.trim().is_empty())
        .collect();
    let Some(&(header_no, header_line)) = lines.first() else {
        return Err(TableError::Parse {
            line: 1,
            column: 1,
            message: "empty input".into(),
        });
    };
    let header = split_markdown_row(header_line, header_no)?;
    let width = header.len();
    if width == 0 {
        return Err(TableError::Parse {
            line: header_no,
            column: 1,
            message: "header has no cells".into(),
        });
    }
    let Some(&(sep_no, sep_line)) = lines.get(1) else {
        return Err(TableError::Parse {
            line: header_no + 1,
            column: 1,
            message: "missing separator row".into(),
        });
    };
    let sep = split_markdown_row(sep_line, sep_no)?;
    if !sep.iter().all(|c| is_separator_cell(c)) {
        return Err(TableError::Parse {
            line: sep_no,
            column: 1,
            message: "missing separator row".into(),
        });
    }
    if sep.len() != width {
        return Err(TableError::Parse {
            line: sep_no,
            column: 1,
            message: format!("separator has {} cells, header has {width}", sep.len()),
        });
    }
    let mut rows = vec![header];
    for &(line_no, line) in &lines[2..] {
        let cells = split_markdown_row(line, line_no)?;
        if cells.len() != width {
            return Err(TableError::Parse {
                line: line_no,
                column: 1,
                message: format!("ragged row: {} cells, expected {width}", cells.len()),
            });
        }
        rows.push(cells);
    }
    Table::grid(None, rows)
}

/// Wire form of a table in dataset and request JSON.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TableRecord {
    #[serde(default)]
    title: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    grid: Option<Vec<Vec<String>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pre_rendered: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    format: Option<TableFormat>,
}

impl TryFrom<TableRecord> for Table {
    type Error = TableError;

    fn try_from(rec: TableRecord) -> Result<Self, Self::Error> {
        match (rec.grid, rec.pre_rendered) {
            (Some(grid), None) => Table::grid(rec.title, grid),
            (None, Some(text)) => {
                let format = rec.format.ok_or_else(|| {
                    TableError::Invalid("pre_rendered table requires `format`".into())
                })?;
                Ok(Table::pre_rendered(rec.title, text, format))
            }
            (Some(_), Some(_)) => Err(TableError::Invalid(
                "exactly one of `grid` and `pre_rendered` must be set".into(),
            )),
            (None, None) => Err(TableError::Invalid(
                "one of `grid` or `pre_rendered` is required".into(),
            )),
        }
    }
}

impl From<Table> for TableRecord {
    fn from(t: Table) -> Self {
        match t.body {
            TableBody::Grid(grid) => TableRecord {
                title: t.title,
                grid: Some(grid),
                pre_rendered: None,
                format: None,
            },
            TableBody::PreRendered { text, format } => TableRecord {
                title: t.title,
                grid: None,
                pre_rendered: Some(text),
                format: Some(format),
            },
        }
    }
}

/// The three table reasoning tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TaskKind {
    /// Short-answer table question answering.
    #[serde(rename = "tqa")]
    Tqa,
    /// Table fact verification.
    #[serde(rename = "tfv")]
    Tfv,
    /// Free-form table question answering.
    #[serde(rename = "fftqa")]
    FfTqa,
}

impl TaskKind {
    pub const ALL: [TaskKind; 3] = [TaskKind::Tqa, TaskKind::Tfv, TaskKind::FfTqa];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::Tqa => "tqa",
            TaskKind::Tfv => "tfv",
            TaskKind::FfTqa => "fftqa",
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Fact-verification label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Entailed,
    Refuted,
}

impl Label {
    /// Case-insensitive, whitespace-trimmed match against the two label words.
    pub fn parse(s: &str) -> Option<Label> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("entailed") {
            Some(Label::Entailed)
        } else if s.eq_ignore_ascii_case("refuted") {
            Some(Label::Refuted)
        } else {
            None
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::Entailed => "entailed",
            Label::Refuted => "refuted",
        }
    }
}

/// Verifiable ground truth for one instance.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GoldRecord", into = "GoldRecord")]
pub enum GoldAnswer {
    ShortList(Vec<String>),
    Label(Label),
    Sentence(String),
}

impl GoldAnswer {
    pub fn validate(&self) -> Result<(), String> {
        match self {
            GoldAnswer::ShortList(items) => {
                if items.is_empty() {
                    return Err("short-answer list is empty".into());
                }
                if items.iter().any(|s| s.trim().is_empty()) {
                    return Err("short-answer list contains a blank entry".into());
                }
                Ok(())
            }
            GoldAnswer::Label(_) => Ok(()),
            GoldAnswer::Sentence(s) if s.trim().is_empty() => Err("sentence is empty".into()),
            GoldAnswer::Sentence(_) => Ok(()),
        }
    }

    /// The task kind this gold variant belongs to.
    pub fn task(&self) -> TaskKind {
        match self {
            GoldAnswer::ShortList(_) => TaskKind::Tqa,
            GoldAnswer::Label(_) => TaskKind::Tfv,
            GoldAnswer::Sentence(_) => TaskKind::FfTqa,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum GoldRecord {
    List(Vec<String>),
    Label(String),
    Sentence { sentence: String },
}

impl TryFrom<GoldRecord> for GoldAnswer {
    type Error = String;

    fn try_from(rec: GoldRecord) -> Result<Self, Self::Error> {
        let gold = match rec {
            GoldRecord::List(items) => GoldAnswer::ShortList(items),
            GoldRecord::Label(s) => GoldAnswer::Label(
                Label::parse(&s).ok_or_else(|| format!("`{s}` is not entailed/refuted"))?,
            ),
            GoldRecord::Sentence { sentence } => GoldAnswer::Sentence(sentence),
        };
        gold.validate()?;
        Ok(gold)
    }
}

impl From<GoldAnswer> for GoldRecord {
    fn from(g: GoldAnswer) -> Self {
        match g {
            GoldAnswer::ShortList(items) => GoldRecord::List(items),
            GoldAnswer::Label(l) => GoldRecord::Label(l.as_str().to_string()),
            GoldAnswer::Sentence(sentence) => GoldRecord::Sentence { sentence },
        }
    }
}

/// Schema violation in a task instance.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("field `{field}`: {message}")]
pub struct InstanceError {
    pub field: String,
    pub message: String,
}

impl InstanceError {
    fn new(field: &str, message: impl Into<String>) -> Self {
        Self {
            field: field.to_string(),
            message: message.into(),
        }
    }
}

/// One table reasoning example with its verifiable answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "InstanceRecord", into = "InstanceRecord")]
pub struct TaskInstance {
    pub id: String,
    pub task: TaskKind,
    pub table: Table,
    /// Question for TQA/FF-TQA, statement for TFV.
    pub query: String,
    pub gold: GoldAnswer,
    pub metadata: BTreeMap<String, String>,
}

impl TaskInstance {
    pub fn new(
        id: impl Into<String>,
        task: TaskKind,
        table: Table,
        query: impl Into<String>,
        gold: GoldAnswer,
    ) -> Result<Self, InstanceError> {
        let inst = Self {
            id: id.into(),
            task,
            table,
            query: query.into(),
            gold,
            metadata: BTreeMap::new(),
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn validate(&self) -> Result<(), InstanceError> {
        self.gold
            .validate()
            .map_err(|m| InstanceError::new("gold", m))?;
        if self.gold.task() != self.task {
            return Err(InstanceError::new(
                "gold",
                format!(
                    "gold answer is a {} answer but task is {}",
                    self.gold.task(),
                    self.task
                ),
            ));
        }
        Ok(())
    }

    /// Parses one dataset record, reporting the offending field on failure.
    pub fn from_json_value(value: serde_json::Value) -> Result<Self, InstanceError> {
        let serde_json::Value::Object(mut map) = value else {
            return Err(InstanceError::new("<record>", "record is not a JSON object"));
        };
        fn take<T: serde::de::DeserializeOwned>(
            map: &mut serde_json::Map<String, serde_json::Value>,
            field: &str,
        ) -> Result<T, InstanceError> {
            let v = map
                .remove(field)
                .ok_or_else(|| InstanceError::new(field, "missing"))?;
            serde_json::from_value(v).map_err(|e| InstanceError::new(field, e.to_string()))
        }
        let id: String = take(&mut map, "id")?;
        let task: TaskKind = take(&mut map, "task")?;
        let table: Table = take(&mut map, "table")?;
        let query: String = take(&mut map, "query")?;
        let gold: GoldAnswer = take(&mut map, "gold")?;
        let metadata = match map.remove("metadata") {
            None | Some(serde_json::Value::Null) => BTreeMap::new(),
            Some(serde_json::Value::Object(m)) => m
                .into_iter()
                .map(|(k, v)| {
                    let text = match v {
                        serde_json::Value::String(s) => s,
                        other => other.to_string(),
                    };
                    (k, text)
                })
                .collect(),
            Some(_) => return Err(InstanceError::new("metadata", "expected an object")),
        };
        if let Some(extra) = map.keys().next() {
            return Err(InstanceError::new(extra, "unknown field"));
        }
        let inst = TaskInstance {
            id,
            task,
            table,
            query,
            gold,
            metadata,
        };
        inst.validate()?;
        Ok(inst)
    }
}

#[derive(Serialize, Deserialize)]
struct InstanceRecord {
    id: String,
    task: TaskKind,
    table: Table,
    query: String,
    gold: GoldAnswer,
    #[serde(default)]
    metadata: BTreeMap<String, String>,
}

impl TryFrom<InstanceRecord> for TaskInstance {
    type Error = InstanceError;

    fn try_from(r: InstanceRecord) -> Result<Self, Self::Error> {
        let inst = TaskInstance {
            id: r.id,
            task: r.task,
            table: r.table,
            query: r.query,
            gold: r.gold,
            metadata: r.metadata,
        };
        inst.validate()?;
        Ok(inst)
    }
}

impl From<TaskInstance> for InstanceRecord {
    fn from(i: TaskInstance) -> Self {
        InstanceRecord {
            id: i.id,
            task: i.task,
            table: i.table,
            query: i.query,
            gold: i.gold,
            metadata: i.metadata,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ab12() -> Table {
        Table::from_rows(None, &[vec!["A", "B"], vec!["1", "2"]]).unwrap()
    }

    #[test]
    fn renders_markdown_grid() {
        assert_eq!(
            ab12().render(TableFormat::Markdown).unwrap(),
            "| A | B |\n| --- | --- |\n| 1 | 2 |"
        );
    }

    #[test]
    fn renders_header_only_html() {
        let t = Table::from_rows(None, &[vec!["A"]]).unwrap();
        assert_eq!(
            t.render(TableFormat::Html).unwrap(),
            "<table><tr><th>A</th></tr></table>"
        );
        assert_eq!(
            ab12().render(TableFormat::Html).unwrap(),
            "<table><tr><th>A</th><th>B</th></tr><tr><td>1</td><td>2</td></tr></table>"
        );
    }

    #[test]
    fn pre_rendered_format_mismatch() {
        let t = Table::pre_rendered(None, "| x |\n| --- |".into(), TableFormat::Markdown);
        assert!(matches!(
            t.render(TableFormat::Html),
            Err(TableError::FormatMismatch { .. })
        ));
        assert_eq!(t.render(TableFormat::Markdown).unwrap(), "| x |\n| --- |");
    }

    #[test]
    fn parse_inverts_render() {
        let text = ab12().render(TableFormat::Markdown).unwrap();
        assert_eq!(parse_markdown_table(&text).unwrap(), ab12());
    }

    #[test]
    fn parse_rejects_missing_separator() {
        let err = parse_markdown_table("| A |\n| 1 |").unwrap_err();
        assert!(matches!(err, TableError::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn parse_rejects_ragged_row() {
        let err = parse_markdown_table("| A | B |\n|---|---|\n| 1 |").unwrap_err();
        assert!(matches!(err, TableError::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn parse_accepts_unpadded_cells() {
        let t = parse_markdown_table("|A|B|\n|:--|--:|\n|1|2|").unwrap();
        assert_eq!(t, ab12());
    }

    #[test]
    fn escapes_pipes_in_cells() {
        let t = Table::from_rows(None, &[vec!["a|b", "c\\"], vec!["x", "y"]]).unwrap();
        let md = t.render(TableFormat::Markdown).unwrap();
        assert_eq!(md.lines().next().unwrap(), "| a\\|b | c\\\\ |");
        assert_eq!(parse_markdown_table(&md).unwrap(), t);
    }

    #[test]
    fn rejects_ragged_grid() {
        assert!(Table::from_rows(None, &[vec!["a", "b"], vec!["c"]]).is_err());
        assert!(Table::grid(None, vec![]).is_err());
        assert!(Table::grid(None, vec![vec![]]).is_err());
    }

    #[test]
    fn instance_json_round_trip_and_mismatch() {
        let json = r#"{"id":"x","task":"tqa","table":{"title":"T","grid":[["A"],["1"]]},
                       "query":"q","gold":["1"],"metadata":{"source":"wtq"}}"#;
        let v: serde_json::Value = serde_json::from_str(json).unwrap();
        let inst = TaskInstance::from_json_value(v).unwrap();
        assert_eq!(inst.gold, GoldAnswer::ShortList(vec!["1".into()]));
        let back: TaskInstance =
            serde_json::from_str(&serde_json::to_string(&inst).unwrap()).unwrap();
        assert_eq!(back, inst);

        let bad = r#"{"id":"x","task":"tqa","table":{"title":null,"grid":[["A"]]},
                      "query":"q","gold":"entailed"}"#;
        let err = TaskInstance::from_json_value(serde_json::from_str(bad).unwrap()).unwrap_err();
        assert_eq!(err.field, "gold");
    }

    #[test]
    fn gold_variants_deserialize() {
        let g: GoldAnswer = serde_json::from_str(r#""Refuted""#).unwrap();
        assert_eq!(g, GoldAnswer::Label(Label::Refuted));
        let g: GoldAnswer = serde_json::from_str(r#"{"sentence":"It rained."}"#).unwrap();
        assert_eq!(g, GoldAnswer::Sentence("It rained.".into()));
        assert!(serde_json::from_str::<GoldAnswer>(r#"["", "a"]"#).is_err());
        assert!(serde_json::from_str::<GoldAnswer>(r#""maybe""#).is_err());
    }

    fn grid_strategy() -> impl Strategy<Value = Vec<Vec<String>>> {
        (1usize..5, 1usize..5).prop_flat_map(|(rows, cols)| {
            proptest::collection::vec(
                proptest::collection::vec("[ -~\\n\\\\|é]{0,8}", cols..=cols),
                rows..=rows,
            )
        })
    }

    proptest! {
        #[test]
        fn markdown_round_trip(grid in grid_strategy()) {
            let t = Table::grid(None, grid).unwrap();
            let md = t.render(TableFormat::Markdown).unwrap();
            prop_assert_eq!(parse_markdown_table(&md).unwrap(), t.clone());
            prop_assert_eq!(t.render(TableFormat::Markdown).unwrap(), md);
        }
    }
}
