use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::table::TaskInstance;

/// A schema violation on one line of a JSONL file.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("line {line}: field `{field}`: {message}")]
pub struct SchemaError {
    pub line: usize,
    pub field: String,
    pub message: String,
}

/// Records read from a JSONL file plus the lines that failed validation.
#[derive(Debug, Clone)]
pub struct Ingested<T> {
    pub records: Vec<T>,
    pub errors: Vec<SchemaError>,
}

/// Model responses for one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionRecord {
    #[serde(rename = "id")]
    pub instance_id: String,
    #[serde(rename = "model", default)]
    pub model_tag: String,
    pub responses: Vec<String>,
}

/// Reads a JSONL file line by line, converting each non-blank line with
/// `parse`. In strict mode the first bad line aborts the read.
pub fn read_jsonl<T>(
    path: &Path,
    strict: bool,
    mut parse: impl FnMut(serde_json::Value) -> Result<T, (String, String)>,
) -> Result<Ingested<T>, EvalError> {
    let io_err = |source| EvalError::Io {
        path: path.display().to_string(),
        source,
    };
    let reader = BufReader::new(File::open(path).map_err(io_err)?);
    let mut out = Ingested {
        records: Vec::new(),
        errors: Vec::new(),
    };
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err)?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = serde_json::from_str::<serde_json::Value>(&line)
            .map_err(|e| ("<json>".to_string(), e.to_string()))
            .and_then(&mut parse);
        match parsed {
            Ok(rec) => out.records.push(rec),
            Err((field, message)) => {
                let err = SchemaError {
                    line: idx + 1,
                    field,
                    message,
                };
                if strict {
                    return Err(err.into());
                }
                out.errors.push(err);
            }
        }
    }
    Ok(out)
}

/// Loads task instances from a dataset JSONL file. Duplicate ids are schema errors.
pub fn ingest_dataset(path: &Path, strict: bool) -> Result<Ingested<TaskInstance>, EvalError> {
    let mut seen = HashSet::new();
    read_jsonl(path, strict, |value| {
        let inst = TaskInstance::from_json_value(value).map_err(|e| (e.field, e.message))?;
        if !seen.insert(inst.id.clone()) {
            return Err(("id".into(), format!("duplicate id `{}`", inst.id)));
        }
        Ok(inst)
    })
}

/// Loads prediction records from a predictions JSONL file.
pub fn ingest_predictions(
    path: &Path,
    strict: bool,
) -> Result<Ingested<PredictionRecord>, EvalError> {
    read_jsonl(path, strict, |value| {
        let rec: PredictionRecord =
            serde_json::from_value(value).map_err(|e| ("<record>".to_string(), e.to_string()))?;
        if rec.responses.is_empty() {
            return Err(("responses".into(), "at least one response is required".into()));
        }
        Ok(rec)
    })
}
