//! Runtime and angelic trace ingestion.
//!
//! Trace file schema (JSON):
//!
//! ```json
//! [{"case_id": 1,
//!   "entry": [{"name": "x", "value": "1", "type": "int"}],
//!   "exit":  [{"name": "x", "value": "2", "type": "int"}]}]
//! ```
//!
//! Values are stored pre-rendered and are never re-rendered here.

use std::collections::{HashMap, HashSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

/// Type names of class- and function-valued variables, which are dropped.
const CALLABLE_TYPES: &[&str] = &[
    "type",
    "function",
    "method",
    "builtin_function_or_method",
    "classmethod",
    "staticmethod",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TraceMode {
    Runtime,
    Angelic,
}

#[derive(Debug, thiserror::Error)]
pub enum TraceError {
    #[error("{mode:?} trace {path}: {source}")]
    Io {
        mode: TraceMode,
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{mode:?} trace {path}: line {line}, column {column}: {message}")]
    Schema {
        mode: TraceMode,
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{mode:?} trace {path}: case {case_id}: duplicate variable {name:?} in {field}")]
    DuplicateName {
        mode: TraceMode,
        path: PathBuf,
        case_id: i64,
        field: &'static str,
        name: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableSnapshot {
    pub name: String,
    pub value_repr: String,
    pub type_repr: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableSnapshotCase {
    pub case_id: i64,
    pub entry: Vec<VariableSnapshot>,
    /// Only variables whose value changed, or that did not exist at entry.
    pub exit: Vec<VariableSnapshot>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawVar {
    name: String,
    value: String,
    #[serde(rename = "type")]
    type_name: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCase {
    case_id: i64,
    entry: Vec<RawVar>,
    exit: Vec<RawVar>,
}

pub fn ingest_trace(path: &Path, mode: TraceMode) -> Result<Vec<VariableSnapshotCase>, TraceError> {
    let text = std::fs::read_to_string(path).map_err(|source| TraceError::Io {
        mode,
        path: path.to_path_buf(),
        source,
    })?;
    parse_trace(&text, path, mode)
}

/// Parse trace text; `origin` only labels errors.
pub fn parse_trace(text: &str, origin: &Path, mode: TraceMode) -> Result<Vec<VariableSnapshotCase>, TraceError> {
    let raw: Vec<RawCase> = serde_json::from_str(text).map_err(|e| TraceError::Schema {
        mode,
        path: origin.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    raw.into_iter()
        .map(|case| {
            let dup = |field: &'static str, vars: &[RawVar]| {
                let mut seen = HashSet::new();
                vars.iter().find(|v| !seen.insert(v.name.as_str())).map(|v| TraceError::DuplicateName {
                    mode,
                    path: origin.to_path_buf(),
                    case_id: case.case_id,
                    field,
                    name: v.name.clone(),
                })
            };
            if let Some(e) = dup("entry", &case.entry).or_else(|| dup("exit", &case.exit)) {
                return Err(e);
            }
            let keep = |v: &RawVar| !CALLABLE_TYPES.contains(&v.type_name.as_str());
            let snapshot = |v: RawVar| VariableSnapshot {
                name: v.name,
                value_repr: v.value,
                type_repr: v.type_name,
            };
            let entry_values: HashMap<&str, &str> =
                case.entry.iter().map(|v| (v.name.as_str(), v.value.as_str())).collect();
            let exit_changed: Vec<bool> = case
                .exit
                .iter()
                .map(|v| entry_values.get(v.name.as_str()) != Some(&v.value.as_str()))
                .collect();
            let exit = case
                .exit
                .into_iter()
                .zip(exit_changed)
                .filter(|(v, changed)| *changed && keep(v))
                .map(|(v, _)| snapshot(v))
                .collect();
            let entry = case.entry.into_iter().filter(keep).map(snapshot).collect();
            Ok(VariableSnapshotCase {
                case_id: case.case_id,
                entry,
                exit,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str, mode: TraceMode) -> Result<Vec<VariableSnapshotCase>, TraceError> {
        parse_trace(text, Path::new("t.json"), mode)
    }

    #[test]
    fn unchanged_variable_dropped_from_exit() {
        let cases = parse(
            r#"[{"case_id": 1, "entry": [{"name": "x", "value": "1", "type": "int"}],
                "exit": [{"name": "x", "value": "1", "type": "int"}, {"name": "r", "value": "'a'", "type": "str"}]}]"#,
            TraceMode::Runtime,
        )
        .unwrap();
        assert_eq!(cases.len(), 1);
        assert_eq!(cases[0].entry.len(), 1);
        assert_eq!(cases[0].exit.iter().map(|v| v.name.as_str()).collect::<Vec<_>>(), vec!["r"]);
    }

    #[test]
    fn empty_case_list() {
        assert!(parse("[]", TraceMode::Angelic).unwrap().is_empty());
    }

    #[test]
    fn callables_filtered() {
        let cases = parse(
            r#"[{"case_id": 3, "entry": [{"name": "cb", "value": "<function f>", "type": "function"},
                                         {"name": "k", "value": "<class 'A'>", "type": "type"},
                                         {"name": "n", "value": "2", "type": "int"}],
                "exit": [{"name": "cb", "value": "<function g>", "type": "function"}]}]"#,
            TraceMode::Runtime,
        )
        .unwrap();
        assert_eq!(cases[0].entry.iter().map(|v| v.name.as_str()).collect::<Vec<_>>(), vec!["n"]);
        assert!(cases[0].exit.is_empty());
    }

    #[test]
    fn schema_violation_has_position() {
        let err = parse("[{\"case_id\": 1,\n \"entry\": [],\n \"exits\": []}]", TraceMode::Runtime).unwrap_err();
        match err {
            TraceError::Schema { line, .. } => assert_eq!(line, 3),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn duplicate_names_rejected() {
        let err = parse(
            r#"[{"case_id": 1, "entry": [{"name": "x", "value": "1", "type": "int"}, {"name": "x", "value": "2", "type": "int"}], "exit": []}]"#,
            TraceMode::Runtime,
        )
        .unwrap_err();
        assert!(matches!(err, TraceError::DuplicateName { .. }));
    }

    #[test]
    fn modes_share_shape() {
        let text = r#"[{"case_id": 1, "entry": [{"name": "a", "value": "1", "type": "int"}], "exit": [{"name": "a", "value": "2", "type": "int"}]}]"#;
        assert_eq!(parse(text, TraceMode::Runtime).unwrap(), parse(text, TraceMode::Angelic).unwrap());
    }
}
