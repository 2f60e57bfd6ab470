use crate::corpus::BugRecord;
use crate::extract::python::dedent;
use crate::extract::{NodeKind, OutlineNode, ParseError, PythonParser, SourceParser};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum SpliceError {
    #[error("patch does not parse: {0}")]
    PatchParse(ParseError),
    #[error("buggy source does not parse: {0}")]
    SourceParse(ParseError),
    #[error("no function starts at line {0} of the buggy source")]
    NoFunction(usize),
    #[error("patch defines no function named {0:?}")]
    Missing(String),
    #[error("patch defines {count} top-level functions named {name:?}")]
    Ambiguous { name: String, count: usize },
    #[error("patch defines other top-level functions: {0:?}")]
    Extra(Vec<String>),
}

fn is_fence(line: &str) -> bool {
    line.trim_start().starts_with("```")
}

fn defines(block: &str, name: &str) -> bool {
    let def = format!("def {name}(");
    block.lines().any(|l| {
        let t = l.trim_start();
        t.starts_with(&def) || t.strip_prefix("async ").is_some_and(|r| r.starts_with(&def))
    })
}

/// Contents of the last fenced code block that defines `function_name`.
pub fn extract_patch(raw_text: &str, function_name: &str) -> Option<String> {
    let mut blocks = Vec::new();
    let mut current: Option<Vec<&str>> = None;
    for line in raw_text.lines() {
        match (&mut current, is_fence(line)) {
            (None, true) => current = Some(Vec::new()),
            (Some(lines), true) => {
                blocks.push(lines.join("\n"));
                current = None;
            }
            (Some(lines), false) => lines.push(line),
            (None, false) => {}
        }
    }
    blocks.into_iter().rev().find(|b| defines(b, function_name)).map(|mut b| {
        b.push('\n');
        b
    })
}

fn leading_ws(line: &str) -> &str {
    &line[..line.len() - line.trim_start_matches([' ', '\t']).len()]
}

/// The patch's replacement function: a single top-level `def` named
/// `name`, or that method inside a single top-level class when the model
/// echoed the class around it. Returns the function's lines.
fn patch_function<'a>(patch: &'a str, name: &str, parser: &dyn SourceParser) -> Result<Vec<&'a str>, SpliceError> {
    let dedented = dedent(patch);
    let outline = parser.outline(&dedented).map_err(SpliceError::PatchParse)?;
    let top: Vec<&OutlineNode> = outline.top_level_functions().collect();
    let named: Vec<&OutlineNode> = top.iter().copied().filter(|f| f.name == name).collect();
    let node = match named.len() {
        1 => {
            let others: Vec<String> = top.iter().filter(|f| f.name != name).map(|f| f.name.clone()).collect();
            if !others.is_empty() {
                return Err(SpliceError::Extra(others));
            }
            named[0]
        }
        0 => {
            let methods: Vec<&OutlineNode> = outline
                .nodes
                .iter()
                .filter(|n| n.kind == NodeKind::Class)
                .flat_map(|c| c.functions().filter(|m| m.name == name))
                .collect();
            match methods.len() {
                1 if top.is_empty() => methods[0],
                0 => return Err(SpliceError::Missing(name.to_string())),
                count => return Err(SpliceError::Ambiguous { name: name.into(), count }),
            }
        }
        count => return Err(SpliceError::Ambiguous { name: name.into(), count }),
    };
    let lines: Vec<&str> = patch.lines().collect();
    Ok(lines[node.start_line - 1..node.end_line].to_vec())
}

/// Replace the buggy function's span with the function defined in `patch`,
/// re-indented to the original indentation. Lines outside the span are
/// left byte-identical.
pub fn splice(bug: &BugRecord, patch: &str) -> Result<String, SpliceError> {
    splice_with(bug, patch, &PythonParser)
}

pub fn splice_with(bug: &BugRecord, patch: &str, parser: &dyn SourceParser) -> Result<String, SpliceError> {
    let span = bug.buggy_function_span;
    let outline = parser.outline(&bug.source_text).map_err(SpliceError::SourceParse)?;
    let (function, _) = outline.function_at(span.start).ok_or(SpliceError::NoFunction(span.start))?;
    let lines = patch_function(patch, &function.name, parser)?;

    let patch_indent = lines
        .iter()
        .filter(|l| !l.trim().is_empty())
        .map(|l| leading_ws(l))
        .min_by_key(|s| s.len())
        .unwrap_or_default();
    let source_lines: Vec<&str> = bug.source_text.split_inclusive('\n').collect();
    let original_indent = leading_ws(source_lines[span.start - 1]);
    let replaced_ends_with_newline = source_lines[span.end - 1].ends_with('\n');

    let mut out = String::with_capacity(bug.source_text.len() + patch.len());
    for l in &source_lines[..span.start - 1] {
        out.push_str(l);
    }
    let body: Vec<String> = lines
        .iter()
        .map(|l| match l.strip_prefix(patch_indent) {
            Some(rest) if !l.trim().is_empty() => format!("{original_indent}{rest}"),
            _ => l.to_string(),
        })
        .collect();
    out.push_str(&body.join("\n"));
    if replaced_ends_with_newline {
        out.push('\n');
    }
    for l in &source_lines[span.end..] {
        out.push_str(l);
    }
    Ok(out)
}
