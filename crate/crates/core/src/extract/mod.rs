//! Fact extraction: the textual content of every fact for one bug.
//!
//! Static facts (buggy function, enclosing class, used method signatures,
//! imports) come from the source text through a [`SourceParser`]. Dynamic
//! facts are read from trace files produced outside this toolkit.

mod complexity;
pub mod python;
mod trace;

use serde::{Deserialize, Serialize};

use crate::corpus::{BugRecord, FailingTest, Issue, LineSpan};
use crate::facts::{FactKind, FactSet};

pub use complexity::cyclomatic_complexity;
pub use python::PythonParser;
pub use trace::{ingest_trace, parse_trace, TraceError, TraceMode, VariableSnapshot, VariableSnapshotCase};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, thiserror::Error)]
pub enum ExtractError {
    #[error("{bug_id}: source does not parse: {diagnostic}")]
    Parse { bug_id: String, diagnostic: ParseError },
    #[error("{bug_id}: span {span} is not a function")]
    SpanNotFunction { bug_id: String, span: LineSpan },
    #[error("{bug_id}: {source}")]
    Trace {
        bug_id: String,
        #[source]
        source: TraceError,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeKind {
    Function,
    Class,
}

/// A function or class definition recovered from source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutlineNode {
    pub kind: NodeKind,
    pub name: String,
    /// Header text after the keyword, e.g. `f(self, x=1) -> int`.
    pub signature: String,
    /// Full header without the trailing colon, e.g. `class A(Base)`.
    pub header: String,
    /// First line including decorators (1-based).
    pub start_line: usize,
    /// Line of the `def`/`class` keyword.
    pub header_line: usize,
    pub end_line: usize,
    pub indent: String,
    /// Raw docstring literal, quotes included.
    pub docstring: Option<String>,
    pub children: Vec<OutlineNode>,
}

impl OutlineNode {
    pub fn functions(&self) -> impl Iterator<Item = &OutlineNode> {
        self.children.iter().filter(|c| c.kind == NodeKind::Function)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outline {
    pub nodes: Vec<OutlineNode>,
    pub imports: Vec<String>,
    pub line_count: usize,
}

impl Outline {
    /// The function whose definition starts at `line` (decorator or `def`
    /// line), together with its directly enclosing class.
    pub fn function_at(&self, line: usize) -> Option<(&OutlineNode, Option<&OutlineNode>)> {
        fn walk<'a>(
            nodes: &'a [OutlineNode],
            parent: Option<&'a OutlineNode>,
            line: usize,
        ) -> Option<(&'a OutlineNode, Option<&'a OutlineNode>)> {
            for node in nodes {
                if node.kind == NodeKind::Function && (node.start_line == line || node.header_line == line) {
                    let class = parent.filter(|p| p.kind == NodeKind::Class);
                    return Some((node, class));
                }
                if node.start_line <= line && line <= node.end_line {
                    if let Some(found) = walk(&node.children, Some(node), line) {
                        return Some(found);
                    }
                }
            }
            None
        }
        walk(&self.nodes, None, line)
    }

    pub fn top_level_functions(&self) -> impl Iterator<Item = &OutlineNode> {
        self.nodes.iter().filter(|n| n.kind == NodeKind::Function)
    }
}

/// A call expression inside a function. `receiver` is set for
/// `self.name(...)`/`cls.name(...)` calls.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallSite {
    pub receiver: Option<String>,
    pub name: String,
}

/// Language front end used by extraction and complexity analysis.
pub trait SourceParser: Send + Sync {
    fn language(&self) -> &'static str;

    fn outline(&self, source: &str) -> Result<Outline, ParseError>;

    /// Number of decision points in a single function.
    fn decision_points(&self, function_code: &str) -> Result<usize, ParseError>;

    /// Statically resolvable call sites in the function body, in order of
    /// first occurrence.
    fn call_sites(&self, function_code: &str) -> Result<Vec<CallSite>, ParseError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SignatureScope {
    InClass,
    InFile,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodSignature {
    pub scope: SignatureScope,
    pub signature: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassDeclaration {
    /// `class Name(Bases)` without the colon.
    pub header: String,
    pub docstring: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractedFacts {
    pub bug_id: String,
    pub function_name: String,
    /// Verbatim lines of the buggy function span.
    pub buggy_function_code: String,
    pub class_declaration: Option<ClassDeclaration>,
    pub used_method_signatures: Vec<MethodSignature>,
    pub failing_tests: Vec<FailingTest>,
    pub error_info: Option<String>,
    pub runtime_cases: Vec<VariableSnapshotCase>,
    pub angelic_cases: Vec<VariableSnapshotCase>,
    pub issue: Option<Issue>,
    pub imports: Vec<String>,
    pub cyclomatic_complexity: usize,
}

impl ExtractedFacts {
    /// Whether there is content to render for `kind`.
    pub fn has(&self, kind: FactKind) -> bool {
        match kind {
            FactKind::BuggyClass => self.class_declaration.is_some(),
            FactKind::UsedMethodSignatures => !self.used_method_signatures.is_empty(),
            FactKind::FailingTest => !self.failing_tests.is_empty(),
            FactKind::ErrorInfo => self.error_info.is_some(),
            FactKind::RuntimeInfo => !self.runtime_cases.is_empty(),
            FactKind::AngelicForest => !self.angelic_cases.is_empty(),
            FactKind::GitHubIssue => self.issue.is_some(),
        }
    }

    /// Facts that have content for this bug.
    pub fn availability(&self) -> FactSet {
        FactSet::from_kinds(FactKind::ALL.into_iter().filter(|k| self.has(*k)))
    }
}

fn span_text(source: &str, span: LineSpan) -> String {
    source
        .split_inclusive('\n')
        .skip(span.start - 1)
        .take(span.end + 1 - span.start)
        .collect()
}

/// Static facts only; trace-derived fields are left empty.
pub fn extract_static_facts(bug: &BugRecord, parser: &dyn SourceParser) -> Result<ExtractedFacts, ExtractError> {
    let parse_err = |diagnostic| ExtractError::Parse {
        bug_id: bug.bug_id.clone(),
        diagnostic,
    };
    let outline = parser.outline(&bug.source_text).map_err(parse_err)?;
    let span = bug.buggy_function_span;
    let (function, class) = outline
        .function_at(span.start)
        .filter(|(f, _)| f.header_line <= span.end)
        .ok_or_else(|| ExtractError::SpanNotFunction {
            bug_id: bug.bug_id.clone(),
            span,
        })?;
    let code = span_text(&bug.source_text, span);
    let complexity = cyclomatic_complexity(&code, parser).map_err(parse_err)?;

    let mut signatures = Vec::new();
    for site in parser.call_sites(&code).map_err(parse_err)? {
        let resolved = match (&site.receiver, class) {
            (Some(_), Some(class)) => class
                .functions()
                .find(|m| m.name == site.name && m.header_line != function.header_line)
                .map(|m| (SignatureScope::InClass, m)),
            (None, _) => outline
                .top_level_functions()
                .find(|f| f.name == site.name && f.header_line != function.header_line)
                .map(|f| (SignatureScope::InFile, f)),
            _ => None,
        };
        if let Some((scope, node)) = resolved {
            let sig = MethodSignature {
                scope,
                signature: node.signature.clone(),
            };
            if !signatures.contains(&sig) {
                signatures.push(sig);
            }
        }
    }

    let imports = if bug.imports.is_empty() {
        outline.imports.clone()
    } else {
        bug.imports.clone()
    };

    Ok(ExtractedFacts {
        bug_id: bug.bug_id.clone(),
        function_name: function.name.clone(),
        buggy_function_code: code,
        class_declaration: class.map(|c| ClassDeclaration {
            header: c.header.clone(),
            docstring: c.docstring.clone(),
        }),
        used_method_signatures: signatures,
        failing_tests: bug.failing_tests.clone(),
        error_info: Some(bug.error_text.clone()).filter(|t| !t.trim().is_empty()),
        runtime_cases: Vec::new(),
        angelic_cases: Vec::new(),
        issue: bug.issue.clone().filter(|i| !i.is_blank()),
        imports,
        cyclomatic_complexity: complexity,
    })
}

/// Static facts plus ingested runtime and angelic traces.
pub fn extract_facts(bug: &BugRecord, parser: &dyn SourceParser) -> Result<ExtractedFacts, ExtractError> {
    let mut facts = extract_static_facts(bug, parser)?;
    let trace_err = |source| ExtractError::Trace {
        bug_id: bug.bug_id.clone(),
        source,
    };
    if let Some(path) = &bug.runtime_trace_path {
        facts.runtime_cases = ingest_trace(path, TraceMode::Runtime).map_err(trace_err)?;
    }
    if let Some(path) = &bug.angelic_trace_path {
        facts.angelic_cases = ingest_trace(path, TraceMode::Angelic).map_err(trace_err)?;
    }
    Ok(facts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::BugRecord;

    const SOURCE: &str = r#"import re
from collections import OrderedDict


def normalize(text):
    return text.strip()


def unrelated():
    pass


class Wrapper(object):
    """Wraps text."""

    width = 10

    def _split(self, text):
        return text.split()

    def _measure(self, word):
        return len(word)

    def wrap(self, text):
        words = self._split(normalize(text))
        total = 0
        for w in words:
            total += self._measure(w)
        return self._split(text), unrelated_name(total)


def standalone(x):
    y = normalize(x)
    return helper_missing(y)
"#;

    fn bug(span: (usize, usize)) -> BugRecord {
        BugRecord::builder("demo:1", "demo", "demo/wrap.py", SOURCE)
            .span(span.0, span.1)
            .build()
            .unwrap()
    }

    #[test]
    fn method_with_siblings_and_module_function() {
        let facts = extract_static_facts(&bug((24, 29)), &PythonParser).unwrap();
        assert_eq!(facts.function_name, "wrap");
        let class = facts.class_declaration.as_ref().unwrap();
        assert_eq!(class.header, "class Wrapper(object)");
        assert_eq!(class.docstring.as_deref(), Some("\"\"\"Wraps text.\"\"\""));
        let scopes: Vec<_> = facts.used_method_signatures.iter().map(|s| (s.scope, s.signature.as_str())).collect();
        assert_eq!(
            scopes,
            vec![
                (SignatureScope::InClass, "_split(self, text)"),
                (SignatureScope::InFile, "normalize(text)"),
                (SignatureScope::InClass, "_measure(self, word)"),
            ]
        );
        assert_eq!(facts.imports, vec!["import re", "from collections import OrderedDict"]);
        assert_eq!(facts.cyclomatic_complexity, 2);
        assert!(facts.buggy_function_code.starts_with("    def wrap(self, text):\n"));
    }

    #[test]
    fn top_level_function_has_no_class() {
        let facts = extract_static_facts(&bug((32, 34)), &PythonParser).unwrap();
        assert_eq!(facts.class_declaration, None);
        assert_eq!(
            facts.used_method_signatures,
            vec![MethodSignature {
                scope: SignatureScope::InFile,
                signature: "normalize(text)".into()
            }]
        );
    }

    #[test]
    fn span_over_class_is_rejected() {
        let err = extract_static_facts(&bug((13, 29)), &PythonParser).unwrap_err();
        assert!(err.to_string().contains("is not a function"), "{err}");
    }

    #[test]
    fn unparseable_source_carries_diagnostics() {
        let bug = BugRecord::builder("demo:2", "demo", "x.py", "def f(:\n    return (1\n")
            .span(1, 2)
            .build()
            .unwrap();
        match extract_static_facts(&bug, &PythonParser).unwrap_err() {
            ExtractError::Parse { diagnostic, .. } => assert!(diagnostic.message.contains("unclosed")),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn extraction_is_deterministic() {
        let a = extract_static_facts(&bug((24, 29)), &PythonParser).unwrap();
        let b = extract_static_facts(&bug((24, 29)), &PythonParser).unwrap();
        assert_eq!(a, b);
    }
}
