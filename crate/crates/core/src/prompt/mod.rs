//! Prompt construction: fact templates, chain-of-thought steps and the
//! import preamble, assembled in a fixed section order.
//!
//! Layout of a rendered prompt, sections separated by one blank line:
//!
//! 1. import preamble (when enabled and the file has imports)
//! 2. directive, followed by the numbered steps when CoT is on
//! 3. function section; class declaration and used signatures live inside
//!    its code block
//! 4. the other selected facts in the plan's fact order, where a failing
//!    test and its error message always travel together

mod cot;
pub mod tokenizer;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::Job;
use crate::extract::python::dedent;
use crate::extract::{ExtractedFacts, SignatureScope, VariableSnapshot, VariableSnapshotCase};
use crate::facts::{FactKind, FactSet};

pub use cot::cot_instructions;
pub use tokenizer::{token_count, TokenizerError, DEFAULT_TOKENIZER, TOKENIZER_IDS};

const IMPORT_PREAMBLE: &str = include_str!("../../templates/import_preamble.txt");
const DIRECTIVE: &str = include_str!("../../templates/directive.txt");
const RUNTIME_INTRO: &str = include_str!("../../templates/runtime_intro.txt");
const ANGELIC_INTRO: &str = include_str!("../../templates/angelic_intro.txt");

pub const FUNCTION_HEADER: &str = "# The source code of the buggy function";
pub const CLASS_HEADER: &str = "# The declaration of the class containing the buggy function";
pub const IN_CLASS_SIGNATURE_HEADER: &str = "# This function from the same class is called by the buggy function";
pub const IN_FILE_SIGNATURE_HEADER: &str =
    "# This function from the same file, but not the same class, is called by the buggy function";
pub const TEST_HEADER: &str = "# A test function that the buggy function fails:";
pub const ERROR_HEADER: &str = "# The error message from the failing test";
pub const RUNTIME_HEADER: &str = "# Runtime values and types of variables inside the buggy function";
pub const ANGELIC_HEADER: &str = "# Expected values and types of variables during the failing test execution";
pub const ISSUE_HEADER: &str = "# A GitHub issue for this bug";

const MEMBER_INDENT: &str = "    ";

/// Facts whose sections may be reordered.
pub const ORDERABLE: [FactKind; 5] = [
    FactKind::FailingTest,
    FactKind::ErrorInfo,
    FactKind::RuntimeInfo,
    FactKind::AngelicForest,
    FactKind::GitHubIssue,
];

/// A permutation of [`ORDERABLE`]. Written as comma-separated taxonomy
/// codes, e.g. `2.2,1.3,2.1,2.3,3.1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct FactOrder([FactKind; 5]);

impl FactOrder {
    pub const CANONICAL: FactOrder = FactOrder(ORDERABLE);

    pub fn new(order: [FactKind; 5]) -> Result<FactOrder, PromptError> {
        let mut sorted = order;
        sorted.sort();
        if sorted != ORDERABLE {
            return Err(PromptError::BadOrder(format!("{order:?} is not a permutation of the orderable facts")));
        }
        Ok(FactOrder(order))
    }

    pub fn kinds(&self) -> &[FactKind; 5] {
        &self.0
    }

    pub fn is_canonical(&self) -> bool {
        *self == Self::CANONICAL
    }

    /// Position in [`enumerate_orderings`].
    pub fn index(&self) -> usize {
        let mut remaining: Vec<FactKind> = ORDERABLE.to_vec();
        let mut index = 0;
        for (i, k) in self.0.iter().enumerate() {
            let pos = remaining.iter().position(|r| r == k).expect("permutation");
            index += pos * factorial(4 - i);
            remaining.remove(pos);
        }
        index
    }
}

fn factorial(n: usize) -> usize {
    (1..=n).product()
}

impl Default for FactOrder {
    fn default() -> Self {
        Self::CANONICAL
    }
}

impl fmt::Display for FactOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let codes: Vec<&str> = self.0.iter().map(|k| k.code()).collect();
        f.write_str(&codes.join(","))
    }
}

impl FromStr for FactOrder {
    type Err = PromptError;

    /// Accepts taxonomy codes (`2.2,1.3,2.1,2.3,3.1`) or an index into
    /// [`enumerate_orderings`].
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if let Ok(i) = s.trim().parse::<usize>() {
            return enumerate_orderings()
                .get(i)
                .copied()
                .ok_or_else(|| PromptError::BadOrder(format!("ordering index {i} out of range 0..120")));
        }
        let kinds: Vec<FactKind> = s
            .split(',')
            .map(|c| FactKind::from_code(c.trim()).ok_or_else(|| PromptError::BadOrder(format!("unknown fact code {c:?}"))))
            .collect::<Result<_, _>>()?;
        let arr: [FactKind; 5] = kinds
            .try_into()
            .map_err(|_| PromptError::BadOrder(format!("{s:?} does not list five facts")))?;
        FactOrder::new(arr)
    }
}

impl TryFrom<String> for FactOrder {
    type Error = PromptError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<FactOrder> for String {
    fn from(o: FactOrder) -> String {
        o.to_string()
    }
}

/// All 120 orderings in lexicographic order of positions in
/// [`ORDERABLE`]; the canonical order comes first.
pub fn enumerate_orderings() -> Vec<FactOrder> {
    let mut out = Vec::with_capacity(120);
    let mut idx = [0usize, 1, 2, 3, 4];
    loop {
        out.push(FactOrder(idx.map(|i| ORDERABLE[i])));
        // next lexicographic permutation
        let Some(i) = (0..4).rev().find(|&i| idx[i] < idx[i + 1]) else {
            break;
        };
        let j = (i + 1..5).rev().find(|&j| idx[j] > idx[i]).expect("successor exists");
        idx.swap(i, j);
        idx[i + 1..].reverse();
    }
    out
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum PromptError {
    #[error("fact {kind} ({code}) is selected but has no extracted content", kind = .0, code = .0.code())]
    MissingFact(FactKind),
    #[error("bad fact order: {0}")]
    BadOrder(String),
    #[error(transparent)]
    Tokenizer(#[from] TokenizerError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptPlan {
    pub job: Job,
    pub fact_order: FactOrder,
    pub include_cot: bool,
    pub include_import_preamble: bool,
}

impl PromptPlan {
    pub fn new(job: Job) -> PromptPlan {
        PromptPlan {
            job,
            fact_order: FactOrder::CANONICAL,
            include_cot: true,
            include_import_preamble: true,
        }
    }

    pub fn with_order(mut self, order: FactOrder) -> Self {
        self.fact_order = order;
        self
    }

    pub fn without_cot(mut self) -> Self {
        self.include_cot = false;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderedPrompt {
    pub text: String,
    pub char_length: usize,
    pub token_length: usize,
    pub prompt_hash: String,
}

impl RenderedPrompt {
    pub fn from_text(text: String) -> RenderedPrompt {
        RenderedPrompt {
            char_length: text.chars().count(),
            token_length: tokenizer::bundled_bpe().count(&text),
            prompt_hash: prompt_hash(&text),
            text,
        }
    }
}

pub fn prompt_hash(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

fn indent_block(text: &str, indent: &str) -> String {
    text.lines()
        .map(|l| if l.trim().is_empty() { String::new() } else { format!("{indent}{l}") })
        .collect::<Vec<_>>()
        .join("\n")
}

fn signature_stub(header: &str, signature: &str, indent: &str) -> String {
    format!("{indent}{header}\n{indent}def {signature}:\n{indent}{MEMBER_INDENT}# Please ignore the body of this function")
}

fn function_section(s: FactSet, facts: &ExtractedFacts) -> String {
    let with_class = s.contains(FactKind::BuggyClass);
    let with_sigs = s.contains(FactKind::UsedMethodSignatures);
    let member = if with_class { MEMBER_INDENT } else { "" };
    let mut blocks: Vec<String> = Vec::new();

    if with_sigs {
        for sig in facts.used_method_signatures.iter().filter(|m| m.scope == SignatureScope::InFile) {
            blocks.push(signature_stub(IN_FILE_SIGNATURE_HEADER, &sig.signature, ""));
        }
    }
    if with_class {
        let class = facts.class_declaration.as_ref().expect("checked by caller");
        let mut decl = format!("{CLASS_HEADER}\n{}:", class.header);
        if let Some(doc) = &class.docstring {
            decl.push_str(&format!("\n{MEMBER_INDENT}{doc}"));
        }
        decl.push_str(&format!("\n\n{MEMBER_INDENT}..."));
        blocks.push(decl);
    }
    if with_sigs {
        for sig in facts.used_method_signatures.iter().filter(|m| m.scope == SignatureScope::InClass) {
            blocks.push(signature_stub(IN_CLASS_SIGNATURE_HEADER, &sig.signature, member));
        }
    }
    let body = indent_block(dedent(&facts.buggy_function_code).trim_end(), member);
    blocks.push(format!("{member}# this is the buggy function you need to fix\n{body}"));

    format!("{FUNCTION_HEADER}\n```python\n{}\n```", blocks.join("\n\n"))
}

fn test_section(facts: &ExtractedFacts) -> String {
    let blocks: Vec<String> = facts
        .failing_tests
        .iter()
        .map(|t| {
            format!(
                "```python\n# The relative path of the failing test file: {}\n\n{}\n```",
                t.test_file_path,
                t.test_code.trim_end()
            )
        })
        .collect();
    format!("{TEST_HEADER}\n{}", blocks.join("\n"))
}

fn error_section(facts: &ExtractedFacts) -> String {
    let text = facts.error_info.as_deref().unwrap_or_default();
    format!("{ERROR_HEADER}\n```text\n{}\n```", text.trim_end())
}

fn variable_lines(vars: &[VariableSnapshot], value_label: &str) -> String {
    vars.iter()
        .map(|v| format!("{}, {value_label}: `{}`, type: `{}`", v.name, v.value_repr, v.type_repr))
        .collect::<Vec<_>>()
        .join("\n")
}

fn case_block(case: &VariableSnapshotCase, angelic: bool) -> String {
    let (title, entry_header, exit_header, label) = if angelic {
        (
            format!("# Expected case {}", case.case_id),
            "# The values and types of buggy function's parameters",
            "## Expected values and types of variables right before the buggy function's return",
            "expected value",
        )
    } else {
        (
            format!("# Case {}", case.case_id),
            "## Runtime values and types of the input parameters of the buggy function",
            "## Runtime values and types of variables right before the buggy function's return",
            "value",
        )
    };
    let mut parts = vec![format!("{title}\n{entry_header}\n{}", variable_lines(&case.entry, label))];
    if !case.exit.is_empty() {
        parts.push(format!("{exit_header}\n{}", variable_lines(&case.exit, label)));
    }
    parts.join("\n\n")
}

fn runtime_section(facts: &ExtractedFacts) -> String {
    let cases: Vec<String> = facts.runtime_cases.iter().map(|c| case_block(c, false)).collect();
    format!("{RUNTIME_HEADER}\n\n{}\n\n{}", RUNTIME_INTRO.trim_end(), cases.join("\n\n"))
}

fn angelic_section(facts: &ExtractedFacts) -> String {
    let cases: Vec<String> = facts.angelic_cases.iter().map(|c| case_block(c, true)).collect();
    format!("{ANGELIC_HEADER}\n{}\n\n{}", ANGELIC_INTRO.trim_end(), cases.join("\n\n"))
}

fn issue_section(facts: &ExtractedFacts) -> String {
    let issue = facts.issue.as_ref().expect("checked by caller");
    format!(
        "{ISSUE_HEADER}\nThe issue's title:\n```text\n{}\n```\n```text\nThe issue's detailed description:\n{}\n```",
        issue.title.trim(),
        issue.body.trim_end()
    )
}

/// Selected orderable facts in rendering order, with the error message
/// pulled next to the failing test.
pub fn section_order(effective: FactSet, order: FactOrder) -> Vec<FactKind> {
    let pair = effective.contains(FactKind::FailingTest) && effective.contains(FactKind::ErrorInfo);
    let mut out = Vec::new();
    for k in order.kinds().iter().copied().filter(|k| effective.contains(*k)) {
        match k {
            FactKind::FailingTest | FactKind::ErrorInfo if pair => {
                if !out.contains(&FactKind::FailingTest) {
                    out.push(FactKind::FailingTest);
                    out.push(FactKind::ErrorInfo);
                }
            }
            other => out.push(other),
        }
    }
    out
}

/// Render the prompt text only.
pub fn render_text(plan: &PromptPlan, facts: &ExtractedFacts) -> Result<String, PromptError> {
    let s = plan.job.effective;
    if let Some(missing) = s.kinds().find(|k| !facts.has(*k)) {
        return Err(PromptError::MissingFact(missing));
    }

    let mut sections = Vec::new();
    if plan.include_import_preamble && !facts.imports.is_empty() {
        sections.push(format!(
            "{}\n```python\n{}\n```",
            IMPORT_PREAMBLE.trim_end(),
            facts.imports.join("\n")
        ));
    }
    let mut directive = DIRECTIVE.trim_end().to_string();
    if plan.include_cot {
        directive.push_str("\nFollowing these steps:\n");
        directive.push_str(&cot_instructions(s));
    }
    sections.push(directive);
    sections.push(function_section(s, facts));
    for kind in section_order(s, plan.fact_order) {
        sections.push(match kind {
            FactKind::FailingTest => test_section(facts),
            FactKind::ErrorInfo => error_section(facts),
            FactKind::RuntimeInfo => runtime_section(facts),
            FactKind::AngelicForest => angelic_section(facts),
            FactKind::GitHubIssue => issue_section(facts),
            FactKind::BuggyClass | FactKind::UsedMethodSignatures => unreachable!("not orderable"),
        });
    }
    let mut text = sections.join("\n\n");
    text.push('\n');
    Ok(text)
}

/// Render a prompt and measure it with the bundled tokenizer.
pub fn render(plan: &PromptPlan, facts: &ExtractedFacts) -> Result<RenderedPrompt, PromptError> {
    Ok(RenderedPrompt::from_text(render_text(plan, facts)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{FailingTest, Issue};
    use crate::extract::{ClassDeclaration, MethodSignature};
    use std::collections::HashSet;

    pub(crate) fn sample_facts() -> ExtractedFacts {
        let var = |name: &str, value: &str, ty: &str| VariableSnapshot {
            name: name.into(),
            value_repr: value.into(),
            type_repr: ty.into(),
        };
        ExtractedFacts {
            bug_id: "demo:1".into(),
            function_name: "wrap".into(),
            buggy_function_code: "    def wrap(self, text):\n        return self._split(normalize(text))\n".into(),
            class_declaration: Some(ClassDeclaration {
                header: "class Wrapper(object)".into(),
                docstring: Some("\"\"\"Wraps text.\"\"\"".into()),
            }),
            used_method_signatures: vec![
                MethodSignature {
                    scope: SignatureScope::InClass,
                    signature: "_split(self, text)".into(),
                },
                MethodSignature {
                    scope: SignatureScope::InFile,
                    signature: "normalize(text)".into(),
                },
            ],
            failing_tests: vec![FailingTest {
                test_file_path: "tests/test_wrap.py".into(),
                test_code: "def test_wrap():\n    assert Wrapper().wrap(' a ') == ['a']\n".into(),
            }],
            error_info: Some("AssertionError: [] != ['a']\n".into()),
            runtime_cases: vec![VariableSnapshotCase {
                case_id: 1,
                entry: vec![var("text", "' a '", "str")],
                exit: vec![],
            }],
            angelic_cases: vec![VariableSnapshotCase {
                case_id: 1,
                entry: vec![var("text", "' a '", "str")],
                exit: vec![var("words", "['a']", "list")],
            }],
            issue: Some(Issue {
                title: "wrap drops words".into(),
                body: "Calling wrap on padded text loses words.".into(),
            }),
            imports: vec!["import re".into()],
            cyclomatic_complexity: 1,
        }
    }

    fn plan(bits: &str) -> PromptPlan {
        let s: FactSet = bits.parse().unwrap();
        PromptPlan::new(Job {
            bug_id: "demo:1".into(),
            requested: s,
            effective: s,
        })
    }

    fn headers_of(kind: FactKind) -> &'static str {
        match kind {
            FactKind::BuggyClass => CLASS_HEADER,
            FactKind::UsedMethodSignatures => "is called by the buggy function",
            FactKind::FailingTest => TEST_HEADER,
            FactKind::ErrorInfo => ERROR_HEADER,
            FactKind::RuntimeInfo => RUNTIME_HEADER,
            FactKind::AngelicForest => ANGELIC_HEADER,
            FactKind::GitHubIssue => ISSUE_HEADER,
        }
    }

    #[test]
    fn orderings() {
        let all = enumerate_orderings();
        assert_eq!(all.len(), 120);
        assert_eq!(all[0], FactOrder::CANONICAL);
        assert_eq!(all.iter().collect::<HashSet<_>>().len(), 120);
        for (i, o) in all.iter().enumerate() {
            assert_eq!(o.index(), i);
            assert_eq!(o.to_string().parse::<FactOrder>().unwrap(), *o);
            assert_eq!(i.to_string().parse::<FactOrder>().unwrap(), *o);
        }
        assert!("1.1,1.3,2.1,2.2,2.3".parse::<FactOrder>().is_err());
        assert!("1.3,2.1".parse::<FactOrder>().is_err());
    }

    #[test]
    fn empty_set_is_directive_and_function_only() {
        let text = render_text(&plan("0000000"), &sample_facts()).unwrap();
        assert!(text.starts_with("Assume that the following list of imports"));
        for k in FactKind::ALL {
            assert!(!text.contains(headers_of(k)), "{k}");
        }
        assert!(text.ends_with("    return self._split(normalize(text))\n```\n"));
    }

    #[test]
    fn headers_present_iff_selected() {
        let facts = sample_facts();
        let sigs = facts.used_method_signatures.len();
        for s in FactSet::all() {
            let mut p = plan("0000000");
            p.job.effective = s;
            let text = render_text(&p, &facts).unwrap();
            for k in FactKind::ALL {
                let expected = match (s.contains(k), k) {
                    (false, _) => 0,
                    (true, FactKind::UsedMethodSignatures) => sigs,
                    (true, _) => 1,
                };
                assert_eq!(text.matches(headers_of(k)).count(), expected, "{s} {k}");
            }
        }
    }

    #[test]
    fn no_cot_has_no_numbered_steps() {
        let text = render_text(&plan("1111111").without_cot(), &sample_facts()).unwrap();
        assert!(!text.contains("Following these steps"));
        assert!(!text.lines().any(|l| l.starts_with("1. ") || l.starts_with("5. ")));
    }

    #[test]
    fn missing_content_is_an_error() {
        let mut facts = sample_facts();
        facts.issue = None;
        assert_eq!(
            render_text(&plan("0000001"), &facts),
            Err(PromptError::MissingFact(FactKind::GitHubIssue))
        );
    }

    #[test]
    fn test_and_error_stay_adjacent_in_every_order() {
        let facts = sample_facts();
        for order in enumerate_orderings() {
            let text = render_text(&plan("0011111").with_order(order), &facts).unwrap();
            let t = text.find(TEST_HEADER).unwrap();
            let e = text.find(ERROR_HEADER).unwrap();
            assert!(t < e);
            let between = &text[t..e];
            for h in [RUNTIME_HEADER, ANGELIC_HEADER, ISSUE_HEADER] {
                assert!(!between.contains(h), "{order}");
            }
        }
    }

    #[test]
    fn orders_move_sections() {
        let facts = sample_facts();
        let order: FactOrder = "3.1,2.2,1.3,2.1,2.3".parse().unwrap();
        let text = render_text(&plan("0011111").with_order(order), &facts).unwrap();
        let pos = |h: &str| text.find(h).unwrap();
        assert!(pos(ISSUE_HEADER) < pos(RUNTIME_HEADER));
        assert!(pos(RUNTIME_HEADER) < pos(TEST_HEADER));
        assert!(pos(ERROR_HEADER) < pos(ANGELIC_HEADER));
        // error listed first still pulls the test in front of it
        let order: FactOrder = "2.1,2.2,2.3,3.1,1.3".parse().unwrap();
        let text = render_text(&plan("0011111").with_order(order), &facts).unwrap();
        assert!(text.find(TEST_HEADER).unwrap() < text.find(RUNTIME_HEADER).unwrap());
    }

    #[test]
    fn lengths_are_monotone_in_the_fact_set() {
        let facts = sample_facts();
        let len = |s: FactSet| {
            let mut p = plan("0000000");
            p.job.effective = s;
            render(&p, &facts).unwrap().char_length
        };
        let lens: Vec<usize> = FactSet::all().map(len).collect();
        for a in FactSet::all() {
            for b in FactSet::all() {
                if a.is_subset_of(b) {
                    assert!(lens[a.value() as usize] <= lens[b.value() as usize], "{a} {b}");
                }
            }
        }
    }

    #[test]
    fn render_is_pure() {
        let a = render(&plan("1010101"), &sample_facts()).unwrap();
        let b = render(&plan("1010101"), &sample_facts()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.char_length, a.text.chars().count());
        assert_eq!(a.prompt_hash.len(), 64);
    }

    #[test]
    fn class_and_signature_layout() {
        let text = render_text(&plan("1100000").without_cot(), &sample_facts()).unwrap();
        let expected = "\
# The source code of the buggy function
```python
# This function from the same file, but not the same class, is called by the buggy function
def normalize(text):
    # Please ignore the body of this function

# The declaration of the class containing the buggy function
class Wrapper(object):
    \"\"\"Wraps text.\"\"\"

    ...

    # This function from the same class is called by the buggy function
    def _split(self, text):
        # Please ignore the body of this function

    # this is the buggy function you need to fix
    def wrap(self, text):
        return self._split(normalize(text))
```
";
        assert!(text.ends_with(expected), "{text}");
    }
}
