//! Chain-of-thought instruction block.
//!
//! The five-step template has two slots: a list of the provided facts
//! (used in steps 1 and 3) and the correctness criteria of step 5. Both are
//! expanded from the effective fact set.

use crate::facts::{FactKind, FactSet};

const SUB_INDENT: &str = "        ";

fn lettered(items: &[&str]) -> String {
    items
        .iter()
        .enumerate()
        .map(|(i, item)| format!("{SUB_INDENT}{}. {item}", (b'a' + i as u8) as char))
        .collect::<Vec<_>>()
        .join("\n")
}

fn variable_phrase(runtime: bool, angelic: bool) -> Option<&'static str> {
    match (runtime, angelic) {
        (true, true) => Some("expected and actual"),
        (true, false) => Some("actual"),
        (false, true) => Some("expected"),
        (false, false) => None,
    }
}

fn step_one(s: FactSet) -> String {
    let mut code = vec!["buggy function"];
    if s.contains(FactKind::BuggyClass) {
        code.push("buggy class");
    }
    if s.contains(FactKind::UsedMethodSignatures) {
        code.push("buggy file");
    }
    let mut text = String::from("1. Analyze the failing test case and its relationship with ");
    if s.contains(FactKind::ErrorInfo) {
        text.push_str("the error message along with ");
    }
    text.push_str("the ");
    text.push_str(&code.join(", "));
    if s.contains(FactKind::GitHubIssue) {
        text.push_str(", the github issue");
    }
    if let Some(p) = variable_phrase(s.contains(FactKind::RuntimeInfo), s.contains(FactKind::AngelicForest)) {
        text.push_str(&format!(", the {p} input/output variable information"));
    }
    text.push('.');
    text
}

fn step_three(s: FactSet) -> String {
    let mut items = vec!["The buggy function"];
    if s.contains(FactKind::BuggyClass) {
        items.push("The buggy class");
    }
    if s.contains(FactKind::UsedMethodSignatures) {
        items.push("The buggy file");
    }
    match (s.contains(FactKind::FailingTest), s.contains(FactKind::ErrorInfo)) {
        (true, true) => items.push("The failing test and error message"),
        (true, false) => items.push("The failing test"),
        (false, true) => items.push("The error message"),
        (false, false) => {}
    }
    match (s.contains(FactKind::RuntimeInfo), s.contains(FactKind::AngelicForest)) {
        (true, true) => items.push("Discrepancies between expected and actual input/output variable values"),
        (true, false) => items.push("The actual input/output variable values"),
        (false, true) => items.push("The expected input/output variable values"),
        (false, false) => {}
    }
    if s.contains(FactKind::GitHubIssue) {
        items.push("The Github Issue information");
    }
    format!("3. Explain the bug's cause using:\n{}", lettered(&items))
}

fn step_five(s: FactSet) -> String {
    let mut criteria = Vec::new();
    if s.contains(FactKind::FailingTest) || s.contains(FactKind::ErrorInfo) {
        criteria.push("Passes the failing test.");
    }
    if s.contains(FactKind::AngelicForest) {
        criteria.push("Satisfies the expected input/output variable values provided.");
    }
    if s.contains(FactKind::GitHubIssue) {
        criteria.push("Successfully resolves the issue posted in Github");
    }
    if criteria.is_empty() {
        "5. Present the corrected code for the problematic function.".to_string()
    } else {
        format!(
            "5. Present the corrected code for the problematic function such that it satisfied the following:\n{}",
            lettered(&criteria)
        )
    }
}

/// The numbered instruction list for `effective`, without a trailing newline.
pub fn cot_instructions(effective: FactSet) -> String {
    [
        step_one(effective),
        "2. Identify the potential error location within the problematic function.".to_string(),
        step_three(effective),
        "4. Suggest possible approaches for fixing the bug.".to_string(),
        step_five(effective),
    ]
    .join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(bits: &str) -> FactSet {
        bits.parse().unwrap()
    }

    #[test]
    fn full_listing() {
        let expected = "\
1. Analyze the failing test case and its relationship with the error message along with the buggy function, buggy class, buggy file, the github issue, the expected and actual input/output variable information.
2. Identify the potential error location within the problematic function.
3. Explain the bug's cause using:
        a. The buggy function
        b. The buggy class
        c. The buggy file
        d. The failing test and error message
        e. Discrepancies between expected and actual input/output variable values
        f. The Github Issue information
4. Suggest possible approaches for fixing the bug.
5. Present the corrected code for the problematic function such that it satisfied the following:
        a. Passes the failing test.
        b. Satisfies the expected input/output variable values provided.
        c. Successfully resolves the issue posted in Github";
        assert_eq!(cot_instructions(FactSet::FULL), expected);
    }

    #[test]
    fn empty_set_mentions_only_function() {
        let text = cot_instructions(FactSet::EMPTY);
        assert!(text.contains("relationship with the buggy function."));
        assert!(text.contains("        a. The buggy function\n4."));
        assert!(text.ends_with("5. Present the corrected code for the problematic function."));
        for word in ["class", "file", "issue", "variable", "error message"] {
            assert!(!text.contains(word), "{word}");
        }
    }

    #[test]
    fn issue_only() {
        let text = cot_instructions(s("0000001"));
        assert!(text.contains("a. Successfully resolves the issue posted in Github"));
        assert!(!text.contains("expected input/output variable values provided"));
        assert!(!text.contains("Passes the failing test"));
    }

    #[test]
    fn angelic_adds_expected_clause_only_when_selected() {
        for set in FactSet::all() {
            let text = cot_instructions(set);
            assert_eq!(
                text.contains("Satisfies the expected input/output variable values provided."),
                set.contains(FactKind::AngelicForest)
            );
        }
    }

    #[test]
    fn runtime_only_phrase() {
        let text = cot_instructions(s("0000100"));
        assert!(text.contains("the actual input/output variable information."));
        assert!(text.contains("b. The actual input/output variable values"));
    }
}
