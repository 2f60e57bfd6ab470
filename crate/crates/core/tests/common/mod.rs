#![allow(dead_code)]

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use factsel_core::corpus::{cross_jobs, LoadedCorpus};
use factsel_core::gateway::{Gateway, MockBackend, QueryConfig, ResponseCache};
use factsel_core::prompt::{render, PromptPlan, RenderedPrompt};
use factsel_core::runner::{run_jobs, RunConfig, RunSummary};
use factsel_core::{load_corpus, FactSet, Job, PythonParser};

pub fn fixture_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/corpus")
}

pub fn fixture_corpus() -> LoadedCorpus {
    let corpus = load_corpus(&fixture_root(), &PythonParser).unwrap();
    assert!(corpus.errors.is_empty(), "{:?}", corpus.errors);
    corpus
}

pub fn bits(s: &str) -> FactSet {
    s.parse().unwrap()
}

pub fn prompt_for(corpus: &LoadedCorpus, bug_id: &str, requested: &str) -> RenderedPrompt {
    let (bug, facts) = corpus.bug(bug_id).unwrap();
    render(&PromptPlan::new(Job::new(bug, bits(requested))), facts).unwrap()
}

pub const PANDAS_FIXED: &str = "The encoding falls back to the locale.\n\n```python\ndef read_json(self, path_or_buf, encoding=None, lines=False):\n    # attempt {index}\n    if encoding is None:\n        encoding = \"utf-8\"\n    compression = _infer_compression(path_or_buf, self.compression)\n    if isinstance(path_or_buf, str):\n        fh, handles = get_handle(path_or_buf, \"r\", encoding=encoding, compression=compression)\n        data = self._preprocess_data(fh)\n    else:\n        data = self._preprocess_data(path_or_buf)\n    if lines:\n        data = \"[\" + \",\".join(data.splitlines()) + \"]\"\n    result = json.loads(data)\n    return result\n```\n";

pub const PANDAS_UNCHANGED: &str = "Looking at the test, the result dictionary is built correctly.\n\n```python\ndef read_json(self, path_or_buf, encoding=None, lines=False):\n    # attempt {index}\n    compression = _infer_compression(path_or_buf, self.compression)\n    if isinstance(path_or_buf, str):\n        fh, handles = get_handle(path_or_buf, \"r\", encoding=encoding, compression=compression)\n        data = self._preprocess_data(fh)\n    else:\n        data = self._preprocess_data(path_or_buf)\n    result = json.loads(data)\n    return result\n```\n";

pub const BLACK_FIXED: &str = "```python\ndef normalize_invisible_parens(node, parens_after):\n    for pc in list_comments(node.prefix):\n        if pc.value in (\"fmt: off\",):\n            return\n    check_lpar = False\n    for index, child in enumerate(list(node.children)):\n        if check_lpar:\n            if child.type == \"atom\":\n                maybe_make_parens_invisible_in_atom(child)\n            elif is_one_tuple(child):\n                wrap_in_parentheses(child)\n        check_lpar = isinstance(child, str) and child in parens_after\n```\n";

pub const NO_PATCH: &str = "I am not able to determine the fix from the information given.";

/// `passing` copies of `good` followed by `total - passing` copies of `bad`.
pub fn script(good: &str, bad: &str, passing: usize, total: usize) -> Vec<String> {
    (0..total).map(|i| if i < passing { good } else { bad }.to_string()).collect()
}

/// Scripted backend for the motivating example: on pandas:128 the prompt
/// with runtime values and the issue passes 12 of 15, the all-facts prompt
/// 4 of 15; on black:7 the all-facts prompt passes 15 of 15.
pub fn motivating_backend(corpus: &LoadedCorpus) -> MockBackend {
    let mut s = HashMap::new();
    s.insert(
        prompt_for(corpus, "pandas:128", "0000101").prompt_hash,
        script(PANDAS_FIXED, PANDAS_UNCHANGED, 12, 15),
    );
    s.insert(
        prompt_for(corpus, "pandas:128", "1111111").prompt_hash,
        script(PANDAS_FIXED, PANDAS_UNCHANGED, 4, 15),
    );
    s.insert(
        prompt_for(corpus, "black:7", "1111111").prompt_hash,
        script(BLACK_FIXED, BLACK_FIXED, 15, 15),
    );
    MockBackend::new(s, NO_PATCH)
}

pub const MOTIVATING_SETS: [&str; 3] = ["0000000", "0000101", "1111111"];

pub fn query() -> QueryConfig {
    QueryConfig {
        endpoint_url: "mock://".into(),
        model_id: "mock-model".into(),
        seed: Some(0),
        ..QueryConfig::default()
    }
}

pub fn run_motivating(work: &Path, backend: Arc<MockBackend>) -> RunSummary {
    let corpus = fixture_corpus();
    let gateway = Gateway::new(backend, ResponseCache::new(work.join("cache")), 4);
    let sets: Vec<FactSet> = MOTIVATING_SETS.iter().map(|s| bits(s)).collect();
    let jobs = cross_jobs(&corpus.bugs, &sets);
    let mut run = RunConfig::new(work.join("results"));
    run.sandbox_root = Some(work.join("sandboxes"));
    run.timeout = Duration::from_secs(20);
    run.jobs = 2;
    run_jobs(&jobs, &corpus, &gateway, &query(), &run).unwrap()
}
