//! Bugs, jobs, response sets and their on-disk layout.
//!
//! A corpus is a directory with one subdirectory per bug. Each bug directory
//! holds a `manifest.json` plus the artifacts the manifest points at:
//!
//! ```text
//! <bug>/manifest.json
//! <bug>/repo/...              prepared working copy (default `workdir`)
//! <bug>/error.txt             error message and stack trace
//! <bug>/runtime_trace.json    runtime variable snapshots
//! <bug>/angelic_trace.json    expected variable snapshots
//! <bug>/issue.json            {"title": ..., "body": ...}
//! ```
//!
//! Optional artifacts use the default file names above unless the manifest
//! names another path. A fact is available for a bug iff its artifact exists
//! and yields content; the mask is recomputed on load and never stored.

mod dataset;
mod labels;
mod store;

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::extract::{extract_facts, ExtractError, ExtractedFacts, SourceParser};
use crate::facts::FactSet;

pub use dataset::{Dataset, DatasetEntry, DatasetError, ResponseCounts};
pub use labels::{load_labels, patch_hash, save_labels, CorrectnessLabel, LabelError};
pub use store::{load_response_sets, read_json, response_set_file_name, write_json_atomic, StoreError};

/// Inclusive, 1-based line range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "(usize, usize)", into = "(usize, usize)")]
pub struct LineSpan {
    pub start: usize,
    pub end: usize,
}

impl From<(usize, usize)> for LineSpan {
    fn from((start, end): (usize, usize)) -> Self {
        LineSpan { start, end }
    }
}

impl From<LineSpan> for (usize, usize) {
    fn from(s: LineSpan) -> Self {
        (s.start, s.end)
    }
}

impl fmt::Display for LineSpan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.start, self.end)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FailingTest {
    pub test_file_path: String,
    pub test_code: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Issue {
    pub title: String,
    pub body: String,
}

impl Issue {
    pub fn is_blank(&self) -> bool {
        self.title.trim().is_empty() && self.body.trim().is_empty()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: malformed manifest: {source}")]
    Manifest {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("{bug_id}: {message}")]
    Invalid { bug_id: String, message: String },
    #[error(transparent)]
    Extract(#[from] ExtractError),
    #[error("duplicate bug id {0}")]
    DuplicateBug(String),
    #[error("corpus {root} contains no loadable bugs ({failures} failed)")]
    Empty { root: PathBuf, failures: usize },
}

/// One benchmark bug.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BugRecord {
    pub bug_id: String,
    pub repository: String,
    pub source_file_path: String,
    pub buggy_function_span: LineSpan,
    pub source_text: String,
    pub failing_tests: Vec<FailingTest>,
    pub error_text: String,
    pub runtime_trace_path: Option<PathBuf>,
    pub angelic_trace_path: Option<PathBuf>,
    pub issue: Option<Issue>,
    pub imports: Vec<String>,
    pub test_command: String,
    /// Prepared working copy of the project, if any.
    pub workdir: Option<PathBuf>,
    #[serde(skip)]
    availability: FactSet,
}

impl BugRecord {
    pub fn builder(
        bug_id: impl Into<String>,
        repository: impl Into<String>,
        source_file_path: impl Into<String>,
        source_text: impl Into<String>,
    ) -> BugRecordBuilder {
        BugRecordBuilder {
            record: BugRecord {
                bug_id: bug_id.into(),
                repository: repository.into(),
                source_file_path: source_file_path.into(),
                buggy_function_span: LineSpan { start: 1, end: 1 },
                source_text: source_text.into(),
                failing_tests: Vec::new(),
                error_text: String::new(),
                runtime_trace_path: None,
                angelic_trace_path: None,
                issue: None,
                imports: Vec::new(),
                test_command: String::new(),
                workdir: None,
                availability: FactSet::EMPTY,
            },
        }
    }

    /// Facts with content for this bug.
    pub fn availability(&self) -> FactSet {
        self.availability
    }

    /// Extract all facts and recompute the availability mask from them.
    pub fn refresh_availability(&mut self, parser: &dyn SourceParser) -> Result<ExtractedFacts, ExtractError> {
        let facts = extract_facts(self, parser)?;
        self.availability = facts.availability();
        Ok(facts)
    }

    pub fn line_count(&self) -> usize {
        self.source_text.lines().count()
    }

    fn check(&self) -> Result<(), CorpusError> {
        let invalid = |message: String| CorpusError::Invalid {
            bug_id: self.bug_id.clone(),
            message,
        };
        if self.bug_id.trim().is_empty() {
            return Err(invalid("empty bug id".into()));
        }
        if self.repository.trim().is_empty() {
            return Err(invalid("empty repository".into()));
        }
        let span = self.buggy_function_span;
        let lines = self.line_count();
        if span.start == 0 || span.start > span.end || span.end > lines {
            return Err(invalid(format!(
                "function span {span} lies outside the source ({lines} lines)"
            )));
        }
        Ok(())
    }
}

pub struct BugRecordBuilder {
    record: BugRecord,
}

impl BugRecordBuilder {
    pub fn span(mut self, start: usize, end: usize) -> Self {
        self.record.buggy_function_span = LineSpan { start, end };
        self
    }

    pub fn failing_test(mut self, test_file_path: impl Into<String>, test_code: impl Into<String>) -> Self {
        self.record.failing_tests.push(FailingTest {
            test_file_path: test_file_path.into(),
            test_code: test_code.into(),
        });
        self
    }

    pub fn error_text(mut self, text: impl Into<String>) -> Self {
        self.record.error_text = text.into();
        self
    }

    pub fn runtime_trace(mut self, path: impl Into<PathBuf>) -> Self {
        self.record.runtime_trace_path = Some(path.into());
        self
    }

    pub fn angelic_trace(mut self, path: impl Into<PathBuf>) -> Self {
        self.record.angelic_trace_path = Some(path.into());
        self
    }

    pub fn issue(mut self, title: impl Into<String>, body: impl Into<String>) -> Self {
        self.record.issue = Some(Issue {
            title: title.into(),
            body: body.into(),
        });
        self
    }

    pub fn imports<I, S>(mut self, imports: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.record.imports = imports.into_iter().map(Into::into).collect();
        self
    }

    pub fn test_command(mut self, command: impl Into<String>) -> Self {
        self.record.test_command = command.into();
        self
    }

    pub fn workdir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.record.workdir = Some(dir.into());
        self
    }

    /// Validate record invariants without running fact extraction; the
    /// availability mask stays empty until
    /// [`BugRecord::refresh_availability`] is called.
    pub fn build(self) -> Result<BugRecord, CorpusError> {
        self.record.check()?;
        Ok(self.record)
    }

    /// Validate, extract facts with `parser` and derive availability.
    pub fn build_with(self, parser: &dyn SourceParser) -> Result<(BugRecord, ExtractedFacts), CorpusError> {
        let mut record = self.build()?;
        let facts = record.refresh_availability(parser)?;
        Ok((record, facts))
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ManifestTest {
    test_file_path: String,
    #[serde(default)]
    test_code: Option<String>,
    #[serde(default)]
    code_file: Option<PathBuf>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    bug_id: String,
    repository: String,
    source_file_path: String,
    buggy_function_span: LineSpan,
    #[serde(default)]
    source_text_file: Option<PathBuf>,
    #[serde(default)]
    workdir: Option<PathBuf>,
    #[serde(default)]
    failing_tests: Vec<ManifestTest>,
    #[serde(default)]
    error_file: Option<PathBuf>,
    #[serde(default)]
    runtime_trace: Option<PathBuf>,
    #[serde(default)]
    angelic_trace: Option<PathBuf>,
    #[serde(default)]
    issue_file: Option<PathBuf>,
    #[serde(default)]
    imports: Vec<String>,
    test_command: String,
}

pub const MANIFEST_FILE: &str = "manifest.json";

fn read_text(path: &Path) -> Result<String, CorpusError> {
    std::fs::read_to_string(path).map_err(|source| CorpusError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn non_empty_file(path: &Path) -> bool {
    std::fs::metadata(path).map(|m| m.is_file() && m.len() > 0).unwrap_or(false)
}

/// Resolve an optional artifact: an explicit path or the default name, kept
/// only if the file exists and is non-empty.
fn artifact(dir: &Path, explicit: Option<&Path>, default: &str) -> Option<PathBuf> {
    let path = dir.join(explicit.unwrap_or(Path::new(default)));
    non_empty_file(&path).then_some(path)
}

/// Load one bug directory and extract its facts.
pub fn load_bug(dir: &Path, parser: &dyn SourceParser) -> Result<(BugRecord, ExtractedFacts), CorpusError> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let manifest: Manifest =
        serde_json::from_str(&read_text(&manifest_path)?).map_err(|source| CorpusError::Manifest {
            path: manifest_path.clone(),
            source,
        })?;

    let workdir = dir.join(manifest.workdir.as_deref().unwrap_or(Path::new("repo")));
    let workdir = workdir.is_dir().then_some(workdir);
    let source_path = match (&manifest.source_text_file, &workdir) {
        (Some(file), _) => dir.join(file),
        (None, Some(w)) => w.join(&manifest.source_file_path),
        (None, None) => {
            return Err(CorpusError::Invalid {
                bug_id: manifest.bug_id,
                message: "no source_text_file and no working copy".into(),
            })
        }
    };

    let mut failing_tests = Vec::new();
    for test in &manifest.failing_tests {
        let code = match (&test.test_code, &test.code_file) {
            (Some(code), _) => code.clone(),
            (None, Some(file)) => read_text(&dir.join(file))?,
            (None, None) => {
                return Err(CorpusError::Invalid {
                    bug_id: manifest.bug_id.clone(),
                    message: format!("failing test {} has neither test_code nor code_file", test.test_file_path),
                })
            }
        };
        if !code.trim().is_empty() {
            failing_tests.push(FailingTest {
                test_file_path: test.test_file_path.clone(),
                test_code: code,
            });
        }
    }

    let error_text = match artifact(dir, manifest.error_file.as_deref(), "error.txt") {
        Some(p) => read_text(&p)?,
        None => String::new(),
    };
    let issue = match artifact(dir, manifest.issue_file.as_deref(), "issue.json") {
        Some(p) => Some(
            serde_json::from_str::<Issue>(&read_text(&p)?)
                .map_err(|source| CorpusError::Manifest { path: p, source })?,
        ),
        None => None,
    };

    let mut record = BugRecord {
        bug_id: manifest.bug_id,
        repository: manifest.repository,
        source_file_path: manifest.source_file_path,
        buggy_function_span: manifest.buggy_function_span,
        source_text: read_text(&source_path)?,
        failing_tests,
        error_text,
        runtime_trace_path: artifact(dir, manifest.runtime_trace.as_deref(), "runtime_trace.json"),
        angelic_trace_path: artifact(dir, manifest.angelic_trace.as_deref(), "angelic_trace.json"),
        issue,
        imports: manifest.imports,
        test_command: manifest.test_command,
        workdir,
        availability: FactSet::EMPTY,
    };
    record.check()?;
    let facts = record.refresh_availability(parser)?;
    Ok((record, facts))
}

/// Result of scanning a corpus directory. Bugs that fail to load are
/// reported in `errors` and do not stop the scan.
#[derive(Debug)]
pub struct LoadedCorpus {
    pub bugs: Vec<BugRecord>,
    pub facts: Vec<ExtractedFacts>,
    pub errors: Vec<(PathBuf, CorpusError)>,
}

impl LoadedCorpus {
    pub fn bug(&self, bug_id: &str) -> Option<(&BugRecord, &ExtractedFacts)> {
        self.bugs
            .iter()
            .position(|b| b.bug_id == bug_id)
            .map(|i| (&self.bugs[i], &self.facts[i]))
    }

    pub fn repositories(&self) -> BTreeSet<String> {
        self.bugs.iter().map(|b| b.repository.clone()).collect()
    }
}

/// Load every bug directory under `root`, sorted by bug id.
pub fn load_corpus(root: &Path, parser: &dyn SourceParser) -> Result<LoadedCorpus, CorpusError> {
    let entries = std::fs::read_dir(root).map_err(|source| CorpusError::Io {
        path: root.to_path_buf(),
        source,
    })?;
    let mut dirs: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(MANIFEST_FILE).is_file())
        .collect();
    dirs.sort();

    let mut loaded: Vec<(BugRecord, ExtractedFacts)> = Vec::new();
    let mut errors = Vec::new();
    let mut seen = BTreeSet::new();
    for dir in dirs {
        match load_bug(&dir, parser) {
            Ok((bug, facts)) => {
                if seen.insert(bug.bug_id.clone()) {
                    loaded.push((bug, facts));
                } else {
                    let id = bug.bug_id.clone();
                    errors.push((dir, CorpusError::DuplicateBug(id)));
                }
            }
            Err(e) => {
                log::warn!("skipping {}: {e}", dir.display());
                errors.push((dir, e));
            }
        }
    }
    if loaded.is_empty() {
        return Err(CorpusError::Empty {
            root: root.to_path_buf(),
            failures: errors.len(),
        });
    }
    loaded.sort_by(|a, b| a.0.bug_id.cmp(&b.0.bug_id));
    let (bugs, facts) = loaded.into_iter().unzip();
    Ok(LoadedCorpus { bugs, facts, errors })
}

/// A (bug, fact set) pair: the unit of prompting and evaluation.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Job {
    pub bug_id: String,
    pub requested: FactSet,
    pub effective: FactSet,
}

impl Job {
    pub fn new(bug: &BugRecord, requested: FactSet) -> Job {
        Job {
            bug_id: bug.bug_id.clone(),
            requested,
            effective: effective_fact_set(requested, bug),
        }
    }
}

/// Requested facts restricted to those available for the bug.
pub fn effective_fact_set(requested: FactSet, bug: &BugRecord) -> FactSet {
    requested.intersect(bug.availability())
}

/// One job per distinct (bug, effective set), keeping first occurrences.
pub fn dedupe_jobs(jobs: &[Job]) -> Vec<Job> {
    let mut seen = std::collections::HashSet::new();
    jobs.iter()
        .filter(|j| seen.insert((j.bug_id.clone(), j.effective)))
        .cloned()
        .collect()
}

/// Every bug crossed with every requested set.
pub fn cross_jobs<'a>(bugs: impl IntoIterator<Item = &'a BugRecord>, sets: &[FactSet]) -> Vec<Job> {
    bugs.into_iter()
        .flat_map(|b| sets.iter().map(move |s| Job::new(b, *s)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    Plausible,
    TestFail,
    PatchExtractionFail,
    BuildError,
    Timeout,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleParams {
    pub temperature: f64,
    pub seed: Option<u64>,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub raw_text: String,
    pub patch: Option<String>,
    pub verdict: Verdict,
}

/// The n responses for one job and their validation outcomes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseSet {
    pub job: Job,
    pub model_id: String,
    pub params: SampleParams,
    /// Fact ordering used for rendering; `None` means canonical.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fact_order: Option<String>,
    pub responses: Vec<ResponseRecord>,
}

impl ResponseSet {
    pub fn successes(&self) -> usize {
        self.responses.iter().filter(|r| r.verdict == Verdict::Plausible).count()
    }

    pub fn check(&self) -> Result<(), String> {
        if self.params.n == 0 {
            return Err("n must be positive".into());
        }
        if self.responses.len() != self.params.n {
            return Err(format!("{} responses for n={}", self.responses.len(), self.params.n));
        }
        if self.responses.iter().any(|r| r.verdict == Verdict::Plausible && r.patch.is_none()) {
            return Err("plausible verdict without a patch".into());
        }
        Ok(())
    }
}
