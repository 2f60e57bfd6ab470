//! Sweep over the fixture corpus with a scripted backend, then analysis.

mod common;

use std::sync::Arc;

use common::*;
use factsel_core::corpus::load_response_sets;
use factsel_core::metrics::{monotonicity_curve, num_fixed, universality_gap};
use factsel_core::{Dataset, Verdict};

#[test]
fn sweep_validates_scripted_patches() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = fixture_corpus();
    let backend = Arc::new(motivating_backend(&corpus));
    let summary = run_motivating(tmp.path(), backend.clone());
    assert!(summary.failures.is_empty(), "{:?}", summary.failures);
    // black:7 has no issue, so 0000101 becomes 0000100: still 3 distinct jobs per bug
    assert_eq!(summary.sets.len(), 6);
    assert_eq!(summary.resumed, 0);
    assert_eq!(backend.calls(), 6 * 15);

    let d = Dataset::from_response_sets(&summary.sets).unwrap();
    assert_eq!(d.lookup("pandas:128", bits("0000101")).unwrap().response_counts.successes, 12);
    assert_eq!(d.lookup("pandas:128", bits("1111111")).unwrap().response_counts.successes, 4);
    assert_eq!(d.lookup("black:7", bits("0111110")).unwrap().response_counts.successes, 15);
    assert_eq!(num_fixed(&summary.sets), 2);

    let none = summary
        .sets
        .iter()
        .find(|rs| rs.job.bug_id == "pandas:128" && rs.job.effective == bits("0000000"))
        .unwrap();
    assert!(none.responses.iter().all(|r| r.verdict == Verdict::PatchExtractionFail));
    let unchanged = summary
        .sets
        .iter()
        .find(|rs| rs.job.bug_id == "pandas:128" && rs.job.effective == bits("1111111"))
        .unwrap();
    assert_eq!(unchanged.responses.iter().filter(|r| r.verdict == Verdict::TestFail).count(), 11);

    // fixture working copies are untouched by validation
    let src = std::fs::read_to_string(fixture_root().join("pandas_128/repo/pandas/io/json/_json.py")).unwrap();
    assert!(!src.contains("encoding = \"utf-8\""));

    let gap = universality_gap(&d).unwrap();
    assert!(gap.epsilon("pandas:128").unwrap() > 0.0);
    assert_eq!(monotonicity_curve(&d).len(), 8);
}

#[test]
fn second_sweep_resumes_from_disk() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = fixture_corpus();
    let first = run_motivating(tmp.path(), Arc::new(motivating_backend(&corpus)));
    let backend = Arc::new(motivating_backend(&corpus));
    let second = run_motivating(tmp.path(), backend.clone());
    assert_eq!(second.resumed, 6);
    assert_eq!(backend.calls(), 0);
    assert_eq!(first.sets, second.sets);
    let on_disk = load_response_sets(&tmp.path().join("results")).unwrap();
    assert_eq!(on_disk.len(), 6);
}

#[test]
fn cache_replays_without_the_backend() {
    let tmp = tempfile::tempdir().unwrap();
    let corpus = fixture_corpus();
    run_motivating(tmp.path(), Arc::new(motivating_backend(&corpus)));
    std::fs::remove_dir_all(tmp.path().join("results")).unwrap();
    // an empty script would answer NO_PATCH for everything; the cache wins
    let silent = Arc::new(factsel_core::gateway::MockBackend::new(Default::default(), NO_PATCH));
    let replay = run_motivating(tmp.path(), silent.clone());
    assert_eq!(silent.calls(), 0);
    let d = Dataset::from_response_sets(&replay.sets).unwrap();
    assert_eq!(d.lookup("pandas:128", bits("0000101")).unwrap().response_counts.successes, 12);
}
