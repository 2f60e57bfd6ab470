//! Fact selection for LLM-based program repair.
//!
//! The pipeline runs corpus loading, fact extraction, prompt rendering,
//! sampling through a cached gateway, patch validation, and then the
//! analyses and the random-forest selector over the resulting dataset.

pub mod corpus;
pub mod extract;
pub mod facts;
pub mod gateway;
pub mod maniple;
pub mod metrics;
pub mod prompt;
pub mod runner;
pub mod stats;

pub use corpus::{
    dedupe_jobs, effective_fact_set, load_corpus, BugRecord, CorrectnessLabel, Dataset, DatasetEntry, Job,
    ResponseSet, Verdict,
};
pub use extract::{extract_facts, ExtractedFacts, PythonParser, SourceParser};
pub use facts::{FactKind, FactSet};
