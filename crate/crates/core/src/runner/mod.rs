//! From raw responses to verdicts, and the job sweep that drives it.

mod patch;
mod sandbox;

use std::collections::HashMap;
use std::path::PathBuf;
use std::time::Duration;

use rayon::prelude::*;

use crate::corpus::{
    dedupe_jobs, patch_hash, read_json, response_set_file_name, write_json_atomic, BugRecord, Job, LoadedCorpus,
    ResponseRecord, ResponseSet, SampleParams, Verdict,
};
use crate::extract::ExtractedFacts;
use crate::gateway::{Gateway, QueryConfig};
use crate::prompt::{render, FactOrder, PromptPlan};

pub use patch::{extract_patch, splice, splice_with, SpliceError};
pub use sandbox::{copy_tree, validate, Sandbox, SandboxError};

#[derive(Debug, Clone)]
pub struct RunConfig {
    /// Directory receiving one ResponseSet JSON file per job.
    pub out_dir: PathBuf,
    /// Where per-job working copies are created; system temp if unset.
    pub sandbox_root: Option<PathBuf>,
    pub timeout: Duration,
    /// Jobs processed concurrently.
    pub jobs: usize,
    pub include_cot: bool,
    pub include_import_preamble: bool,
    pub fact_order: FactOrder,
}

impl RunConfig {
    pub fn new(out_dir: impl Into<PathBuf>) -> RunConfig {
        RunConfig {
            out_dir: out_dir.into(),
            sandbox_root: None,
            timeout: Duration::from_secs(300),
            jobs: 1,
            include_cot: true,
            include_import_preamble: true,
            fact_order: FactOrder::CANONICAL,
        }
    }
}

#[derive(Debug, Clone)]
pub struct JobFailure {
    pub job: Job,
    pub message: String,
}

#[derive(Debug, Default)]
pub struct RunSummary {
    /// Results for every job that completed, in deduplicated job order.
    pub sets: Vec<ResponseSet>,
    /// Jobs whose results were already on disk.
    pub resumed: usize,
    pub failures: Vec<JobFailure>,
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("output directory {0}: {1}")]
    OutDir(PathBuf, std::io::Error),
    #[error("thread pool: {0}")]
    Pool(String),
}

fn order_tag(order: FactOrder) -> Option<String> {
    (!order.is_canonical()).then(|| format!("o{}", order.index()))
}

/// Where the result for `job` is persisted under `run`.
pub fn response_set_path(job: &Job, run: &RunConfig) -> PathBuf {
    run.out_dir.join(response_set_file_name(
        &job.bug_id,
        &job.effective.to_string(),
        order_tag(run.fact_order).as_deref(),
    ))
}

fn resume(path: &std::path::Path, job: &Job, query: &QueryConfig) -> Option<ResponseSet> {
    if !path.exists() {
        return None;
    }
    match read_json::<ResponseSet>(path) {
        Ok(rs) if rs.check().is_ok() && rs.job.effective == job.effective && rs.params.n == query.n && rs.model_id == query.model_id => Some(rs),
        Ok(_) => {
            log::warn!("{} does not match the current job settings; recomputing", path.display());
            None
        }
        Err(e) => {
            log::warn!("{e}; recomputing");
            None
        }
    }
}

/// Evaluate one response: extract, splice, validate. Identical patches
/// within a job share one validation.
fn judge(
    raw: &str,
    bug: &BugRecord,
    facts: &ExtractedFacts,
    run: &RunConfig,
    sandbox: &mut Option<Sandbox>,
    seen: &mut HashMap<String, Verdict>,
) -> Result<ResponseRecord, SandboxError> {
    let Some(patch) = extract_patch(raw, &facts.function_name) else {
        return Ok(ResponseRecord {
            raw_text: raw.to_string(),
            patch: None,
            verdict: Verdict::PatchExtractionFail,
        });
    };
    let verdict = match splice(bug, &patch) {
        Err(e) => {
            log::debug!("{}: {e}", bug.bug_id);
            Verdict::PatchExtractionFail
        }
        Ok(source) => {
            let key = patch_hash(&patch);
            match seen.get(&key) {
                Some(v) => *v,
                None => {
                    if sandbox.is_none() {
                        *sandbox = Some(Sandbox::prepare(bug, run.sandbox_root.as_deref())?);
                    }
                    let dir = sandbox.as_ref().expect("prepared").path();
                    let v = validate(bug, &source, dir, run.timeout)?;
                    seen.insert(key, v);
                    v
                }
            }
        }
    };
    Ok(ResponseRecord {
        raw_text: raw.to_string(),
        patch: Some(patch),
        verdict,
    })
}

fn run_one(
    job: &Job,
    corpus: &LoadedCorpus,
    gateway: &Gateway,
    query: &QueryConfig,
    run: &RunConfig,
) -> Result<(ResponseSet, bool), String> {
    let path = response_set_path(job, run);
    if let Some(rs) = resume(&path, job, query) {
        return Ok((rs, true));
    }
    let (bug, facts) = corpus.bug(&job.bug_id).ok_or_else(|| format!("unknown bug {}", job.bug_id))?;
    let plan = PromptPlan {
        job: job.clone(),
        fact_order: run.fact_order,
        include_cot: run.include_cot,
        include_import_preamble: run.include_import_preamble,
    };
    let prompt = render(&plan, facts).map_err(|e| e.to_string())?;
    let raw = gateway.sample(&prompt, query).map_err(|e| e.to_string())?;
    let mut sandbox = None;
    let mut seen = HashMap::new();
    let responses = raw
        .iter()
        .map(|r| judge(r, bug, facts, run, &mut sandbox, &mut seen))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let rs = ResponseSet {
        job: job.clone(),
        model_id: query.model_id.clone(),
        params: SampleParams {
            temperature: query.temperature,
            seed: query.seed,
            n: query.n,
        },
        fact_order: order_tag(run.fact_order).map(|_| run.fact_order.to_string()),
        responses,
    };
    write_json_atomic(&path, &rs).map_err(|e| e.to_string())?;
    Ok((rs, false))
}

/// Render, sample, validate and persist every distinct job. Jobs whose
/// result file already exists are loaded instead of recomputed. A failing
/// job is recorded in the summary and does not stop the sweep.
pub fn run_jobs(
    jobs: &[Job],
    corpus: &LoadedCorpus,
    gateway: &Gateway,
    query: &QueryConfig,
    run: &RunConfig,
) -> Result<RunSummary, RunError> {
    std::fs::create_dir_all(&run.out_dir).map_err(|e| RunError::OutDir(run.out_dir.clone(), e))?;
    let jobs = dedupe_jobs(jobs);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(run.jobs.max(1))
        .build()
        .map_err(|e| RunError::Pool(e.to_string()))?;
    let results: Vec<Result<(ResponseSet, bool), String>> =
        pool.install(|| jobs.par_iter().map(|j| run_one(j, corpus, gateway, query, run)).collect());

    let mut summary = RunSummary::default();
    for (job, result) in jobs.into_iter().zip(results) {
        match result {
            Ok((rs, resumed)) => {
                summary.resumed += usize::from(resumed);
                summary.sets.push(rs);
            }
            Err(message) => {
                log::error!("{} {}: {message}", job.bug_id, job.effective);
                summary.failures.push(JobFailure { job, message });
            }
        }
    }
    Ok(summary)
}
