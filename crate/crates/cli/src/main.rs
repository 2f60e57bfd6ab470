//! `factsel`: command-line front end for the fact-selection toolkit.
//!
//! Typical session:
//!
//!   factsel extract corpus/ --out facts/
//!   factsel prompt corpus/ --bug pandas:128 --bits 0010100
//!   factsel sweep corpus/ --bits-all --n 15 --backend live --out results/
//!   factsel analyze results/ --report curve --out curve.csv --svg curve.svg
//!   factsel train results/ --corpus corpus/ --out model.json
//!   factsel select corpus/ --bug pandas:128 --model model.json --emit-prompt
//!
//! Cyclomatic complexity (a selector feature) counts one plus each `if`,
//! `elif`, `for`, `while`, `except`, `with`, `assert`, conditional
//! expression, `and`/`or` operator and `case` arm inside the function.

mod config;

use std::collections::HashMap;
use std::fmt;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use factsel_core::corpus::{cross_jobs, load_response_sets, LoadedCorpus};
use factsel_core::extract::ExtractedFacts;
use factsel_core::facts::FactKind;
use factsel_core::gateway::{Gateway, HttpTransport, MockBackend, QueryConfig, ResponseCache, Transport, DEFAULT_API_KEY_ENV};
use factsel_core::maniple::{self, ForestModel, GridSpec, MaxFeatures, PromptOptions, TrainConfig};
use factsel_core::metrics::{self, report};
use factsel_core::prompt::{render, FactOrder, PromptPlan};
use factsel_core::runner::{run_jobs, RunConfig};
use factsel_core::{load_corpus, BugRecord, Dataset, FactSet, Job, PythonParser, ResponseSet};
use serde::Deserialize;

use config::{Overrides, Settings};

#[derive(Parser, Debug)]
#[command(name = "factsel", version, about = "Fact selection for LLM-based program repair")]
struct Cli {
    /// TOML config file (keys: endpoint, model_id, cache_dir, sandbox_dir, jobs).
    /// Defaults to $FACTSEL_CONFIG when set.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Extract the facts of each bug as JSON
    Extract(ExtractArgs),
    /// Render the repair prompt for one bug and fact set
    Prompt(PromptArgs),
    /// Sample and validate responses for bugs x fact sets
    Sweep(SweepArgs),
    /// Compute a report over persisted results
    Analyze(AnalyzeArgs),
    /// Train the fact-selection forest on a dataset
    Train(TrainArgs),
    /// Rank candidate fact sets for one bug with a trained model
    Select(SelectArgs),
    /// Print the fact set used by a baseline approach
    Baseline(BaselineArgs),
}

#[derive(Args, Debug)]
struct ExtractArgs {
    corpus: PathBuf,
    #[arg(long)]
    bug: Option<String>,
    /// Write one `<bug>.json` per bug here instead of printing.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PromptArgs {
    corpus: PathBuf,
    #[arg(long)]
    bug: String,
    /// Seven-character bitvector in taxonomy order (1.1 1.2 1.3 2.1 2.2 2.3 3.1).
    #[arg(long)]
    bits: FactSet,
    /// Section order: five taxonomy codes (`2.2,1.3,2.1,2.3,3.1`) or an index 0..120.
    #[arg(long)]
    order: Option<FactOrder>,
    #[arg(long)]
    no_cot: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Backend {
    /// Chat-completions endpoint; bearer token from $FACTSEL_API_KEY.
    Live,
    /// Scripted responses from --mock-script.
    Mock,
}

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("sets").required(true).args(["bits_all", "bits_list", "bits"])))]
struct SweepArgs {
    corpus: PathBuf,
    /// All 128 fact sets.
    #[arg(long)]
    bits_all: bool,
    /// File with one bitvector per line; `#` starts a comment.
    #[arg(long)]
    bits_list: Option<PathBuf>,
    /// Comma-separated bitvectors.
    #[arg(long, value_delimiter = ',')]
    bits: Vec<FactSet>,
    /// Restrict to these bug ids (repeatable).
    #[arg(long)]
    bug: Vec<String>,
    #[arg(long, default_value_t = 15)]
    n: usize,
    #[arg(long, value_enum)]
    backend: Backend,
    /// JSON: {"default": "...", "responses": {"<bug>@<bits>" or "<prompt hash>": ["...", ...]}}
    #[arg(long)]
    mock_script: Option<PathBuf>,
    /// Directory receiving one response-set file per job.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1.0)]
    temperature: f64,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    order: Option<FactOrder>,
    #[arg(long)]
    no_cot: bool,
    /// Seconds allowed for one test command.
    #[arg(long, default_value_t = 300)]
    timeout: u64,
    #[arg(long)]
    endpoint: Option<String>,
    #[arg(long)]
    model_id: Option<String>,
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    #[arg(long)]
    sandbox_dir: Option<PathBuf>,
    /// Jobs validated concurrently (also bounds in-flight requests).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Report {
    Gain,
    Shapley,
    Coverage,
    Curve,
    Upset,
    Universality,
    OrderHist,
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    /// Directory of response sets, or a dataset file (.json or .csv).
    results: PathBuf,
    #[arg(long, value_enum)]
    report: Report,
    #[arg(long, default_value_t = 1)]
    k: u64,
    /// CSV destination; stdout if omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// SVG destination (curve and upset only).
    #[arg(long)]
    svg: Option<PathBuf>,
    /// Fact sets for the upset report, comma-separated. Defaults to the
    /// sets fixing the most bugs plus the empty set.
    #[arg(long, value_delimiter = ',')]
    chosen: Vec<FactSet>,
    /// Number of sets picked when --chosen is omitted.
    #[arg(long, default_value_t = 5)]
    top: usize,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Directory of response sets, or a dataset file (.json or .csv).
    dataset: PathBuf,
    /// Corpus the dataset was produced from; prompts are re-rendered for
    /// their length features.
    #[arg(long)]
    corpus: PathBuf,
    /// Hyperparameter grid (TOML, or JSON by extension). Missing keys use the default grid.
    #[arg(long)]
    grid: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 5)]
    folds: usize,
    /// Candidate fact sets kept after bootstrap ranking.
    #[arg(long, default_value_t = 5)]
    top_m: usize,
    #[arg(long, default_value_t = 100)]
    n_boot: usize,
    #[arg(long)]
    no_cot: bool,
    /// Model destination.
    #[arg(long)]
    out: PathBuf,
    /// Cross-validation report destination (JSON).
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SelectArgs {
    corpus: PathBuf,
    #[arg(long)]
    bug: String,
    #[arg(long)]
    model: PathBuf,
    /// Print the winning prompt on stdout; the ranking goes to stderr.
    #[arg(long)]
    emit_prompt: bool,
    #[arg(long)]
    no_cot: bool,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Which {
    /// Buggy function only.
    T0,
    /// Buggy class and used method signatures.
    T1,
    /// GitHub issue.
    T2,
    /// Failing test with its error information.
    T3,
}

impl Which {
    fn fact_set(self) -> FactSet {
        match self {
            Which::T0 => FactSet::EMPTY,
            Which::T1 => FactSet::from_kinds([FactKind::BuggyClass, FactKind::UsedMethodSignatures]),
            Which::T2 => FactSet::from_kinds([FactKind::GitHubIssue]),
            Which::T3 => FactSet::from_kinds([FactKind::FailingTest, FactKind::ErrorInfo]),
        }
    }
}

#[derive(Args, Debug)]
struct BaselineArgs {
    #[arg(long, value_enum)]
    which: Which,
}

/// A request that names something that does not exist.
#[derive(Debug)]
struct UsageError(String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Extract(a) => extract(a),
        Command::Prompt(a) => prompt(a),
        Command::Sweep(a) => sweep(a, cli.config.as_deref()),
        Command::Analyze(a) => analyze(a),
        Command::Train(a) => train(a),
        Command::Select(a) => select(a),
        Command::Baseline(a) => {
            println!("{}", a.which.fact_set());
            Ok(())
        }
    }
}

fn open_corpus(root: &Path) -> Result<LoadedCorpus> {
    if !root.is_dir() {
        return Err(usage(format!("corpus directory {} does not exist", root.display())));
    }
    load_corpus(root, &PythonParser).with_context(|| format!("loading corpus {}", root.display()))
}

fn find_bug<'a>(corpus: &'a LoadedCorpus, id: &str) -> Result<(&'a BugRecord, &'a ExtractedFacts)> {
    corpus.bug(id).ok_or_else(|| usage(format!("unknown bug {id:?}")))
}

fn write_output(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            stdout.flush()?;
            Ok(())
        }
    }
}

fn file_stem_for(bug_id: &str) -> String {
    bug_id
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' || c == '.' { c } else { '_' })
        .collect()
}

fn extract(a: ExtractArgs) -> Result<()> {
    let corpus = open_corpus(&a.corpus)?;
    let facts: Vec<&ExtractedFacts> = match &a.bug {
        Some(id) => vec![find_bug(&corpus, id)?.1],
        None => corpus.facts.iter().collect(),
    };
    match &a.out {
        Some(dir) => {
            std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
            for f in &facts {
                let path = dir.join(format!("{}.json", file_stem_for(&f.bug_id)));
                std::fs::write(&path, serde_json::to_string_pretty(f)?).with_context(|| format!("writing {}", path.display()))?;
            }
        }
        None => {
            let text = if a.bug.is_some() {
                serde_json::to_string_pretty(facts[0])?
            } else {
                serde_json::to_string_pretty(&facts)?
            };
            write_output(None, &(text + "\n"))?;
        }
    }
    if a.bug.is_none() && !corpus.errors.is_empty() {
        for (dir, e) in &corpus.errors {
            eprintln!("{}: {e}", dir.display());
        }
        bail!("{} bug directories failed to load", corpus.errors.len());
    }
    Ok(())
}

fn prompt(a: PromptArgs) -> Result<()> {
    let corpus = open_corpus(&a.corpus)?;
    let (bug, facts) = find_bug(&corpus, &a.bug)?;
    let mut plan = PromptPlan::new(Job::new(bug, a.bits)).with_order(a.order.unwrap_or_default());
    plan.include_cot = !a.no_cot;
    let rendered = render(&plan, facts)?;
    if plan.job.effective != a.bits {
        log::warn!("{} lacks some requested facts; rendered {}", bug.bug_id, plan.job.effective);
    }
    write_output(a.out.as_deref(), &rendered.text)
}

fn parse_bits_list(text: &str) -> Result<Vec<FactSet>> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty())
        .map(|(i, l)| l.parse::<FactSet>().map_err(|e| usage(format!("line {}: {e}", i + 1))))
        .collect()
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct MockScript {
    #[serde(default)]
    default: String,
    #[serde(default)]
    responses: HashMap<String, Vec<String>>,
}

/// Resolve `<bug>@<bits>` keys to the hash of the prompt the sweep will
/// render for that job; other keys are taken as prompt hashes.
fn mock_backend(script: MockScript, corpus: &LoadedCorpus, plan_for: impl Fn(Job) -> PromptPlan) -> Result<MockBackend> {
    let mut by_hash = HashMap::new();
    for (key, responses) in script.responses {
        let hash = match key.rsplit_once('@') {
            Some((bug_id, bits)) => {
                let (bug, facts) = find_bug(corpus, bug_id)?;
                let set: FactSet = bits.parse().map_err(|e| usage(format!("mock script key {key:?}: {e}")))?;
                render(&plan_for(Job::new(bug, set)), facts)?.prompt_hash
            }
            None => key,
        };
        by_hash.insert(hash, responses);
    }
    Ok(MockBackend::new(by_hash, script.default))
}

fn sweep(a: SweepArgs, config: Option<&Path>) -> Result<()> {
    let corpus = open_corpus(&a.corpus)?;
    let sets: Vec<FactSet> = if a.bits_all {
        FactSet::all().collect()
    } else if let Some(p) = &a.bits_list {
        let text = std::fs::read_to_string(p).map_err(|e| usage(format!("bits list {}: {e}", p.display())))?;
        parse_bits_list(&text)?
    } else {
        a.bits.clone()
    };
    if sets.is_empty() {
        return Err(usage("no fact sets given"));
    }
    for id in &a.bug {
        find_bug(&corpus, id)?;
    }
    let bugs = corpus.bugs.iter().filter(|b| a.bug.is_empty() || a.bug.contains(&b.bug_id));
    let jobs = cross_jobs(bugs, &sets);

    let settings = Settings::from_process(
        config,
        &Overrides {
            endpoint: a.endpoint.clone(),
            model_id: a.model_id.clone(),
            cache_dir: a.cache_dir.clone(),
            sandbox_dir: a.sandbox_dir.clone(),
            jobs: a.jobs,
        },
    )?;
    let query = QueryConfig {
        endpoint_url: settings.endpoint.clone(),
        model_id: settings.model_id.clone(),
        temperature: a.temperature,
        n: a.n,
        seed: a.seed,
        max_parallel: settings.jobs,
        ..QueryConfig::default()
    };
    query.check()?;

    let mut run_cfg = RunConfig::new(&a.out);
    run_cfg.sandbox_root = settings.sandbox_dir.clone();
    run_cfg.timeout = Duration::from_secs(a.timeout);
    run_cfg.jobs = settings.jobs;
    run_cfg.include_cot = !a.no_cot;
    run_cfg.fact_order = a.order.unwrap_or_default();

    let transport: Arc<dyn Transport> = match a.backend {
        Backend::Live => Arc::new(HttpTransport::new(DEFAULT_API_KEY_ENV)?),
        Backend::Mock => {
            let script = match &a.mock_script {
                Some(p) => {
                    let text = std::fs::read_to_string(p).map_err(|e| usage(format!("mock script {}: {e}", p.display())))?;
                    serde_json::from_str(&text).with_context(|| format!("parsing mock script {}", p.display()))?
                }
                None => MockScript::default(),
            };
            let plan_for = |job: Job| PromptPlan {
                job,
                fact_order: run_cfg.fact_order,
                include_cot: run_cfg.include_cot,
                include_import_preamble: run_cfg.include_import_preamble,
            };
            Arc::new(mock_backend(script, &corpus, plan_for)?)
        }
    };
    let gateway = Gateway::new(transport, ResponseCache::new(&settings.cache_dir), settings.jobs);
    let summary = run_jobs(&jobs, &corpus, &gateway, &query, &run_cfg)?;
    eprintln!(
        "{} response sets written to {} ({} resumed), {} bugs fixed",
        summary.sets.len(),
        a.out.display(),
        summary.resumed,
        metrics::num_fixed(&summary.sets)
    );
    if !summary.failures.is_empty() {
        for f in &summary.failures {
            eprintln!("{} {}: {}", f.job.bug_id, f.job.effective, f.message);
        }
        bail!("{} jobs failed", summary.failures.len());
    }
    Ok(())
}

/// Response sets (when reading a results directory) and the dataset.
fn load_results(path: &Path) -> Result<(Option<Vec<ResponseSet>>, Dataset)> {
    if path.is_dir() {
        let sets = load_response_sets(path)?;
        if sets.is_empty() {
            return Err(usage(format!("no response sets in {}", path.display())));
        }
        let dataset = Dataset::from_response_sets(&sets)?;
        Ok((Some(sets), dataset))
    } else if path.is_file() {
        Ok((None, Dataset::load(path)?))
    } else {
        Err(usage(format!("{} does not exist", path.display())))
    }
}

/// The `top` sets fixing the most bugs (ties to the lower bitvector),
/// followed by the empty set when it was tried.
fn default_upset_sets(fixed_by: &metrics::FixedBy, top: usize) -> Vec<FactSet> {
    let mut ranked: Vec<(&FactSet, usize)> = fixed_by
        .iter()
        .filter(|(s, _)| !s.is_empty())
        .map(|(s, b)| (s, b.len()))
        .collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    let mut chosen: Vec<FactSet> = ranked.into_iter().take(top).map(|(s, _)| *s).collect();
    if fixed_by.contains_key(&FactSet::EMPTY) {
        chosen.push(FactSet::EMPTY);
    }
    chosen
}

fn analyze(a: AnalyzeArgs) -> Result<()> {
    let (sets, dataset) = load_results(&a.results)?;
    if a.svg.is_some() && !matches!(a.report, Report::Curve | Report::Upset) {
        return Err(usage("--svg applies to the curve and upset reports only"));
    }
    let (csv, svg) = match a.report {
        Report::Gain => {
            let gains: Vec<(FactKind, Option<f64>)> = FactKind::ALL
                .iter()
                .map(|&k| match metrics::fact_gain(&dataset, k, a.k) {
                    Ok(g) => Ok((k, Some(g))),
                    Err(e @ (metrics::MetricsError::EmptyPartition { .. } | metrics::MetricsError::NoBaseline(_))) => {
                        log::warn!("gain of {k}: {e}");
                        Ok((k, None))
                    }
                    Err(e) => Err(e),
                })
                .collect::<Result<_, _>>()?;
            (report::gain_csv(&gains), None)
        }
        Report::Shapley => (report::shapley_csv(&metrics::shapley_values(&dataset, a.k)?), None),
        Report::Coverage => (report::coverage_csv(&metrics::fixed_by(&dataset))?, None),
        Report::Curve => {
            let points = metrics::monotonicity_curve(&dataset);
            (report::curve_csv(&points), Some(report::curve_svg(&points)))
        }
        Report::Upset => {
            let fixed_by = metrics::fixed_by(&dataset);
            let chosen = if a.chosen.is_empty() { default_upset_sets(&fixed_by, a.top) } else { a.chosen.clone() };
            let regions = metrics::upset_data(&fixed_by, &chosen)?;
            (report::upset_csv(&regions), Some(report::upset_svg(&regions, &chosen)))
        }
        Report::Universality => (report::universality_csv(&metrics::universality_gap(&dataset)?), None),
        Report::OrderHist => {
            let sets = sets.ok_or_else(|| usage("order-hist needs a directory of response sets"))?;
            (report::order_histogram_csv(&metrics::order_histogram(&sets)), None)
        }
    };
    write_output(a.out.as_deref(), &csv)?;
    if let (Some(path), Some(svg)) = (&a.svg, svg) {
        std::fs::write(path, svg).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

/// Depth entry in a grid file: a number, or `"none"` for unbounded trees.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
enum Depth {
    Limit(usize),
    Word(String),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GridFile {
    n_trees: Option<Vec<usize>>,
    max_depth: Option<Vec<Depth>>,
    min_samples_leaf: Option<Vec<usize>>,
    max_features: Option<Vec<MaxFeatures>>,
}

impl GridFile {
    fn parse(text: &str, json: bool) -> Result<GridSpec> {
        let file: GridFile = if json { serde_json::from_str(text)? } else { toml::from_str(text)? };
        let default = GridSpec::default();
        let max_depth = match file.max_depth {
            None => default.max_depth,
            Some(ds) => ds
                .into_iter()
                .map(|d| match d {
                    Depth::Limit(0) => bail!("max_depth 0 is not allowed; use \"none\" for unbounded"),
                    Depth::Limit(n) => Ok(Some(n)),
                    Depth::Word(w) if w == "none" => Ok(None),
                    Depth::Word(w) => bail!("max_depth {w:?} is neither a number nor \"none\""),
                })
                .collect::<Result<_>>()?,
        };
        let grid = GridSpec {
            n_trees: file.n_trees.unwrap_or(default.n_trees),
            max_depth,
            min_samples_leaf: file.min_samples_leaf.unwrap_or(default.min_samples_leaf),
            max_features: file.max_features.unwrap_or(default.max_features),
        };
        if grid.expand().is_empty() {
            bail!("grid has no points");
        }
        if grid.n_trees.contains(&0) || grid.min_samples_leaf.contains(&0) {
            bail!("n_trees and min_samples_leaf must be positive");
        }
        Ok(grid)
    }
}

fn train(a: TrainArgs) -> Result<()> {
    let (_, dataset) = load_results(&a.dataset)?;
    let corpus = open_corpus(&a.corpus)?;
    let grid = match &a.grid {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| usage(format!("grid {}: {e}", p.display())))?;
            let json = p.extension().is_some_and(|e| e == "json");
            GridFile::parse(&text, json).with_context(|| format!("grid {}", p.display()))?
        }
        None => GridSpec::default(),
    };
    let cfg = TrainConfig {
        grid: grid.expand(),
        folds: a.folds,
        seed: a.seed,
        ..TrainConfig::default()
    };
    let opts = PromptOptions {
        include_cot: !a.no_cot,
        ..PromptOptions::default()
    };
    let (model, cv) = maniple::train(&dataset, &corpus, &cfg, a.top_m, a.n_boot, opts)?;
    model.save(&a.out)?;
    if let Some(p) = &a.report {
        std::fs::write(p, serde_json::to_string_pretty(&cv)?).with_context(|| format!("writing {}", p.display()))?;
    }
    let sets: Vec<String> = model.candidate_sets.iter().map(FactSet::to_string).collect();
    println!("candidates: {}", sets.join(" "));
    println!(
        "chosen: n_trees={} max_depth={} min_samples_leaf={} max_features={:?} length={:?}",
        cv.chosen.n_trees,
        cv.chosen.max_depth.map_or("none".to_string(), |d| d.to_string()),
        cv.chosen.min_samples_leaf,
        cv.chosen.max_features,
        cv.length_mode
    );
    let folds: Vec<String> = cv.fold_accuracy.iter().map(|x| format!("{x:.3}")).collect();
    println!("cv accuracy: {:.3} (folds {})", cv.mean_accuracy, folds.join(" "));
    println!("model written to {}", a.out.display());
    Ok(())
}

fn ranking_table(model: &ForestModel, recs: &[maniple::Recommendation]) -> String {
    let mut out = String::from("rank,bits,score");
    for c in &model.classes {
        out.push_str(&format!(",p_{}", format!("{c:?}").to_lowercase()));
    }
    out.push('\n');
    for (i, r) in recs.iter().enumerate() {
        out.push_str(&format!("{},{},{}", i + 1, r.set, r.score));
        for p in &r.probabilities {
            out.push_str(&format!(",{p}"));
        }
        out.push('\n');
    }
    out
}

fn select(a: SelectArgs) -> Result<()> {
    let corpus = open_corpus(&a.corpus)?;
    let (bug, facts) = find_bug(&corpus, &a.bug)?;
    if !a.model.is_file() {
        return Err(usage(format!("model file {} does not exist", a.model.display())));
    }
    let model = ForestModel::load(&a.model)?;
    let opts = PromptOptions {
        include_cot: !a.no_cot,
        ..PromptOptions::default()
    };
    let recs = maniple::select_facts(&model, bug, facts, opts)?;
    let table = ranking_table(&model, &recs);
    if a.emit_prompt {
        eprint!("{table}");
        let mut plan = PromptPlan::new(Job::new(bug, recs[0].set));
        plan.include_cot = opts.include_cot;
        write_output(None, &render(&plan, facts)?.text)
    } else {
        write_output(None, &table)
    }
}
