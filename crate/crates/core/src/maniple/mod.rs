//! Bug-tailored fact selection with a random-forest classifier.
//!
//! Each training row is one (bug, fact set) pair. Its features are the
//! effective bitvector, a one-hot repository block, the prompt length and
//! the buggy function's cyclomatic complexity; its label is the pass@1 of
//! that pair binned into [`SuccessClass`]es. At selection time every
//! candidate set is scored by the forest's vote share for the best class.

mod forest;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{BugRecord, Dataset, Job, LoadedCorpus};
use crate::extract::ExtractedFacts;
use crate::facts::{FactKind, FactSet, FACT_COUNT, FACT_SET_COUNT};
use crate::metrics::masked_pass1;
use crate::prompt::{render, FactOrder, PromptError, PromptPlan, RenderedPrompt};

pub use forest::{fit_forest, fit_tree, vote, Hyperparams, MaxFeatures, Node, Tree};

/// Bumped whenever the feature layout or model document changes.
pub const SCHEMA_VERSION: u32 = 1;
pub const MODEL_FORMAT: &str = "factsel-forest";

#[derive(Debug, thiserror::Error)]
pub enum ManipleError {
    #[error("need at least {need} distinct bugs, got {got}")]
    TooFewBugs { need: usize, got: usize },
    #[error("training labels contain a single class ({0:?})")]
    Degenerate(SuccessClass),
    #[error("repository {0:?} is not in the model's feature schema")]
    UnseenRepository(String),
    #[error("feature vector has {got} repository columns, schema has {expected}")]
    SchemaMismatch { expected: usize, got: usize },
    #[error("no candidate fact set could be rendered for bug {0}")]
    NoCandidate(String),
    #[error("top_m must be between 1 and 128, got {0}")]
    TopM(usize),
    #[error("empty input: {0}")]
    Empty(&'static str),
    #[error("bug {0} is not in the corpus")]
    UnknownBug(String),
    #[error("rendering prompt for {bug} {set}: {source}")]
    Prompt {
        bug: String,
        set: FactSet,
        #[source]
        source: PromptError,
    },
    #[error("model file {path}: {message}")]
    ModelFile { path: String, message: String },
    #[error("invalid model: {0}")]
    InvalidModel(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SuccessClass {
    Fail,
    Low,
    High,
}

impl SuccessClass {
    pub const ALL: [SuccessClass; 3] = [SuccessClass::Fail, SuccessClass::Low, SuccessClass::High];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// Bin edges for labels: 0 is Fail, `(0, low_max]` is Low, above is High.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelBins {
    pub low_max: f64,
}

impl Default for LabelBins {
    fn default() -> Self {
        LabelBins { low_max: 0.5 }
    }
}

impl LabelBins {
    pub fn classify(&self, pass_at_1: f64) -> SuccessClass {
        if pass_at_1 <= 0.0 {
            SuccessClass::Fail
        } else if pass_at_1 <= self.low_max {
            SuccessClass::Low
        } else {
            SuccessClass::High
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LengthMode {
    Chars,
    Tokens,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum UnseenRepoPolicy {
    /// All-zero repository block and a logged warning.
    #[default]
    ZeroWithWarning,
    Error,
}

/// Frozen description of the feature layout:
/// `[7 bits | one column per repository | length | complexity]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    pub version: u32,
    pub repositories: Vec<String>,
    pub length_mode: LengthMode,
    #[serde(default)]
    pub unseen_repository: UnseenRepoPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub bits: [u8; FACT_COUNT],
    pub repo_onehot: Vec<u8>,
    pub length: f64,
    pub complexity: usize,
}

impl FeatureVector {
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.bits.iter().map(|b| f64::from(*b)).collect();
        v.extend(self.repo_onehot.iter().map(|b| f64::from(*b)));
        v.push(self.length);
        v.push(self.complexity as f64);
        v
    }
}

impl FeatureSchema {
    pub fn new(repositories: impl IntoIterator<Item = String>, length_mode: LengthMode) -> FeatureSchema {
        let repositories: BTreeSet<String> = repositories.into_iter().collect();
        FeatureSchema {
            version: SCHEMA_VERSION,
            repositories: repositories.into_iter().collect(),
            length_mode,
            unseen_repository: UnseenRepoPolicy::default(),
        }
    }

    pub fn dimension(&self) -> usize {
        FACT_COUNT + self.repositories.len() + 2
    }

    pub fn feature_names(&self) -> Vec<String> {
        let mut names: Vec<String> = FactKind::ALL.iter().map(|k| format!("bit:{}", k.code())).collect();
        names.extend(self.repositories.iter().map(|r| format!("repo:{r}")));
        names.push(match self.length_mode {
            LengthMode::Chars => "length:chars".into(),
            LengthMode::Tokens => "length:tokens".into(),
        });
        names.push("complexity".into());
        names
    }

    pub fn encode(&self, set: FactSet, repository: &str, chars: usize, tokens: usize, complexity: usize) -> Result<FeatureVector, ManipleError> {
        let mut bits = [0u8; FACT_COUNT];
        for k in set.kinds() {
            bits[k.position()] = 1;
        }
        let mut repo_onehot = vec![0u8; self.repositories.len()];
        match self.repositories.binary_search_by(|r| r.as_str().cmp(repository)) {
            Ok(i) => repo_onehot[i] = 1,
            Err(_) => match self.unseen_repository {
                UnseenRepoPolicy::ZeroWithWarning => {
                    log::warn!("repository {repository:?} was not seen in training; its one-hot block is all zero");
                }
                UnseenRepoPolicy::Error => return Err(ManipleError::UnseenRepository(repository.into())),
            },
        }
        let length = match self.length_mode {
            LengthMode::Chars => chars,
            LengthMode::Tokens => tokens,
        } as f64;
        Ok(FeatureVector {
            bits,
            repo_onehot,
            length,
            complexity,
        })
    }
}

/// Features of one rendered job.
pub fn build_features(schema: &FeatureSchema, job: &Job, bug: &BugRecord, facts: &ExtractedFacts, prompt: &RenderedPrompt) -> Result<FeatureVector, ManipleError> {
    schema.encode(job.effective, &bug.repository, prompt.char_length, prompt.token_length, facts.cyclomatic_complexity)
}

/// One (bug, fact set) observation with both length measures, so the
/// length mode can be chosen during cross-validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRow {
    pub bug_id: String,
    pub repository: String,
    pub set: FactSet,
    pub chars: usize,
    pub tokens: usize,
    pub complexity: usize,
    pub pass_at_1: f64,
}

impl TrainingRow {
    pub fn features(&self, schema: &FeatureSchema) -> Result<FeatureVector, ManipleError> {
        schema.encode(self.set, &self.repository, self.chars, self.tokens, self.complexity)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptOptions {
    pub include_cot: bool,
    pub include_import_preamble: bool,
}

impl Default for PromptOptions {
    fn default() -> Self {
        PromptOptions {
            include_cot: true,
            include_import_preamble: true,
        }
    }
}

fn render_job(job: &Job, facts: &ExtractedFacts, opts: PromptOptions) -> Result<RenderedPrompt, ManipleError> {
    let plan = PromptPlan {
        job: job.clone(),
        fact_order: FactOrder::CANONICAL,
        include_cot: opts.include_cot,
        include_import_preamble: opts.include_import_preamble,
    };
    render(&plan, facts).map_err(|source| ManipleError::Prompt {
        bug: job.bug_id.clone(),
        set: job.effective,
        source,
    })
}

/// Render every dataset entry's prompt to obtain its length features.
pub fn training_rows(dataset: &Dataset, corpus: &LoadedCorpus, opts: PromptOptions) -> Result<Vec<TrainingRow>, ManipleError> {
    dataset
        .entries
        .par_iter()
        .map(|e| {
            let (bug, facts) = corpus.bug(e.bug_id()).ok_or_else(|| ManipleError::UnknownBug(e.bug_id().into()))?;
            let prompt = render_job(&e.job, facts, opts)?;
            Ok(TrainingRow {
                bug_id: bug.bug_id.clone(),
                repository: bug.repository.clone(),
                set: e.effective(),
                chars: prompt.char_length,
                tokens: prompt.token_length,
                complexity: facts.cyclomatic_complexity,
                pass_at_1: e.pass_at_1,
            })
        })
        .collect()
}

/// Fact sets with the best mean rank across bootstrap resamples of bugs.
/// Within a resample, sets are ranked by mean pass@1 (a bug's value for a
/// set is looked up after masking by what the bug has). Ties go to the
/// lower bitvector at both stages.
pub fn top_fact_sets(dataset: &Dataset, top_m: usize, n_boot: usize, rng_seed: u64) -> Result<Vec<FactSet>, ManipleError> {
    if top_m == 0 || top_m > FACT_SET_COUNT {
        return Err(ManipleError::TopM(top_m));
    }
    if n_boot == 0 {
        return Err(ManipleError::Empty("bootstrap resamples"));
    }
    let by_bug = dataset.by_bug();
    if by_bug.is_empty() {
        return Err(ManipleError::Empty("dataset"));
    }
    let table: Vec<[f64; FACT_SET_COUNT]> = by_bug
        .values()
        .map(|es| {
            let mut row = [0.0; FACT_SET_COUNT];
            for s in FactSet::all() {
                row[s.value() as usize] = masked_pass1(es, s);
            }
            row
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut rank_sum = [0.0f64; FACT_SET_COUNT];
    for _ in 0..n_boot {
        let mut means = [0.0f64; FACT_SET_COUNT];
        for _ in 0..table.len() {
            let row = &table[rng.gen_range(0..table.len())];
            for (m, v) in means.iter_mut().zip(row) {
                *m += v;
            }
        }
        let mut order: Vec<usize> = (0..FACT_SET_COUNT).collect();
        order.sort_by(|&a, &b| means[b].total_cmp(&means[a]).then(a.cmp(&b)));
        for (rank, set) in order.into_iter().enumerate() {
            rank_sum[set] += (rank + 1) as f64;
        }
    }
    let mut sets: Vec<usize> = (0..FACT_SET_COUNT).collect();
    sets.sort_by(|&a, &b| rank_sum[a].total_cmp(&rank_sum[b]).then(a.cmp(&b)));
    Ok(sets
        .into_iter()
        .take(top_m)
        .map(|v| FactSet::from_value(v as u32).expect("index below 128"))
        .collect())
}

/// The hyperparameter grid searched when none is given.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub n_trees: Vec<usize>,
    pub max_depth: Vec<Option<usize>>,
    pub min_samples_leaf: Vec<usize>,
    pub max_features: Vec<MaxFeatures>,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            n_trees: vec![100, 300],
            max_depth: vec![None, Some(8), Some(16)],
            min_samples_leaf: vec![1, 5],
            max_features: vec![MaxFeatures::Sqrt, MaxFeatures::All],
        }
    }
}

impl GridSpec {
    pub fn expand(&self) -> Vec<Hyperparams> {
        let mut out = Vec::new();
        for &n_trees in &self.n_trees {
            for &max_depth in &self.max_depth {
                for &min_samples_leaf in &self.min_samples_leaf {
                    for &max_features in &self.max_features {
                        out.push(Hyperparams {
                            n_trees,
                            max_depth,
                            min_samples_leaf,
                            max_features,
                        });
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub grid: Vec<Hyperparams>,
    pub folds: usize,
    pub seed: u64,
    pub bins: LabelBins,
    /// Length measures tried during cross-validation, in preference order.
    pub length_modes: Vec<LengthMode>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            grid: GridSpec::default().expand(),
            folds: 5,
            seed: 0,
            bins: LabelBins::default(),
            length_modes: vec![LengthMode::Chars, LengthMode::Tokens],
        }
    }
}

/// Split bug ids into `k` validation folds: sorted, shuffled under `seed`,
/// then dealt round-robin.
pub fn grouped_folds<'a>(bug_ids: impl IntoIterator<Item = &'a str>, k: usize, seed: u64) -> Result<Vec<Vec<String>>, ManipleError> {
    let mut ids: Vec<&str> = bug_ids.into_iter().collect::<BTreeSet<_>>().into_iter().collect();
    if k < 2 || ids.len() < k {
        return Err(ManipleError::TooFewBugs {
            need: k.max(2),
            got: ids.len(),
        });
    }
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut folds = vec![Vec::new(); k];
    for (i, id) in ids.into_iter().enumerate() {
        folds[i % k].push(id.to_string());
    }
    for f in &mut folds {
        f.sort();
    }
    Ok(folds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub hyperparams: Hyperparams,
    pub length_mode: LengthMode,
    pub fold_accuracy: Vec<f64>,
    pub mean_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub folds: Vec<Vec<String>>,
    pub chosen: Hyperparams,
    pub length_mode: LengthMode,
    pub fold_accuracy: Vec<f64>,
    pub mean_accuracy: f64,
    pub grid: Vec<GridResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub format: String,
    pub hyperparams: Hyperparams,
    pub classes: Vec<SuccessClass>,
    pub feature_schema: FeatureSchema,
    pub candidate_sets: Vec<FactSet>,
    pub bins: LabelBins,
    pub seed: u64,
    pub trees: Vec<Tree>,
}

fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in p.iter().enumerate() {
        if *v > p[best] {
            best = i;
        }
    }
    best
}

impl ForestModel {
    /// Tree-vote fractions per class, in `classes` order.
    pub fn predict(&self, fv: &FeatureVector) -> Result<Vec<f64>, ManipleError> {
        if fv.repo_onehot.len() != self.feature_schema.repositories.len() {
            return Err(ManipleError::SchemaMismatch {
                expected: self.feature_schema.repositories.len(),
                got: fv.repo_onehot.len(),
            });
        }
        Ok(vote(&self.trees, self.classes.len(), &fv.to_vec()))
    }

    pub fn predict_class(&self, fv: &FeatureVector) -> Result<SuccessClass, ManipleError> {
        Ok(self.classes[argmax(&self.predict(fv)?)])
    }

    pub fn check(&self) -> Result<(), ManipleError> {
        if self.format != MODEL_FORMAT {
            return Err(ManipleError::InvalidModel(format!("format {:?}", self.format)));
        }
        if self.feature_schema.version != SCHEMA_VERSION {
            return Err(ManipleError::InvalidModel(format!(
                "schema version {} (this build reads {SCHEMA_VERSION})",
                self.feature_schema.version
            )));
        }
        if self.trees.is_empty() || self.classes.is_empty() {
            return Err(ManipleError::InvalidModel("no trees or no classes".into()));
        }
        let dim = self.feature_schema.dimension();
        for (i, t) in self.trees.iter().enumerate() {
            if t.max_feature_index().is_some_and(|f| f >= dim) {
                return Err(ManipleError::InvalidModel(format!("tree {i} splits on a feature outside 0..{dim}")));
            }
            for n in &t.nodes {
                let bad = match n {
                    Node::Leaf { class } => *class >= self.classes.len(),
                    Node::Split { left, right, .. } => *left >= t.nodes.len() || *right >= t.nodes.len(),
                };
                if bad {
                    return Err(ManipleError::InvalidModel(format!("tree {i} has a dangling node")));
                }
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<ForestModel, ManipleError> {
        let model: ForestModel = serde_json::from_str(text).map_err(|e| ManipleError::InvalidModel(e.to_string()))?;
        model.check()?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<(), ManipleError> {
        crate::corpus::write_json_atomic(path, self).map_err(|e| ManipleError::ModelFile {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    pub fn load(path: &Path) -> Result<ForestModel, ManipleError> {
        let text = std::fs::read_to_string(path).map_err(|e| ManipleError::ModelFile {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        ForestModel::from_json(&text)
    }
}

pub fn predict(model: &ForestModel, fv: &FeatureVector) -> Result<Vec<f64>, ManipleError> {
    model.predict(fv)
}

struct Encoded {
    x: Vec<Vec<f64>>,
    y: Vec<usize>,
}

fn encode_rows(rows: &[TrainingRow], schema: &FeatureSchema, bins: LabelBins) -> Result<Encoded, ManipleError> {
    let mut x = Vec::with_capacity(rows.len());
    let mut y = Vec::with_capacity(rows.len());
    for r in rows {
        x.push(r.features(schema)?.to_vec());
        y.push(bins.classify(r.pass_at_1).index());
    }
    Ok(Encoded { x, y })
}

fn fold_accuracy(enc: &Encoded, train: &[usize], test: &[usize], hp: Hyperparams, seed: u64) -> f64 {
    let x: Vec<Vec<f64>> = train.iter().map(|&i| enc.x[i].clone()).collect();
    let y: Vec<usize> = train.iter().map(|&i| enc.y[i]).collect();
    let trees = fit_forest(&x, &y, SuccessClass::ALL.len(), hp, seed);
    let hits = test
        .iter()
        .filter(|&&i| argmax(&vote(&trees, SuccessClass::ALL.len(), &enc.x[i])) == enc.y[i])
        .count();
    hits as f64 / test.len() as f64
}

/// Grid search with grouped k-fold cross-validation, then a final fit on
/// all rows with the winning hyperparameters and length mode. Equal mean
/// accuracy prefers fewer trees, then shallower trees, then earlier grid
/// and length-mode order.
pub fn train_rows(rows: &[TrainingRow], candidate_sets: Vec<FactSet>, cfg: &TrainConfig) -> Result<(ForestModel, CvReport), ManipleError> {
    if cfg.grid.is_empty() {
        return Err(ManipleError::Empty("hyperparameter grid"));
    }
    if cfg.length_modes.is_empty() {
        return Err(ManipleError::Empty("length modes"));
    }
    if rows.is_empty() {
        return Err(ManipleError::Empty("training rows"));
    }
    let labels: BTreeSet<SuccessClass> = rows.iter().map(|r| cfg.bins.classify(r.pass_at_1)).collect();
    if labels.len() < 2 {
        return Err(ManipleError::Degenerate(*labels.iter().next().expect("non-empty")));
    }
    let folds = grouped_folds(rows.iter().map(|r| r.bug_id.as_str()), cfg.folds, cfg.seed)?;
    let fold_of: BTreeMap<&str, usize> = folds
        .iter()
        .enumerate()
        .flat_map(|(i, f)| f.iter().map(move |b| (b.as_str(), i)))
        .collect();
    let splits: Vec<(Vec<usize>, Vec<usize>)> = (0..folds.len())
        .map(|f| (0..rows.len()).partition(|&i| fold_of[rows[i].bug_id.as_str()] != f))
        .collect();

    let repositories = rows.iter().map(|r| r.repository.clone());
    let schemas: Vec<FeatureSchema> = cfg
        .length_modes
        .iter()
        .map(|&m| FeatureSchema::new(repositories.clone(), m))
        .collect();
    let encoded: Vec<Encoded> = schemas
        .iter()
        .map(|s| encode_rows(rows, s, cfg.bins))
        .collect::<Result<_, _>>()?;

    let points: Vec<(usize, Hyperparams)> = (0..schemas.len())
        .flat_map(|m| cfg.grid.iter().map(move |hp| (m, *hp)))
        .collect();
    let results: Vec<GridResult> = points
        .par_iter()
        .map(|&(m, hp)| {
            let fold_accuracy: Vec<f64> = splits
                .iter()
                .map(|(train, test)| fold_accuracy(&encoded[m], train, test, hp, cfg.seed))
                .collect();
            let mean_accuracy = fold_accuracy.iter().sum::<f64>() / fold_accuracy.len() as f64;
            GridResult {
                hyperparams: hp,
                length_mode: schemas[m].length_mode,
                fold_accuracy,
                mean_accuracy,
            }
        })
        .collect();

    let mut best = 0;
    for (i, r) in results.iter().enumerate().skip(1) {
        let b = &results[best];
        let better = r.mean_accuracy > b.mean_accuracy
            || (r.mean_accuracy == b.mean_accuracy && r.hyperparams.simplicity_key() < b.hyperparams.simplicity_key());
        if better {
            best = i;
        }
    }
    let chosen = results[best].clone();
    let m = cfg.length_modes.iter().position(|&l| l == chosen.length_mode).expect("mode from list");
    let trees = fit_forest(&encoded[m].x, &encoded[m].y, SuccessClass::ALL.len(), chosen.hyperparams, cfg.seed);
    let model = ForestModel {
        format: MODEL_FORMAT.into(),
        hyperparams: chosen.hyperparams,
        classes: SuccessClass::ALL.to_vec(),
        feature_schema: schemas[m].clone(),
        candidate_sets,
        bins: cfg.bins,
        seed: cfg.seed,
        trees,
    };
    let report = CvReport {
        folds,
        chosen: chosen.hyperparams,
        length_mode: chosen.length_mode,
        fold_accuracy: chosen.fold_accuracy,
        mean_accuracy: chosen.mean_accuracy,
        grid: results,
    };
    Ok((model, report))
}

/// Full training from a dataset and its corpus: pick the top candidate
/// sets by bootstrap, keep each bug's entries for those sets (after
/// masking), render them for length features, and run the grid search.
pub fn train(
    dataset: &Dataset,
    corpus: &LoadedCorpus,
    cfg: &TrainConfig,
    top_m: usize,
    n_boot: usize,
    opts: PromptOptions,
) -> Result<(ForestModel, CvReport), ManipleError> {
    let candidates = top_fact_sets(dataset, top_m, n_boot, cfg.seed)?;
    let mut keep: BTreeSet<(String, FactSet)> = BTreeSet::new();
    for (bug, entries) in dataset.by_bug() {
        let mask = entries.iter().fold(FactSet::EMPTY, |m, e| m.union(e.effective()));
        for c in &candidates {
            keep.insert((bug.to_string(), c.intersect(mask)));
        }
    }
    let restricted = Dataset {
        entries: dataset
            .entries
            .iter()
            .filter(|e| keep.contains(&(e.job.bug_id.clone(), e.effective())))
            .cloned()
            .collect(),
    };
    let rows = training_rows(&restricted, corpus, opts)?;
    train_rows(&rows, candidates, cfg)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub set: FactSet,
    /// Probability mass of the best success class.
    pub score: f64,
    pub probabilities: Vec<f64>,
}

fn expected_class(p: &[f64]) -> f64 {
    p.iter().enumerate().map(|(i, v)| i as f64 * v).sum()
}

/// Score each candidate and rank: higher best-class probability first,
/// then higher expected class, then lower bitvector.
pub fn rank_candidates(model: &ForestModel, candidates: &[(FactSet, FeatureVector)]) -> Result<Vec<Recommendation>, ManipleError> {
    let top = model.classes.len() - 1;
    let mut out: Vec<Recommendation> = candidates
        .iter()
        .map(|(set, fv)| {
            let probabilities = model.predict(fv)?;
            Ok(Recommendation {
                set: *set,
                score: probabilities[top],
                probabilities,
            })
        })
        .collect::<Result<_, ManipleError>>()?;
    out.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(expected_class(&b.probabilities).total_cmp(&expected_class(&a.probabilities)))
            .then(a.set.value().cmp(&b.set.value()))
    });
    Ok(out)
}

/// Rank the model's candidate sets for one bug. Each candidate is masked
/// by the bug's available facts; candidates that collapse onto the same
/// effective set are scored once.
pub fn select_facts(model: &ForestModel, bug: &BugRecord, facts: &ExtractedFacts, opts: PromptOptions) -> Result<Vec<Recommendation>, ManipleError> {
    let mut seen = BTreeSet::new();
    let mut scored = Vec::new();
    for &c in &model.candidate_sets {
        let job = Job::new(bug, c);
        if !seen.insert(job.effective) {
            continue;
        }
        match render_job(&job, facts, opts) {
            Ok(prompt) => scored.push((job.effective, build_features(&model.feature_schema, &job, bug, facts, &prompt)?)),
            Err(e) => log::warn!("{e}"),
        }
    }
    if scored.is_empty() {
        return Err(ManipleError::NoCandidate(bug.bug_id.clone()));
    }
    rank_candidates(model, &scored)
}
