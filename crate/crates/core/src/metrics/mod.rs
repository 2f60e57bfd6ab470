//! Repair-effectiveness measures over response sets and datasets.

pub mod report;

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, DatasetEntry, ResponseSet, Verdict};
use crate::facts::{FactKind, FactSet, FACT_COUNT, FACT_SET_COUNT};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum MetricsError {
    #[error("pass@k needs 1 <= k <= n and C <= n (n={n}, C={c}, k={k})")]
    BadCounts { n: u64, c: u64, k: u64 },
    #[error("no baseline successes: entries without {0} all have pass@k 0")]
    NoBaseline(FactKind),
    #[error("no entries {} {fact}", if *.with { "with" } else { "without" })]
    EmptyPartition { fact: FactKind, with: bool },
    #[error("characteristic function undefined for {} subsets, e.g. {}", .0.len(), .0.first().map(|s| s.to_string()).unwrap_or_default())]
    MissingSubsets(Vec<FactSet>),
    #[error("no bug is fixed by any fact set")]
    EmptyUnion,
    #[error("empty input: {0}")]
    Empty(&'static str),
}

pub fn binomial(n: u64, k: u64) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let k = k.min(n - k);
    let mut acc = BigUint::one();
    for i in 0..k {
        acc = acc * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    acc
}

/// `1 - C(n-C, k) / C(n, k)` as an exact fraction.
pub fn pass_at_k_exact(n: u64, c: u64, k: u64) -> Result<BigRational, MetricsError> {
    if k == 0 || k > n || c > n {
        return Err(MetricsError::BadCounts { n, c, k });
    }
    let fail = BigRational::new(BigInt::from(binomial(n - c, k)), BigInt::from(binomial(n, k)));
    Ok(BigRational::one() - fail)
}

pub fn pass_at_k(n: u64, c: u64, k: u64) -> Result<f64, MetricsError> {
    Ok(to_f64(&pass_at_k_exact(n, c, k)?))
}

fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().expect("bounded fraction converts")
}

/// Smallest step between attainable pass@k values for n responses.
pub fn granularity(n: u64, k: u64) -> Result<f64, MetricsError> {
    if k == 0 || k > n {
        return Err(MetricsError::BadCounts { n, c: 0, k });
    }
    Ok(to_f64(&BigRational::new(BigInt::one(), BigInt::from(binomial(n, k)))))
}

/// Bugs with at least one plausible response in any of the sets.
pub fn num_fixed(response_sets: &[ResponseSet]) -> usize {
    response_sets
        .iter()
        .filter(|rs| rs.responses.iter().any(|r| r.verdict == Verdict::Plausible))
        .map(|rs| rs.job.bug_id.as_str())
        .collect::<BTreeSet<_>>()
        .len()
}

/// pass@k of a dataset entry from its response counts.
pub fn entry_pass_at_k(entry: &DatasetEntry, k: u64) -> Result<f64, MetricsError> {
    let c = entry.response_counts;
    pass_at_k(c.n as u64, c.successes as u64, k)
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Relative change of mean pass@k between entries that include `fact` and
/// entries that do not.
pub fn fact_gain(dataset: &Dataset, fact: FactKind, k: u64) -> Result<f64, MetricsError> {
    let (mut with, mut without) = (Vec::new(), Vec::new());
    for e in &dataset.entries {
        let p = entry_pass_at_k(e, k)?;
        if e.effective().contains(fact) {
            with.push(p);
        } else {
            without.push(p);
        }
    }
    let with = mean(&with).ok_or(MetricsError::EmptyPartition { fact, with: true })?;
    let without = mean(&without).ok_or(MetricsError::EmptyPartition { fact, with: false })?;
    if without == 0.0 {
        return Err(MetricsError::NoBaseline(fact));
    }
    Ok((with - without) / without)
}

/// Game values indexed by [`FactSet::value`].
pub type Game = [f64; FACT_SET_COUNT];

/// `v(S)` = mean pass@k over entries whose effective set is exactly `S`.
pub fn characteristic_function(dataset: &Dataset, k: u64) -> Result<Game, MetricsError> {
    let mut sums = [0.0; FACT_SET_COUNT];
    let mut counts = [0usize; FACT_SET_COUNT];
    for e in &dataset.entries {
        let i = e.effective().value() as usize;
        sums[i] += entry_pass_at_k(e, k)?;
        counts[i] += 1;
    }
    let missing: Vec<FactSet> = FactSet::all().filter(|s| counts[s.value() as usize] == 0).collect();
    if !missing.is_empty() {
        return Err(MetricsError::MissingSubsets(missing));
    }
    let mut v = [0.0; FACT_SET_COUNT];
    for i in 0..FACT_SET_COUNT {
        v[i] = sums[i] / counts[i] as f64;
    }
    Ok(v)
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// Exact Shapley values of a 7-player game, by summing weighted marginal
/// contributions over all coalitions.
pub fn shapley_from_game(v: &Game) -> [f64; FACT_COUNT] {
    let total = factorial(FACT_COUNT);
    let mut phi = [0.0; FACT_COUNT];
    for kind in FactKind::ALL {
        let mut acc = 0.0;
        for s in FactSet::all().filter(|s| !s.contains(kind)) {
            let size = s.len();
            let weight = factorial(size) * factorial(FACT_COUNT - size - 1) / total;
            acc += weight * (v[s.with(kind).value() as usize] - v[s.value() as usize]);
        }
        phi[kind.position()] = acc;
    }
    phi
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapleyValues {
    /// Indexed by taxonomy position.
    pub values: [f64; FACT_COUNT],
}

impl ShapleyValues {
    pub fn get(&self, kind: FactKind) -> f64 {
        self.values[kind.position()]
    }

    /// Values multiplied by 16, the scale used in published tables.
    pub fn scaled(&self, kind: FactKind) -> f64 {
        16.0 * self.get(kind)
    }
}

pub fn shapley_values(dataset: &Dataset, k: u64) -> Result<ShapleyValues, MetricsError> {
    Ok(ShapleyValues {
        values: shapley_from_game(&characteristic_function(dataset, k)?),
    })
}

/// Bugs fixed (at least one success) by each fact set present in the data.
pub type FixedBy = BTreeMap<FactSet, BTreeSet<String>>;

pub fn fixed_by(dataset: &Dataset) -> FixedBy {
    let mut map = FixedBy::new();
    for e in &dataset.entries {
        let bugs = map.entry(e.effective()).or_default();
        if e.response_counts.successes > 0 {
            bugs.insert(e.job.bug_id.clone());
        }
    }
    map
}

/// Share of all fixable bugs that `f` fixes.
pub fn coverage_ratio(fixed_by: &FixedBy, f: FactSet) -> Result<f64, MetricsError> {
    let union: BTreeSet<&String> = fixed_by.values().flatten().collect();
    if union.is_empty() {
        return Err(MetricsError::EmptyUnion);
    }
    let covered = fixed_by.get(&f).map_or(0, BTreeSet::len);
    Ok(covered as f64 / union.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exclusivity {
    /// Bugs fixed only by sets containing the fact.
    pub exclusive_fixes: usize,
    /// Mean over bugs of the best pass@1 among sets without the fact.
    pub best_without: f64,
    /// Mean over bugs of the best pass@1 among all sets.
    pub best_overall: f64,
    pub delta: f64,
}

pub fn exclusivity_and_delta(dataset: &Dataset, fact: FactKind) -> Result<Exclusivity, MetricsError> {
    let by_bug = dataset.by_bug();
    if by_bug.is_empty() {
        return Err(MetricsError::Empty("dataset"));
    }
    let mut exclusive = 0;
    let (mut best_all, mut best_without) = (0.0, 0.0);
    for entries in by_bug.values() {
        let fixed_with = entries
            .iter()
            .any(|e| e.effective().contains(fact) && e.response_counts.successes > 0);
        let fixed_without = entries
            .iter()
            .any(|e| !e.effective().contains(fact) && e.response_counts.successes > 0);
        if fixed_with && !fixed_without {
            exclusive += 1;
        }
        best_all += entries.iter().map(|e| e.pass_at_1).fold(0.0, f64::max);
        best_without += entries
            .iter()
            .filter(|e| !e.effective().contains(fact))
            .map(|e| e.pass_at_1)
            .fold(0.0, f64::max);
    }
    let bugs = by_bug.len() as f64;
    let (best_overall, best_without) = (best_all / bugs, best_without / bugs);
    Ok(Exclusivity {
        exclusive_fixes: exclusive,
        best_without,
        best_overall,
        delta: best_overall - best_without,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactAttribution {
    pub fact: FactKind,
    pub gain: f64,
    pub shapley: f64,
    pub shapley_x16: f64,
    pub exclusive_fixes: usize,
    pub best_without: f64,
    pub delta_drop: f64,
}

/// Gain, Shapley value and exclusivity for every fact.
pub fn attributions(dataset: &Dataset, k: u64) -> Result<Vec<FactAttribution>, MetricsError> {
    let shapley = shapley_values(dataset, k)?;
    FactKind::ALL
        .into_iter()
        .map(|fact| {
            let ex = exclusivity_and_delta(dataset, fact)?;
            Ok(FactAttribution {
                fact,
                gain: fact_gain(dataset, fact, k)?,
                shapley: shapley.get(fact),
                shapley_x16: shapley.scaled(fact),
                exclusive_fixes: ex.exclusive_fixes,
                best_without: ex.best_without,
                delta_drop: ex.delta,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub cardinality: usize,
    /// Number of entries with this cardinality; 0 marks an empty point
    /// whose values are `None`.
    pub entries: usize,
    pub avg_pass1: Option<f64>,
    pub max_pass1: Option<f64>,
}

/// For each cardinality 0..=7: the mean pass@1 over entries, and the mean
/// over bugs of each bug's best pass@1 at that cardinality.
pub fn monotonicity_curve(dataset: &Dataset) -> Vec<CurvePoint> {
    let by_bug = dataset.by_bug();
    (0..=FACT_COUNT)
        .map(|c| {
            let at: Vec<f64> = dataset
                .entries
                .iter()
                .filter(|e| e.effective().len() == c)
                .map(|e| e.pass_at_1)
                .collect();
            let per_bug: Vec<f64> = by_bug
                .values()
                .filter_map(|es| {
                    es.iter()
                        .filter(|e| e.effective().len() == c)
                        .map(|e| e.pass_at_1)
                        .reduce(f64::max)
                })
                .collect();
            CurvePoint {
                cardinality: c,
                entries: at.len(),
                avg_pass1: mean(&at),
                max_pass1: mean(&per_bug),
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpsetRegion {
    /// The chosen sets whose coverage contains exactly these bugs.
    pub members: Vec<FactSet>,
    pub count: usize,
}

/// Sizes of the non-empty cells of the Venn partition of the chosen sets'
/// coverages, largest first.
pub fn upset_data(fixed_by: &FixedBy, chosen: &[FactSet]) -> Result<Vec<UpsetRegion>, MetricsError> {
    if chosen.is_empty() {
        return Err(MetricsError::Empty("chosen fact sets"));
    }
    let empty = BTreeSet::new();
    let coverages: Vec<&BTreeSet<String>> = chosen.iter().map(|s| fixed_by.get(s).unwrap_or(&empty)).collect();
    let union: BTreeSet<&String> = coverages.iter().copied().flatten().collect();
    let mut cells: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
    for bug in union {
        let members: Vec<usize> = (0..chosen.len()).filter(|i| coverages[*i].contains(bug)).collect();
        *cells.entry(members).or_default() += 1;
    }
    let mut regions: Vec<(Vec<usize>, usize)> = cells.into_iter().collect();
    regions.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    Ok(regions
        .into_iter()
        .map(|(m, count)| UpsetRegion {
            members: m.into_iter().map(|i| chosen[i]).collect(),
            count,
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BugGap {
    pub best_set: FactSet,
    pub best_pass1: f64,
    pub universal_pass1: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UniversalityGap {
    pub best_universal: FactSet,
    /// Sum over bugs of pass@1 under the universal set.
    pub universal_total: f64,
    pub per_bug: BTreeMap<String, BugGap>,
}

impl UniversalityGap {
    pub fn epsilon(&self, bug_id: &str) -> Option<f64> {
        self.per_bug.get(bug_id).map(|g| g.epsilon)
    }
}

/// pass@1 of requesting `f` for a bug whose entries are `entries`: the
/// request is masked by the facts the bug has (the union of its effective
/// sets). A missing entry counts as 0.
pub(crate) fn masked_pass1(entries: &[&DatasetEntry], f: FactSet) -> f64 {
    let mask = entries.iter().fold(FactSet::EMPTY, |m, e| m.union(e.effective()));
    let target = f.intersect(mask);
    entries
        .iter()
        .find(|e| e.effective() == target)
        .map_or(0.0, |e| e.pass_at_1)
}

/// The best bug-independent fact set and each bug's shortfall under it.
/// Ties go to the lowest bitvector value.
pub fn universality_gap(dataset: &Dataset) -> Result<UniversalityGap, MetricsError> {
    let by_bug = dataset.by_bug();
    if by_bug.is_empty() {
        return Err(MetricsError::Empty("dataset"));
    }
    let mut best: Option<(FactSet, f64)> = None;
    for f in FactSet::all() {
        let total: f64 = by_bug.values().map(|es| masked_pass1(es, f)).sum();
        if best.is_none_or(|(_, t)| total > t) {
            best = Some((f, total));
        }
    }
    let (universal, universal_total) = best.expect("128 candidates");
    let per_bug = by_bug
        .iter()
        .map(|(bug, es)| {
            let (best_set, best_pass1) = es.iter().fold((FactSet::FULL, f64::NEG_INFINITY), |acc, e| {
                if e.pass_at_1 > acc.1 || (e.pass_at_1 == acc.1 && e.effective().value() < acc.0.value()) {
                    (e.effective(), e.pass_at_1)
                } else {
                    acc
                }
            });
            let universal_pass1 = masked_pass1(es, universal);
            let gap = BugGap {
                best_set,
                best_pass1,
                universal_pass1,
                epsilon: (best_pass1 - universal_pass1).max(0.0),
            };
            (bug.to_string(), gap)
        })
        .collect();
    Ok(UniversalityGap {
        best_universal: universal,
        universal_total,
        per_bug,
    })
}

/// Standard deviation (population form) of pass@k across `repeats`
/// resamples of size `n_resample` drawn with replacement from `responses`.
pub fn bootstrap_std(responses: &[bool], n_resample: usize, repeats: usize, k: usize, rng_seed: u64) -> Result<f64, MetricsError> {
    if responses.is_empty() {
        return Err(MetricsError::Empty("response pool"));
    }
    if repeats == 0 {
        return Err(MetricsError::Empty("repeats"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut values = Vec::with_capacity(repeats);
    for _ in 0..repeats {
        let c = (0..n_resample)
            .filter(|_| responses[rng.gen_range(0..responses.len())])
            .count();
        values.push(pass_at_k(n_resample as u64, c as u64, k as u64)?);
    }
    let m = values.iter().sum::<f64>() / repeats as f64;
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / repeats as f64;
    Ok(var.sqrt())
}

/// Mean pass@1 per fact ordering, over response sets that carry one.
/// Canonically ordered sets are reported under the canonical order string.
pub fn order_histogram(response_sets: &[ResponseSet]) -> BTreeMap<String, (usize, f64)> {
    let canonical = crate::prompt::FactOrder::CANONICAL.to_string();
    let mut acc: BTreeMap<String, (usize, f64)> = BTreeMap::new();
    for rs in response_sets {
        let key = rs.fact_order.clone().unwrap_or_else(|| canonical.clone());
        let slot = acc.entry(key).or_default();
        slot.0 += 1;
        slot.1 += rs.successes() as f64 / rs.responses.len().max(1) as f64;
    }
    for v in acc.values_mut() {
        v.1 /= v.0 as f64;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Job, ResponseRecord, SampleParams};
    use proptest::prelude::*;

    fn entry(bug: &str, bits: &str, n: usize, c: usize) -> DatasetEntry {
        let s: FactSet = bits.parse().unwrap();
        DatasetEntry::new(
            Job {
                bug_id: bug.into(),
                requested: s,
                effective: s,
            },
            n,
            c,
        )
        .unwrap()
    }

    fn rs(bug: &str, bits: &str, ok: &[bool]) -> ResponseSet {
        let s: FactSet = bits.parse().unwrap();
        ResponseSet {
            job: Job {
                bug_id: bug.into(),
                requested: s,
                effective: s,
            },
            model_id: "m".into(),
            params: SampleParams {
                temperature: 1.0,
                seed: None,
                n: ok.len(),
            },
            fact_order: None,
            responses: ok
                .iter()
                .map(|o| ResponseRecord {
                    raw_text: String::new(),
                    patch: Some(String::new()),
                    verdict: if *o { Verdict::Plausible } else { Verdict::TestFail },
                })
                .collect(),
        }
    }

    #[test]
    fn pass_at_k_examples() {
        assert_eq!(pass_at_k(15, 0, 1).unwrap(), 0.0);
        assert!((pass_at_k(15, 12, 1).unwrap() - 0.8).abs() < 1e-15);
        assert_eq!(pass_at_k_exact(5, 2, 2).unwrap(), BigRational::new(7.into(), 10.into()));
        assert!(pass_at_k(3, 4, 1).is_err());
        assert!(pass_at_k(3, 1, 4).is_err());
        assert!(pass_at_k(3, 1, 0).is_err());
    }

    #[test]
    fn granularity_examples() {
        assert!((granularity(15, 1).unwrap() - 1.0 / 15.0).abs() < 1e-12);
        assert!((granularity(15, 2).unwrap() - 1.0 / 105.0).abs() < 1e-12);
        assert_eq!(granularity(7, 7).unwrap(), 1.0);
    }

    #[test]
    fn num_fixed_counts_bugs_once() {
        assert_eq!(num_fixed(&[]), 0);
        let sets = vec![
            rs("a", "0000000", &[true, false]),
            rs("a", "0000001", &[true, true]),
            rs("b", "0000000", &[false, false]),
            rs("c", "0000000", &[false, true]),
        ];
        assert_eq!(num_fixed(&sets), 2);
    }

    #[test]
    fn gain_examples() {
        let d = Dataset::new(vec![entry("a", "1000000", 4, 2), entry("a", "0000000", 4, 1)]).unwrap();
        assert!((fact_gain(&d, FactKind::BuggyClass, 1).unwrap() - 1.0).abs() < 1e-15);
        let same = Dataset::new(vec![entry("a", "1000000", 4, 2), entry("a", "0000000", 4, 2)]).unwrap();
        assert_eq!(fact_gain(&same, FactKind::BuggyClass, 1).unwrap(), 0.0);
        let zero = Dataset::new(vec![entry("a", "1000000", 4, 2), entry("a", "0000000", 4, 0)]).unwrap();
        assert_eq!(fact_gain(&zero, FactKind::BuggyClass, 1), Err(MetricsError::NoBaseline(FactKind::BuggyClass)));
    }

    fn game(f: impl Fn(FactSet) -> f64) -> Game {
        let mut v = [0.0; FACT_SET_COUNT];
        for s in FactSet::all() {
            v[s.value() as usize] = f(s);
        }
        v
    }

    #[test]
    fn shapley_axioms_small() {
        let additive = shapley_from_game(&game(|s| s.len() as f64));
        assert!(additive.iter().all(|p| (p - 1.0).abs() < 1e-12));
        let dictator = shapley_from_game(&game(|s| if s.contains(FactKind::ErrorInfo) { 1.0 } else { 0.0 }));
        for k in FactKind::ALL {
            let expected = if k == FactKind::ErrorInfo { 1.0 } else { 0.0 };
            assert!((dictator[k.position()] - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn shapley_requires_all_subsets() {
        let d = Dataset::new(vec![entry("a", "0000000", 4, 1)]).unwrap();
        match shapley_values(&d, 1) {
            Err(MetricsError::MissingSubsets(m)) => assert_eq!(m.len(), 127),
            other => panic!("{other:?}"),
        }
    }

    fn fixed(pairs: &[(&str, &[&str])]) -> FixedBy {
        pairs
            .iter()
            .map(|(s, bugs)| (s.parse().unwrap(), bugs.iter().map(|b| b.to_string()).collect()))
            .collect()
    }

    #[test]
    fn coverage_examples() {
        let fb = fixed(&[("0000001", &["a", "b"]), ("0000010", &["c", "d"]), ("0000011", &[])]);
        assert_eq!(coverage_ratio(&fb, "0000001".parse().unwrap()).unwrap(), 0.5);
        assert_eq!(coverage_ratio(&fb, "0000011".parse().unwrap()).unwrap(), 0.0);
        let all = fixed(&[("0000001", &["a", "b"]), ("0000010", &["b"])]);
        assert_eq!(coverage_ratio(&all, "0000001".parse().unwrap()).unwrap(), 1.0);
        assert_eq!(coverage_ratio(&fixed(&[("0000001", &[])]), FactSet::EMPTY), Err(MetricsError::EmptyUnion));
    }

    #[test]
    fn exclusivity_examples() {
        // bug a is only fixed with the issue; bug b is fixed without it
        let d = Dataset::new(vec![
            entry("a", "0000000", 10, 0),
            entry("a", "0000001", 10, 5),
            entry("b", "0000000", 10, 3),
            entry("b", "0000001", 10, 1),
        ])
        .unwrap();
        let ex = exclusivity_and_delta(&d, FactKind::GitHubIssue).unwrap();
        assert_eq!(ex.exclusive_fixes, 1);
        assert!((ex.best_overall - 0.4).abs() < 1e-12);
        assert!((ex.best_without - 0.15).abs() < 1e-12);
        let never = exclusivity_and_delta(&d, FactKind::BuggyClass).unwrap();
        assert_eq!((never.exclusive_fixes, never.delta), (0, 0.0));
    }

    #[test]
    fn curve_shapes() {
        let single = Dataset::new(vec![entry("a", "0010000", 10, 4)]).unwrap();
        let curve = monotonicity_curve(&single);
        assert_eq!(curve.len(), 8);
        assert_eq!(curve[1].avg_pass1, Some(0.4));
        assert_eq!(curve[1].max_pass1, Some(0.4));
        assert!(curve.iter().filter(|p| p.cardinality != 1).all(|p| p.entries == 0 && p.avg_pass1.is_none()));

        let entries = FactSet::all().map(|s| entry("a", &s.to_string(), 7, s.len())).collect();
        let linear = monotonicity_curve(&Dataset::new(entries).unwrap());
        for w in linear.windows(2) {
            assert!(w[0].avg_pass1.unwrap() < w[1].avg_pass1.unwrap());
        }
    }

    #[test]
    fn upset_examples() {
        let a: FactSet = "0000001".parse().unwrap();
        let b: FactSet = "0000010".parse().unwrap();
        let c: FactSet = "0000100".parse().unwrap();
        let disjoint = fixed(&[("0000001", &["x", "y"]), ("0000010", &["p", "q", "r"])]);
        let r = upset_data(&disjoint, &[a, b]).unwrap();
        assert_eq!(r, vec![UpsetRegion { members: vec![b], count: 3 }, UpsetRegion { members: vec![a], count: 2 }]);
        let same = fixed(&[("0000001", &["x", "y"]), ("0000010", &["x", "y"])]);
        assert_eq!(upset_data(&same, &[a, b]).unwrap(), vec![UpsetRegion { members: vec![a, b], count: 2 }]);
        // three sets: a={1,2,3,4}, b={3,4,5}, c={4,6}
        let three = fixed(&[
            ("0000001", &["1", "2", "3", "4"]),
            ("0000010", &["3", "4", "5"]),
            ("0000100", &["4", "6"]),
        ]);
        let r = upset_data(&three, &[a, b, c]).unwrap();
        let get = |m: &[FactSet]| r.iter().find(|x| x.members == m).map(|x| x.count);
        assert_eq!(get(&[a]), Some(2));
        assert_eq!(get(&[a, b]), Some(1));
        assert_eq!(get(&[a, b, c]), Some(1));
        assert_eq!(get(&[b]), Some(1));
        assert_eq!(get(&[c]), Some(1));
        assert_eq!(r.iter().map(|x| x.count).sum::<usize>(), 6);
    }

    #[test]
    fn universality_examples() {
        let all: Vec<FactSet> = FactSet::all().collect();
        let uniform: Vec<DatasetEntry> = ["a", "b"]
            .iter()
            .flat_map(|b| all.iter().map(move |s| entry(b, &s.to_string(), 10, if *s == FactSet::FULL { 9 } else { 1 })))
            .collect();
        let gap = universality_gap(&Dataset::new(uniform).unwrap()).unwrap();
        assert_eq!(gap.best_universal, FactSet::FULL);
        assert!(gap.per_bug.values().all(|g| g.epsilon == 0.0));

        let split = vec![
            entry("a", "0000000", 10, 0),
            entry("a", "0000001", 10, 8),
            entry("a", "0000010", 10, 0),
            entry("a", "0000011", 10, 0),
            entry("b", "0000000", 10, 0),
            entry("b", "0000001", 10, 0),
            entry("b", "0000010", 10, 6),
            entry("b", "0000011", 10, 0),
        ];
        let gap = universality_gap(&Dataset::new(split).unwrap()).unwrap();
        assert_eq!(gap.best_universal.to_string(), "0000001");
        assert!(gap.epsilon("b").unwrap() > 0.0);
        assert_eq!(gap.epsilon("a"), Some(0.0));
    }

    #[test]
    fn bootstrap_examples() {
        assert_eq!(bootstrap_std(&[true; 30], 15, 10, 1, 7).unwrap(), 0.0);
        assert_eq!(bootstrap_std(&[false; 30], 15, 10, 1, 7).unwrap(), 0.0);
        let pool: Vec<bool> = (0..30).map(|i| i % 10 < 3).collect();
        let a = bootstrap_std(&pool, 15, 10, 1, 11).unwrap();
        assert_eq!(a, bootstrap_std(&pool, 15, 10, 1, 11).unwrap());
        assert!(a > 0.0);
        assert!(bootstrap_std(&[], 15, 10, 1, 1).is_err());
    }

    fn brute_pass_at_k(n: usize, c: usize, k: usize) -> BigRational {
        // successes occupy indices 0..c; count k-subsets touching them
        let (mut hit, mut total) = (0u64, 0u64);
        for mask in 0u32..(1 << n) {
            if mask.count_ones() as usize != k {
                continue;
            }
            total += 1;
            if (0..c).any(|i| mask & (1 << i) != 0) {
                hit += 1;
            }
        }
        BigRational::new(hit.into(), total.into())
    }

    #[test]
    fn closed_form_matches_enumeration_small() {
        for n in 1..=8 {
            for c in 0..=n {
                for k in 1..=n {
                    assert_eq!(pass_at_k_exact(n as u64, c as u64, k as u64).unwrap(), brute_pass_at_k(n, c, k));
                }
            }
        }
    }

    proptest! {
        #[test]
        fn pass_at_k_monotone(n in 1u64..40, c in 0u64..40, k in 1u64..40) {
            prop_assume!(c <= n && k <= n);
            let p = pass_at_k_exact(n, c, k).unwrap();
            if c < n {
                prop_assert!(pass_at_k_exact(n, c + 1, k).unwrap() >= p);
            }
            if k < n {
                prop_assert!(pass_at_k_exact(n, c, k + 1).unwrap() >= p);
            }
        }

        #[test]
        fn gaps_are_non_negative(values in proptest::collection::vec(0usize..=5, 16)) {
            let sets: Vec<FactSet> = ["0000000", "0000001", "1000000", "1000001"].iter().map(|s| s.parse().unwrap()).collect();
            let entries: Vec<DatasetEntry> = (0..4)
                .flat_map(|b| sets.iter().enumerate().map(move |(i, s)| (b, i, *s)))
                .map(|(b, i, s)| entry(&format!("b{b}"), &s.to_string(), 5, values[b * 4 + i]))
                .collect();
            let d = Dataset::new(entries).unwrap();
            let gap = universality_gap(&d).unwrap();
            prop_assert!(gap.per_bug.values().all(|g| g.epsilon >= 0.0));
            for k in FactKind::ALL {
                prop_assert!(exclusivity_and_delta(&d, k).unwrap().delta >= 0.0);
            }
        }
    }
}
