//! Classification forest: bagged CART trees split on Gini impurity.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaxFeatures {
    /// `ceil(sqrt(m))` candidate features per split.
    Sqrt,
    All,
}

impl MaxFeatures {
    pub fn resolve(self, m: usize) -> usize {
        match self {
            MaxFeatures::Sqrt => ((m as f64).sqrt().ceil() as usize).clamp(1, m.max(1)),
            MaxFeatures::All => m.max(1),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Hyperparams {
    pub n_trees: usize,
    /// `None` grows until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub max_features: MaxFeatures,
}

impl Hyperparams {
    /// Ordering key for preferring simpler models: fewer trees, then
    /// shallower (unbounded depth counts as deepest).
    pub(crate) fn simplicity_key(&self) -> (usize, usize) {
        (self.n_trees, self.max_depth.unwrap_or(usize::MAX))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Node {
    Leaf {
        class: usize,
    },
    /// Rows with `x[feature] <= threshold` go to `left`.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

/// One tree as a flat node list; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> usize {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { class } => return *class,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn max_feature_index(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .max()
    }
}

fn gini(counts: &[usize], total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / t).powi(2)).sum::<f64>()
}

fn majority(counts: &[usize]) -> usize {
    // ties go to the lower class index
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [usize],
    n_classes: usize,
    params: Hyperparams,
    n_candidates: usize,
    nodes: Vec<Node>,
}

impl Builder<'_> {
    fn counts(&self, rows: &[usize]) -> Vec<usize> {
        let mut c = vec![0; self.n_classes];
        for &r in rows {
            c[self.y[r]] += 1;
        }
        c
    }

    /// Best (feature, threshold, impurity) over a random feature subset.
    fn best_split(&self, rows: &[usize], rng: &mut ChaCha8Rng) -> Option<(usize, f64)> {
        let m = self.x[0].len();
        let min_leaf = self.params.min_samples_leaf.max(1);
        let parent = gini(&self.counts(rows), rows.len()) * rows.len() as f64;
        let mut best: Option<(f64, usize, f64)> = None;
        for feature in sample(rng, m, self.n_candidates).into_iter() {
            let mut sorted: Vec<(f64, usize)> = rows.iter().map(|&r| (self.x[r][feature], self.y[r])).collect();
            sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let mut left = vec![0usize; self.n_classes];
            let mut right = self.counts(rows);
            for i in 0..sorted.len() - 1 {
                left[sorted[i].1] += 1;
                right[sorted[i].1] -= 1;
                let n_left = i + 1;
                let n_right = sorted.len() - n_left;
                if sorted[i].0 == sorted[i + 1].0 || n_left < min_leaf || n_right < min_leaf {
                    continue;
                }
                let score = gini(&left, n_left) * n_left as f64 + gini(&right, n_right) * n_right as f64;
                if score < parent - 1e-12 && best.is_none_or(|(s, ..)| score < s) {
                    let threshold = sorted[i].0 + (sorted[i + 1].0 - sorted[i].0) / 2.0;
                    best = Some((score, feature, threshold));
                }
            }
        }
        best.map(|(_, f, t)| (f, t))
    }

    fn grow(&mut self, rows: Vec<usize>, depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let counts = self.counts(&rows);
        let id = self.nodes.len();
        self.nodes.push(Node::Leaf { class: majority(&counts) });
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let depth_reached = self.params.max_depth.is_some_and(|d| depth >= d);
        if pure || depth_reached || rows.len() < 2 * self.params.min_samples_leaf.max(1) {
            return id;
        }
        let Some((feature, threshold)) = self.best_split(&rows, rng) else {
            return id;
        };
        let (l, r): (Vec<usize>, Vec<usize>) = rows.iter().partition(|&&row| self.x[row][feature] <= threshold);
        let left = self.grow(l, depth + 1, rng);
        let right = self.grow(r, depth + 1, rng);
        self.nodes[id] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        id
    }
}

/// Grow one tree on the given (possibly repeated) row indices.
pub fn fit_tree(x: &[Vec<f64>], y: &[usize], n_classes: usize, rows: Vec<usize>, params: Hyperparams, rng: &mut ChaCha8Rng) -> Tree {
    let m = x.first().map_or(0, Vec::len);
    let mut b = Builder {
        x,
        y,
        n_classes,
        params,
        n_candidates: params.max_features.resolve(m),
        nodes: Vec::new(),
    };
    b.grow(rows, 0, rng);
    Tree { nodes: b.nodes }
}

/// Bagged forest. Tree `i` draws from its own stream of the seeded
/// generator, so the result does not depend on thread scheduling.
pub fn fit_forest(x: &[Vec<f64>], y: &[usize], n_classes: usize, params: Hyperparams, seed: u64) -> Vec<Tree> {
    assert_eq!(x.len(), y.len());
    assert!(!x.is_empty(), "cannot fit on zero rows");
    (0..params.n_trees)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64 + 1);
            let rows: Vec<usize> = (0..x.len()).map(|_| rng.gen_range(0..x.len())).collect();
            fit_tree(x, y, n_classes, rows, params, &mut rng)
        })
        .collect()
}

/// Fraction of trees voting for each class.
pub fn vote(trees: &[Tree], n_classes: usize, x: &[f64]) -> Vec<f64> {
    let mut votes = vec![0usize; n_classes];
    for t in trees {
        votes[t.predict(x)] += 1;
    }
    votes.iter().map(|&v| v as f64 / trees.len() as f64).collect()
}
