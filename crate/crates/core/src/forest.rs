//! Randomized decision forest over feature vectors with discrete labels.
//!
//! Each node draws a random subset of feature dimensions, proposes a fixed
//! number of thresholds per dimension at node-local quantiles, and keeps the
//! candidate with the largest information gain. Leaves store the empirical
//! label distribution; the forest averages the distributions reached in
//! every tree.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureVector, FEATURE_DIM};

/// Stream reserved for bootstrap resampling; node streams count up from 0.
const BOOTSTRAP_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    pub trees: usize,
    pub dims_per_node: usize,
    pub thresholds_per_dim: usize,
    pub min_gain: f64,
    pub max_depth: usize,
    pub min_node: usize,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            trees: 1500,
            dims_per_node: 14,
            thresholds_per_dim: 13,
            min_gain: 1e-6,
            max_depth: 64,
            min_node: 2,
            bootstrap: true,
            seed: 42,
        }
    }
}

impl ForestConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| {
            Err(Error::InvalidInput(format!(
                "forest config: {what} must be positive"
            )))
        };
        if self.trees == 0 {
            return bad("trees");
        }
        if self.dims_per_node == 0 {
            return bad("dims_per_node");
        }
        if self.thresholds_per_dim == 0 {
            return bad("thresholds_per_dim");
        }
        if self.max_depth == 0 {
            return bad("max_depth");
        }
        if self.min_node == 0 {
            return bad("min_node");
        }
        if self.min_gain.is_nan() || self.min_gain < 0.0 {
            return Err(Error::InvalidInput(
                "forest config: min_gain must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// A split test: examples with `features[dim] < threshold` go left.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitCandidate {
    pub dim: usize,
    pub threshold: f64,
}

impl SplitCandidate {
    pub fn new(dim: usize, threshold: f64) -> Self {
        SplitCandidate { dim, threshold }
    }

    #[inline]
    pub fn goes_left(&self, features: &[f64]) -> bool {
        features[self.dim] < self.threshold
    }
}

/// Labelled examples.
#[derive(Debug, Clone)]
pub struct TrainingSet {
    features: Vec<FeatureVector>,
    labels: Vec<usize>,
    n_labels: usize,
}

impl TrainingSet {
    pub fn new(features: Vec<FeatureVector>, labels: Vec<usize>, n_labels: usize) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::InvalidInput(format!(
                "{} feature vectors but {} labels",
                features.len(),
                labels.len()
            )));
        }
        if let Some(&label) = labels.iter().find(|&&l| l >= n_labels) {
            return Err(Error::LabelOutOfRange { label, k: n_labels });
        }
        Ok(TrainingSet {
            features,
            labels,
            n_labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_labels(&self) -> usize {
        self.n_labels
    }

    pub fn features(&self) -> &[FeatureVector] {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    fn histogram(&self, idx: &[usize]) -> Vec<usize> {
        let mut h = vec![0; self.n_labels];
        for &i in idx {
            h[self.labels[i]] += 1;
        }
        h
    }
}

/// Shannon entropy in bits of a label histogram.
pub fn entropy(hist: &[usize]) -> Result<f64> {
    let total: usize = hist.iter().sum();
    if total == 0 {
        return Err(Error::EmptyHistogram);
    }
    Ok(entropy_of(hist, total))
}

fn entropy_of(hist: &[usize], total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let n = total as f64;
    -hist
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            p * p.log2()
        })
        .sum::<f64>()
}

/// Information gain of sending `left` one way and `parent - left` the other.
fn gain_from_counts(parent: &[usize], left: &[usize], scratch: &mut Vec<usize>) -> f64 {
    let n: usize = parent.iter().sum();
    let nl: usize = left.iter().sum();
    let nr = n - nl;
    scratch.clear();
    scratch.extend(parent.iter().zip(left).map(|(p, l)| p - l));
    let nf = n as f64;
    let g = entropy_of(parent, n)
        - (nl as f64 / nf) * entropy_of(left, nl)
        - (nr as f64 / nf) * entropy_of(scratch, nr);
    debug_assert!(g > -1e-12, "negative information gain {g}");
    g.max(0.0)
}

/// Information gain of `candidate` over the whole set.
pub fn split_gain(set: &TrainingSet, candidate: SplitCandidate) -> f64 {
    let all: Vec<usize> = (0..set.len()).collect();
    split_gain_on(set, &all, candidate)
}

/// Information gain of `candidate` over the examples in `idx`.
pub fn split_gain_on(set: &TrainingSet, idx: &[usize], candidate: SplitCandidate) -> f64 {
    if idx.is_empty() {
        return 0.0;
    }
    let parent = set.histogram(idx);
    let mut left = vec![0; set.n_labels];
    for &i in idx {
        if candidate.goes_left(&set.features[i].0) {
            left[set.labels[i]] += 1;
        }
    }
    gain_from_counts(&parent, &left, &mut Vec::new())
}

/// Node of a tree stored in pre-order; a split's left child directly
/// follows it.
#[derive(Debug, Clone, PartialEq)]
pub enum TreeNode {
    Split {
        split: SplitCandidate,
        left: usize,
        right: usize,
    },
    Leaf {
        dist: Vec<f64>,
    },
}

/// Flat serialized form of a node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum NodeRecord {
    Split { n: usize, tau: f64 },
    Leaf { dist: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    nodes: Vec<TreeNode>,
}

impl DecisionTree {
    /// A tree that is a single leaf.
    pub fn leaf(dist: Vec<f64>) -> Self {
        DecisionTree {
            nodes: vec![TreeNode::Leaf { dist }],
        }
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn leaf_dist(&self, features: &[f64]) -> &[f64] {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                TreeNode::Leaf { dist } => return dist,
                TreeNode::Split { split, left, right } => {
                    i = if split.goes_left(features) {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }

    /// Maximum number of split tests on any root-to-leaf path.
    pub fn max_splits(&self) -> usize {
        fn walk(nodes: &[TreeNode], i: usize) -> usize {
            match &nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => {
                    1 + walk(nodes, *left).max(walk(nodes, *right))
                }
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn to_records(&self) -> Vec<NodeRecord> {
        self.nodes
            .iter()
            .map(|n| match n {
                TreeNode::Split { split, .. } => NodeRecord::Split {
                    n: split.dim,
                    tau: split.threshold,
                },
                TreeNode::Leaf { dist } => NodeRecord::Leaf { dist: dist.clone() },
            })
            .collect()
    }

    /// Rebuilds a tree from pre-order records, checking that every leaf is a
    /// probability vector over `n_labels` labels.
    pub fn from_records(records: &[NodeRecord], n_labels: usize) -> Result<Self> {
        fn build(
            records: &[NodeRecord],
            pos: &mut usize,
            n_labels: usize,
            nodes: &mut Vec<TreeNode>,
            depth: usize,
        ) -> Result<usize> {
            let rec = records
                .get(*pos)
                .ok_or_else(|| Error::ModelFormat("tree records end inside a subtree".into()))?;
            if depth > 4096 {
                return Err(Error::ModelFormat("tree is implausibly deep".into()));
            }
            *pos += 1;
            let me = nodes.len();
            match rec {
                NodeRecord::Leaf { dist } => {
                    check_dist(dist, n_labels)?;
                    nodes.push(TreeNode::Leaf { dist: dist.clone() });
                }
                NodeRecord::Split { n, tau } => {
                    if *n >= FEATURE_DIM || !tau.is_finite() {
                        return Err(Error::ModelFormat(format!(
                            "invalid split (n={n}, tau={tau})"
                        )));
                    }
                    nodes.push(TreeNode::Leaf { dist: Vec::new() });
                    let left = build(records, pos, n_labels, nodes, depth + 1)?;
                    let right = build(records, pos, n_labels, nodes, depth + 1)?;
                    nodes[me] = TreeNode::Split {
                        split: SplitCandidate::new(*n, *tau),
                        left,
                        right,
                    };
                }
            }
            Ok(me)
        }
        let mut nodes = Vec::with_capacity(records.len());
        let mut pos = 0;
        build(records, &mut pos, n_labels, &mut nodes, 0)?;
        if pos != records.len() {
            return Err(Error::ModelFormat(format!(
                "{} trailing node records after a complete tree",
                records.len() - pos
            )));
        }
        Ok(DecisionTree { nodes })
    }
}

fn check_dist(dist: &[f64], n_labels: usize) -> Result<()> {
    if dist.len() != n_labels {
        return Err(Error::ModelFormat(format!(
            "leaf distribution has {} entries, expected {n_labels}",
            dist.len()
        )));
    }
    if dist.iter().any(|&p| p.is_nan() || p < 0.0) || (dist.iter().sum::<f64>() - 1.0).abs() > 1e-9
    {
        return Err(Error::ModelFormat(
            "leaf distribution is not a probability vector".into(),
        ));
    }
    Ok(())
}

struct TreeBuilder<'a> {
    set: &'a TrainingSet,
    cfg: &'a ForestConfig,
    seed: u64,
    nodes: Vec<TreeNode>,
    scratch: Vec<usize>,
}

impl TreeBuilder<'_> {
    fn node_rng(&self, node: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(node as u64);
        rng
    }

    fn leaf(&mut self, hist: &[usize]) -> usize {
        let n: usize = hist.iter().sum();
        let dist = hist.iter().map(|&c| c as f64 / n as f64).collect();
        self.nodes.push(TreeNode::Leaf { dist });
        self.nodes.len() - 1
    }

    fn build(&mut self, idx: Vec<usize>, depth: usize) -> usize {
        let hist = self.set.histogram(&idx);
        let pure = hist.iter().filter(|&&c| c > 0).count() <= 1;
        if pure || depth >= self.cfg.max_depth || idx.len() < self.cfg.min_node {
            return self.leaf(&hist);
        }
        let me = self.nodes.len();
        let Some((split, gain)) = self.best_split(&idx, &hist, me) else {
            return self.leaf(&hist);
        };
        if gain < self.cfg.min_gain {
            return self.leaf(&hist);
        }
        let (l, r): (Vec<usize>, Vec<usize>) = idx
            .iter()
            .partition(|&&i| split.goes_left(&self.set.features[i].0));
        if l.is_empty() || r.is_empty() {
            return self.leaf(&hist);
        }
        self.nodes.push(TreeNode::Leaf { dist: Vec::new() });
        let left = self.build(l, depth + 1);
        let right = self.build(r, depth + 1);
        self.nodes[me] = TreeNode::Split { split, left, right };
        me
    }

    /// Highest-gain candidate; ties resolve to the smallest (dim, threshold).
    fn best_split(
        &mut self,
        idx: &[usize],
        hist: &[usize],
        node: usize,
    ) -> Option<(SplitCandidate, f64)> {
        let mut rng = self.node_rng(node);
        let amount = self.cfg.dims_per_node.min(FEATURE_DIM);
        let mut dims = sample(&mut rng, FEATURE_DIM, amount).into_vec();
        dims.sort_unstable();

        let t = self.cfg.thresholds_per_dim;
        let m = idx.len();
        let mut best: Option<(SplitCandidate, f64)> = None;
        let mut vals: Vec<(f64, usize)> = Vec::with_capacity(m);
        let mut left = vec![0usize; self.set.n_labels];
        for dim in dims {
            vals.clear();
            vals.extend(
                idx.iter()
                    .map(|&i| (self.set.features[i][dim], self.set.labels[i])),
            );
            vals.sort_by(|a, b| a.0.total_cmp(&b.0));
            left.iter_mut().for_each(|c| *c = 0);
            let mut cursor = 0;
            for j in 1..=t {
                let pos = j as f64 / (t + 1) as f64 * (m - 1) as f64;
                let lo = pos.floor() as usize;
                let frac = pos - lo as f64;
                let tau = if lo + 1 < m {
                    vals[lo].0 + frac * (vals[lo + 1].0 - vals[lo].0)
                } else {
                    vals[lo].0
                };
                while cursor < m && vals[cursor].0 < tau {
                    left[vals[cursor].1] += 1;
                    cursor += 1;
                }
                let g = gain_from_counts(hist, &left, &mut self.scratch);
                let cand = SplitCandidate::new(dim, tau);
                let better = match best {
                    None => true,
                    Some((b, bg)) => {
                        g > bg
                            || (g == bg
                                && (dim, tau).partial_cmp(&(b.dim, b.threshold))
                                    == Some(std::cmp::Ordering::Less))
                    }
                };
                if better {
                    best = Some((cand, g));
                }
            }
        }
        best
    }
}

fn tree_seed(seed: u64, tree_index: usize) -> u64 {
    seed ^ tree_index as u64
}

/// Grows one tree on the examples in `idx` (indices into `set`, repeats allowed).
pub fn train_tree_on(
    set: &TrainingSet,
    idx: Vec<usize>,
    cfg: &ForestConfig,
    tree_index: usize,
) -> Result<DecisionTree> {
    if idx.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    cfg.validate()?;
    let mut builder = TreeBuilder {
        set,
        cfg,
        seed: tree_seed(cfg.seed, tree_index),
        nodes: Vec::new(),
        scratch: Vec::with_capacity(set.n_labels),
    };
    builder.build(idx, 1);
    Ok(DecisionTree {
        nodes: builder.nodes,
    })
}

/// Grows one tree on the full set (no resampling).
pub fn train_tree(
    set: &TrainingSet,
    cfg: &ForestConfig,
    tree_index: usize,
) -> Result<DecisionTree> {
    train_tree_on(set, (0..set.len()).collect(), cfg, tree_index)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionForest {
    trees: Vec<DecisionTree>,
    config: ForestConfig,
    n_labels: usize,
}

impl DecisionForest {
    pub fn from_trees(
        trees: Vec<DecisionTree>,
        n_labels: usize,
        config: ForestConfig,
    ) -> Result<Self> {
        if trees.is_empty() {
            return Err(Error::InvalidInput(
                "a forest needs at least one tree".into(),
            ));
        }
        for t in &trees {
            for n in &t.nodes {
                if let TreeNode::Leaf { dist } = n {
                    check_dist(dist, n_labels)?;
                }
            }
        }
        Ok(DecisionForest {
            trees,
            config,
            n_labels,
        })
    }

    pub fn trees(&self) -> &[DecisionTree] {
        &self.trees
    }

    pub fn config(&self) -> &ForestConfig {
        &self.config
    }

    pub fn n_labels(&self) -> usize {
        self.n_labels
    }

    /// Average of the leaf distributions reached in every tree.
    pub fn predict(&self, features: &[f64]) -> Vec<f64> {
        let mut acc = vec![0.0; self.n_labels];
        for t in &self.trees {
            for (a, p) in acc.iter_mut().zip(t.leaf_dist(features)) {
                *a += p;
            }
        }
        let n = self.trees.len() as f64;
        acc.iter_mut().for_each(|a| *a /= n);
        acc
    }

    /// Most probable label; ties go to the lowest label.
    pub fn predict_label(&self, features: &[f64]) -> usize {
        argmax(&self.predict(features))
    }
}

pub fn argmax(p: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}

/// Trains `cfg.trees` trees in parallel. Tree `t` depends only on
/// `(cfg.seed, t)`, so the result is independent of scheduling.
pub fn train_forest(set: &TrainingSet, cfg: &ForestConfig) -> Result<DecisionForest> {
    if set.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    cfg.validate()?;
    let n = set.len();
    let trees = (0..cfg.trees)
        .into_par_iter()
        .map(|t| {
            let idx = if cfg.bootstrap {
                let mut rng = ChaCha8Rng::seed_from_u64(tree_seed(cfg.seed, t));
                rng.set_stream(BOOTSTRAP_STREAM);
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            train_tree_on(set, idx, cfg, t)
        })
        .collect::<Result<Vec<_>>>()?;
    DecisionForest::from_trees(trees, set.n_labels, *cfg)
}
