//! Random-forest classifier built from scratch.
//!
//! Trees are grown on bootstrap replicas of the training set, splitting on
//! Gini impurity decrease with a fresh random feature subset at every node.
//! All randomness flows from one seed through per-tree counter-mode streams,
//! so training is bit-identical no matter how work is scheduled across
//! threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};
use crate::persist;

pub const FOREST_FORMAT_VERSION: u32 = 1;

/// Labelled samples in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n_features: usize,
    n_classes: usize,
    features: Vec<f64>,
    labels: Vec<usize>,
}

impl Dataset {
    /// Builds a dataset from per-sample rows. Every row must have the same
    /// length and every label must be below `n_classes`.
    pub fn from_rows(rows: &[Vec<f64>], labels: &[usize], n_classes: usize) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyInput("dataset has no samples".into()));
        }
        if rows.len() != labels.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        if n_classes < 2 {
            return Err(Error::InvalidConfig(
                "a classification dataset needs at least 2 classes".into(),
            ));
        }
        let n_features = rows[0].len();
        if n_features == 0 {
            return Err(Error::EmptyInput("rows have no features".into()));
        }
        let mut features = Vec::with_capacity(rows.len() * n_features);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != n_features {
                return Err(Error::DimensionMismatch(format!(
                    "row {i} has {} features, expected {n_features}",
                    row.len()
                )));
            }
            features.extend_from_slice(row);
        }
        for (i, &label) in labels.iter().enumerate() {
            if label >= n_classes {
                return Err(Error::DataFormat(format!(
                    "sample {i} has label {label}, valid range is 0..{n_classes}"
                )));
            }
        }
        Ok(Dataset {
            n_features,
            n_classes,
            features,
            labels: labels.to_vec(),
        })
    }

    pub fn n_samples(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Samples per class, indexed by class.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.n_classes];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// New dataset holding the given rows, in the given order. Indices may
    /// repeat.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::EmptyInput("subset selects no samples".into()));
        }
        let mut features = Vec::with_capacity(indices.len() * self.n_features);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.n_samples() {
                return Err(Error::DimensionMismatch(format!(
                    "subset index {i} out of range for {} samples",
                    self.n_samples()
                )));
            }
            features.extend_from_slice(self.row(i));
            labels.push(self.labels[i]);
        }
        Ok(Dataset {
            n_features: self.n_features,
            n_classes: self.n_classes,
            features,
            labels,
        })
    }

    /// New dataset keeping only the given feature columns, in the given
    /// order.
    pub fn select_columns(&self, columns: &[usize]) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::EmptyInput("no feature columns selected".into()));
        }
        for &c in columns {
            if c >= self.n_features {
                return Err(Error::DimensionMismatch(format!(
                    "column {c} out of range for {} features",
                    self.n_features
                )));
            }
        }
        let mut features = Vec::with_capacity(self.n_samples() * columns.len());
        for i in 0..self.n_samples() {
            let row = self.row(i);
            features.extend(columns.iter().map(|&c| row[c]));
        }
        Ok(Dataset {
            n_features: columns.len(),
            n_classes: self.n_classes,
            features,
            labels: self.labels.clone(),
        })
    }
}

/// Gini impurity of a class-count vector: `sum p * (1 - p)`.
pub fn gini(counts: &[usize]) -> f64 {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    counts
        .iter()
        .map(|&c| {
            let p = c as f64 / total as f64;
            p * (1.0 - p)
        })
        .sum()
}

/// A chosen split: samples go left when `value < threshold`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitChoice {
    pub feature: usize,
    pub threshold: f64,
    /// Impurity decrease: parent Gini minus the size-weighted child Gini.
    pub gain: f64,
}

/// Finds the best split of `indices` over the given candidate features.
///
/// Thresholds are midpoints between consecutive distinct values of a
/// feature; when rounding collapses a midpoint onto the lower value, the
/// upper value is used instead so the `< threshold` test still separates the
/// two groups. Ties on gain prefer the lowest feature index, then the lowest
/// threshold. Returns `None` when no candidate feature varies.
pub fn best_split(data: &Dataset, indices: &[usize], features: &[usize]) -> Option<SplitChoice> {
    let n = indices.len();
    if n < 2 {
        return None;
    }
    let mut parent_counts = vec![0usize; data.n_classes()];
    for &i in indices {
        parent_counts[data.label(i)] += 1;
    }
    let parent_gini = gini(&parent_counts);

    let mut best: Option<SplitChoice> = None;
    let mut ordered: Vec<(f64, usize)> = Vec::with_capacity(n);
    for &feature in features {
        ordered.clear();
        ordered.extend(
            indices
                .iter()
                .map(|&i| (data.row(i)[feature], data.label(i))),
        );
        ordered.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut left = vec![0usize; data.n_classes()];
        let mut right = parent_counts.clone();
        for i in 0..n - 1 {
            let (value, label) = ordered[i];
            left[label] += 1;
            right[label] -= 1;
            let next = ordered[i + 1].0;
            if value == next {
                continue;
            }
            let mut threshold = (value + next) / 2.0;
            if threshold <= value {
                threshold = next;
            }
            let n_left = (i + 1) as f64;
            let n_right = (n - i - 1) as f64;
            let children = (n_left * gini(&left) + n_right * gini(&right)) / n as f64;
            let gain = parent_gini - children;
            // feature and threshold iteration are both ascending, so a
            // strict improvement test yields lowest-feature, lowest-threshold
            // tie-breaking for free
            if best.map_or(true, |b| gain > b.gain) {
                best = Some(SplitChoice {
                    feature,
                    threshold,
                    gain,
                });
            }
        }
    }
    best
}

/// One node of a decision tree. Samples with `value < threshold` descend
/// left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Split {
        feature: usize,
        threshold: f64,
        /// Samples that reached this node during training.
        n_samples: usize,
        /// Impurity decrease achieved by this split.
        delta_impurity: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
    Leaf {
        class_counts: Vec<usize>,
    },
}

impl TreeNode {
    /// Class index predicted for one sample; leaf ties go to the lowest
    /// class index.
    pub fn predict(&self, sample: &[f64]) -> usize {
        match self {
            TreeNode::Split {
                feature,
                threshold,
                left,
                right,
                ..
            } => {
                if sample[*feature] < *threshold {
                    left.predict(sample)
                } else {
                    right.predict(sample)
                }
            }
            TreeNode::Leaf { class_counts } => argmax_low(class_counts),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    fn accumulate_importance(&self, root_samples: f64, acc: &mut [f64]) {
        if let TreeNode::Split {
            feature,
            n_samples,
            delta_impurity,
            left,
            right,
            ..
        } = self
        {
            acc[*feature] += (*n_samples as f64 / root_samples) * delta_impurity;
            left.accumulate_importance(root_samples, acc);
            right.accumulate_importance(root_samples, acc);
        }
    }

    fn n_samples(&self) -> usize {
        match self {
            TreeNode::Split { n_samples, .. } => *n_samples,
            TreeNode::Leaf { class_counts } => class_counts.iter().sum(),
        }
    }
}

/// Training hyper-parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    /// Candidate features per node; `None` uses `floor(sqrt(n_features))`.
    pub features_per_node: Option<usize>,
    pub min_samples_split: usize,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            n_trees: 100,
            max_depth: 7,
            features_per_node: None,
            min_samples_split: 2,
            bootstrap: true,
            seed: 0,
        }
    }
}

/// A trained forest. Equality is structural, which makes bit-identical
/// reproducibility directly testable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    n_features: usize,
    n_classes: usize,
    config: TrainConfig,
    trees: Vec<TreeNode>,
}

impl Forest {
    /// Assembles a forest from prebuilt trees; useful for stub models.
    pub fn from_trees(trees: Vec<TreeNode>, n_features: usize, n_classes: usize) -> Result<Forest> {
        if trees.is_empty() {
            return Err(Error::EmptyInput("forest needs at least one tree".into()));
        }
        if n_classes < 2 {
            return Err(Error::InvalidConfig(
                "a classifier needs at least 2 classes".into(),
            ));
        }
        let config = TrainConfig {
            n_trees: trees.len(),
            ..TrainConfig::default()
        };
        Ok(Forest {
            n_features,
            n_classes,
            config,
            trees,
        })
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn trees(&self) -> &[TreeNode] {
        &self.trees
    }

    /// Votes per class over all trees.
    pub fn votes(&self, sample: &[f64]) -> Vec<usize> {
        assert_eq!(
            sample.len(),
            self.n_features,
            "sample has {} features, model expects {}",
            sample.len(),
            self.n_features
        );
        let mut votes = vec![0usize; self.n_classes];
        for tree in &self.trees {
            votes[tree.predict(sample)] += 1;
        }
        votes
    }

    /// Majority vote; ties go to the lowest class index.
    pub fn predict(&self, sample: &[f64]) -> usize {
        argmax_low(&self.votes(sample))
    }

    /// Mean decrease in impurity per feature, over all trees, normalised to
    /// sum to 1. If no tree ever split (all-leaf forest) the zeros are
    /// returned as-is.
    pub fn feature_importance(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.n_features];
        for tree in &self.trees {
            let root = tree.n_samples();
            if root > 0 {
                tree.accumulate_importance(root as f64, &mut acc);
            }
        }
        for v in &mut acc {
            *v /= self.trees.len() as f64;
        }
        let total: f64 = acc.iter().sum();
        if total > 0.0 {
            for v in &mut acc {
                *v /= total;
            }
        }
        acc
    }

    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        persist::save_json(path.as_ref(), "random_forest", FOREST_FORMAT_VERSION, self)
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<Forest> {
        persist::load_json(path.as_ref(), "random_forest", FOREST_FORMAT_VERSION)
    }
}

/// Index of the maximum; the first (lowest) index wins ties.
fn argmax_low<T: PartialOrd>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// `k` distinct values from `0..n`, ascending.
fn sample_features(rng: &mut ChaCha12Rng, n: usize, k: usize) -> Vec<usize> {
    debug_assert!(k <= n);
    // partial Fisher-Yates on an index pool
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = rng.gen_range(i..n);
        pool.swap(i, j);
    }
    let mut chosen = pool[..k].to_vec();
    chosen.sort_unstable();
    chosen
}

fn grow(
    data: &Dataset,
    indices: &[usize],
    depth: usize,
    features_per_node: usize,
    cfg: &TrainConfig,
    rng: &mut ChaCha12Rng,
) -> TreeNode {
    let mut counts = vec![0usize; data.n_classes()];
    for &i in indices {
        counts[data.label(i)] += 1;
    }
    let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
    if depth >= cfg.max_depth || indices.len() < cfg.min_samples_split || pure {
        return TreeNode::Leaf {
            class_counts: counts,
        };
    }

    let candidates = sample_features(rng, data.n_features(), features_per_node);
    let split = match best_split(data, indices, &candidates) {
        Some(s) if s.gain > 0.0 => s,
        _ => {
            return TreeNode::Leaf {
                class_counts: counts,
            }
        }
    };

    let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = indices
        .iter()
        .partition(|&&i| data.row(i)[split.feature] < split.threshold);
    debug_assert!(!left_idx.is_empty() && !right_idx.is_empty());

    let left = grow(data, &left_idx, depth + 1, features_per_node, cfg, rng);
    let right = grow(data, &right_idx, depth + 1, features_per_node, cfg, rng);
    TreeNode::Split {
        feature: split.feature,
        threshold: split.threshold,
        n_samples: indices.len(),
        delta_impurity: split.gain,
        left: Box::new(left),
        right: Box::new(right),
    }
}

/// Trains a forest. Trees are independent: tree `t` draws its bootstrap
/// sample and node feature subsets from stream `t` of the seeded generator,
/// so results do not depend on thread count or scheduling.
pub fn train_forest(data: &Dataset, cfg: &TrainConfig) -> Result<Forest> {
    if cfg.n_trees == 0 {
        return Err(Error::InvalidConfig("n_trees must be at least 1".into()));
    }
    if cfg.max_depth == 0 {
        return Err(Error::InvalidConfig("max_depth must be at least 1".into()));
    }
    if data.class_counts().iter().filter(|&&c| c > 0).count() < 2 {
        return Err(Error::SingleClass);
    }
    let features_per_node = match cfg.features_per_node {
        Some(k) if k == 0 => {
            return Err(Error::InvalidConfig(
                "features_per_node must be at least 1".into(),
            ))
        }
        Some(k) => k.min(data.n_features()),
        None => ((data.n_features() as f64).sqrt().floor() as usize).max(1),
    };

    let n = data.n_samples();
    let trees: Vec<TreeNode> = (0..cfg.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
            rng.set_stream(t as u64);
            let indices: Vec<usize> = if cfg.bootstrap {
                (0..n).map(|_| rng.gen_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            grow(data, &indices, 0, features_per_node, cfg, &mut rng)
        })
        .collect();

    Ok(Forest {
        n_features: data.n_features(),
        n_classes: data.n_classes(),
        config: cfg.clone(),
        trees,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;

    fn two_blob_dataset(n_per_class: usize, n_features: usize, seed: u64) -> Dataset {
        // class 0 around 0.0, class 1 around 1.0, noise well below the gap
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for class in 0..2usize {
            for _ in 0..n_per_class {
                let center = class as f64;
                rows.push(
                    (0..n_features)
                        .map(|_| center + rng.gen_range(-0.3..0.3))
                        .collect(),
                );
                labels.push(class);
            }
        }
        Dataset::from_rows(&rows, &labels, 2).unwrap()
    }

    #[test]
    fn gini_matches_hand_values() {
        assert_relative_eq!(gini(&[10, 0]), 0.0);
        assert_relative_eq!(gini(&[5, 5]), 0.5);
        assert_relative_eq!(gini(&[1, 3]), 0.375);
        assert_relative_eq!(gini(&[2, 2, 2]), 2.0 / 3.0);
        assert_relative_eq!(gini(&[]), 0.0);
    }

    #[test]
    fn best_split_on_separable_feature() {
        let rows = vec![vec![1.0], vec![2.0], vec![3.0], vec![4.0]];
        let data = Dataset::from_rows(&rows, &[0, 0, 1, 1], 2).unwrap();
        let s = best_split(&data, &[0, 1, 2, 3], &[0]).unwrap();
        assert_eq!(s.feature, 0);
        assert_relative_eq!(s.threshold, 2.5);
        assert_relative_eq!(s.gain, 0.5);
    }

    #[test]
    fn best_split_prefers_lowest_feature_on_ties() {
        // both features separate perfectly; feature 0 must win
        let rows = vec![vec![0.0, 0.0], vec![0.0, 0.0], vec![1.0, 1.0], vec![1.0, 1.0]];
        let data = Dataset::from_rows(&rows, &[0, 0, 1, 1], 2).unwrap();
        let s = best_split(&data, &[0, 1, 2, 3], &[0, 1]).unwrap();
        assert_eq!(s.feature, 0);
    }

    #[test]
    fn best_split_none_when_nothing_varies() {
        let rows = vec![vec![3.0], vec![3.0], vec![3.0]];
        let data = Dataset::from_rows(&rows, &[0, 1, 0], 2).unwrap();
        assert!(best_split(&data, &[0, 1, 2], &[0]).is_none());
    }

    #[test]
    fn midpoint_falls_back_to_upper_value() {
        let lo = 1.0f64;
        let hi = 1.0f64 + f64::EPSILON;
        // true midpoint rounds back onto lo, so the split must use hi
        let rows = vec![vec![lo], vec![lo], vec![hi], vec![hi]];
        let data = Dataset::from_rows(&rows, &[0, 0, 1, 1], 2).unwrap();
        let s = best_split(&data, &[0, 1, 2, 3], &[0]).unwrap();
        assert_eq!(s.threshold, hi);
        assert!(lo < s.threshold);
        assert_relative_eq!(s.gain, 0.5);
    }

    /// Independent oracle: evaluates every (feature, boundary) pair with its
    /// own impurity code and the same tie rules.
    fn oracle_split(data: &Dataset, indices: &[usize], features: &[usize]) -> Option<SplitChoice> {
        fn impurity(labels: &[usize], n_classes: usize) -> f64 {
            let mut counts = vec![0usize; n_classes];
            for &l in labels {
                counts[l] += 1;
            }
            let n = labels.len() as f64;
            1.0 - counts.iter().map(|&c| (c as f64 / n).powi(2)).sum::<f64>()
        }
        let parent: Vec<usize> = indices.iter().map(|&i| data.label(i)).collect();
        let parent_gini = impurity(&parent, data.n_classes());
        let mut best: Option<SplitChoice> = None;
        for &f in features {
            let mut values: Vec<f64> = indices.iter().map(|&i| data.row(i)[f]).collect();
            values.sort_by(f64::total_cmp);
            values.dedup();
            for w in values.windows(2) {
                let mut t = (w[0] + w[1]) / 2.0;
                if t <= w[0] {
                    t = w[1];
                }
                let left: Vec<usize> = indices
                    .iter()
                    .filter(|&&i| data.row(i)[f] < t)
                    .map(|&i| data.label(i))
                    .collect();
                let right: Vec<usize> = indices
                    .iter()
                    .filter(|&&i| data.row(i)[f] >= t)
                    .map(|&i| data.label(i))
                    .collect();
                let weighted = (left.len() as f64 * impurity(&left, data.n_classes())
                    + right.len() as f64 * impurity(&right, data.n_classes()))
                    / indices.len() as f64;
                let gain = parent_gini - weighted;
                let better = match best {
                    None => true,
                    Some(b) => {
                        gain > b.gain
                            || (gain == b.gain
                                && (f < b.feature || (f == b.feature && t < b.threshold)))
                    }
                };
                if better {
                    best = Some(SplitChoice {
                        feature: f,
                        threshold: t,
                        gain,
                    });
                }
            }
        }
        best
    }

    #[test]
    fn best_split_matches_exhaustive_oracle() {
        let mut rng = ChaCha12Rng::seed_from_u64(99);
        for trial in 0..20 {
            let n = rng.gen_range(5..40);
            let nf = rng.gen_range(1..6);
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..nf).map(|_| rng.gen_range(0.0..10.0)).collect())
                .collect();
            let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..3)).collect();
            // labels may collapse to fewer classes; that's fine for splitting
            let data = Dataset::from_rows(&rows, &labels, 3).unwrap();
            let indices: Vec<usize> = (0..n).collect();
            let features: Vec<usize> = (0..nf).collect();
            let got = best_split(&data, &indices, &features);
            let want = oracle_split(&data, &indices, &features);
            match (got, want) {
                (Some(g), Some(w)) => {
                    assert_eq!(g.feature, w.feature, "trial {trial}");
                    assert_eq!(g.threshold, w.threshold, "trial {trial}");
                    assert_relative_eq!(g.gain, w.gain, epsilon = 1e-12);
                }
                (g, w) => assert_eq!(g.is_some(), w.is_some(), "trial {trial}"),
            }
        }
    }

    #[test]
    fn single_class_is_rejected() {
        let rows = vec![vec![1.0], vec![2.0]];
        let data = Dataset::from_rows(&rows, &[0, 0], 2).unwrap();
        assert!(matches!(
            train_forest(&data, &TrainConfig::default()),
            Err(Error::SingleClass)
        ));
    }

    #[test]
    fn empty_dataset_is_rejected() {
        assert!(matches!(
            Dataset::from_rows(&[], &[], 2),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn same_seed_reproduces_the_forest_exactly() {
        let data = two_blob_dataset(40, 6, 7);
        let cfg = TrainConfig {
            n_trees: 25,
            seed: 123,
            ..TrainConfig::default()
        };
        let a = train_forest(&data, &cfg).unwrap();
        let b = train_forest(&data, &cfg).unwrap();
        assert_eq!(a, b);

        let c = train_forest(
            &data,
            &TrainConfig {
                seed: 124,
                ..cfg.clone()
            },
        )
        .unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn unbounded_tree_memorizes_distinct_samples() {
        let mut rng = ChaCha12Rng::seed_from_u64(42);
        let rows: Vec<Vec<f64>> = (0..64)
            .map(|_| (0..3).map(|_| rng.gen_range(0.0..1.0)).collect())
            .collect();
        let labels: Vec<usize> = (0..64).map(|_| rng.gen_range(0..2)).collect();
        let data = Dataset::from_rows(&rows, &labels, 2).unwrap();
        let cfg = TrainConfig {
            n_trees: 1,
            max_depth: 64,
            features_per_node: Some(3),
            bootstrap: false,
            seed: 0,
            ..TrainConfig::default()
        };
        let forest = train_forest(&data, &cfg).unwrap();
        for i in 0..data.n_samples() {
            assert_eq!(forest.predict(data.row(i)), data.label(i), "sample {i}");
        }
    }

    #[test]
    fn depth_limit_is_respected() {
        let data = two_blob_dataset(50, 4, 3);
        let cfg = TrainConfig {
            n_trees: 10,
            max_depth: 3,
            seed: 5,
            ..TrainConfig::default()
        };
        let forest = train_forest(&data, &cfg).unwrap();
        for tree in forest.trees() {
            assert!(tree.depth() <= 3);
        }
    }

    #[test]
    fn vote_ties_pick_the_lowest_class() {
        let forest = Forest {
            n_features: 1,
            n_classes: 2,
            config: TrainConfig::default(),
            trees: vec![
                TreeNode::Leaf {
                    class_counts: vec![3, 1],
                },
                TreeNode::Leaf {
                    class_counts: vec![1, 3],
                },
            ],
        };
        assert_eq!(forest.votes(&[0.0]), vec![1, 1]);
        assert_eq!(forest.predict(&[0.0]), 0);
    }

    #[test]
    fn leaf_count_ties_pick_the_lowest_class() {
        let leaf = TreeNode::Leaf {
            class_counts: vec![2, 2, 1],
        };
        assert_eq!(leaf.predict(&[0.0]), 0);
    }

    #[test]
    fn importance_finds_the_informative_feature() {
        // only feature 2 carries signal
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..200 {
            let label = rng.gen_range(0..2usize);
            let row = vec![
                rng.gen_range(0.0..1.0),
                rng.gen_range(0.0..1.0),
                label as f64 + rng.gen_range(-0.2..0.2),
                rng.gen_range(0.0..1.0),
            ];
            rows.push(row);
            labels.push(label);
        }
        let data = Dataset::from_rows(&rows, &labels, 2).unwrap();
        let cfg = TrainConfig {
            n_trees: 30,
            seed: 2,
            ..TrainConfig::default()
        };
        let forest = train_forest(&data, &cfg).unwrap();
        let imp = forest.feature_importance();
        assert_relative_eq!(imp.iter().sum::<f64>(), 1.0, epsilon = 1e-9);
        assert_eq!(
            imp.iter()
                .enumerate()
                .max_by(|a, b| a.1.total_cmp(b.1))
                .unwrap()
                .0,
            2
        );
        assert!(imp[2] > 0.5, "importance of the signal feature: {}", imp[2]);
    }

    #[test]
    fn save_load_round_trips_exactly() {
        let data = two_blob_dataset(30, 4, 1);
        let cfg = TrainConfig {
            n_trees: 8,
            seed: 9,
            ..TrainConfig::default()
        };
        let forest = train_forest(&data, &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        forest.save(&path).unwrap();
        let loaded = Forest::load(&path).unwrap();
        assert_eq!(forest, loaded);
    }

    #[test]
    fn wrong_format_version_is_rejected() {
        let data = two_blob_dataset(10, 2, 1);
        let cfg = TrainConfig {
            n_trees: 2,
            ..TrainConfig::default()
        };
        let forest = train_forest(&data, &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        forest.save(&path).unwrap();
        let text = std::fs::read_to_string(&path)
            .unwrap()
            .replace("\"format_version\":1", "\"format_version\":99");
        std::fs::write(&path, text).unwrap();
        match Forest::load(&path) {
            Err(Error::ModelVersion { found, expected }) => {
                assert_eq!(found, 99);
                assert_eq!(expected, FOREST_FORMAT_VERSION);
            }
            other => panic!("expected a version error, got {other:?}"),
        }
    }

    #[test]
    fn wrong_kind_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        std::fs::write(
            &path,
            r#"{"kind":"something_else","format_version":1,"data":{}}"#,
        )
        .unwrap();
        assert!(matches!(Forest::load(&path), Err(Error::DataFormat(_))));
    }

    #[test]
    fn blobs_are_classified_well() {
        let train = two_blob_dataset(60, 5, 21);
        let test = two_blob_dataset(40, 5, 22);
        let cfg = TrainConfig {
            n_trees: 40,
            seed: 3,
            ..TrainConfig::default()
        };
        let forest = train_forest(&train, &cfg).unwrap();
        let correct = (0..test.n_samples())
            .filter(|&i| forest.predict(test.row(i)) == test.label(i))
            .count();
        assert!(correct as f64 / test.n_samples() as f64 > 0.95);
    }

    #[test]
    fn column_selection_projects_rows() {
        let rows = vec![vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]];
        let data = Dataset::from_rows(&rows, &[0, 1], 2).unwrap();
        let proj = data.select_columns(&[2, 0]).unwrap();
        assert_eq!(proj.row(0), &[3.0, 1.0]);
        assert_eq!(proj.row(1), &[6.0, 4.0]);
        assert_eq!(proj.labels(), data.labels());
    }

    #[test]
    fn subset_keeps_order_and_allows_repeats() {
        let rows = vec![vec![1.0], vec![2.0], vec![3.0]];
        let data = Dataset::from_rows(&rows, &[0, 1, 0], 2).unwrap();
        let sub = data.subset(&[2, 0, 2]).unwrap();
        assert_eq!(sub.row(0), &[3.0]);
        assert_eq!(sub.row(1), &[1.0]);
        assert_eq!(sub.row(2), &[3.0]);
        assert_eq!(sub.labels(), &[0, 0, 0]);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn predictions_are_valid_classes(
            seed in 0u64..1000,
            n in 6usize..40,
            nf in 1usize..5,
        ) {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..nf).map(|_| rng.gen_range(0.0..1.0)).collect())
                .collect();
            let mut labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..2)).collect();
            labels[0] = 0;
            labels[1] = 1; // guarantee two classes
            let data = Dataset::from_rows(&rows, &labels, 2).unwrap();
            let cfg = TrainConfig { n_trees: 5, seed, ..TrainConfig::default() };
            let forest = train_forest(&data, &cfg).unwrap();
            for i in 0..n {
                prop_assert!(forest.predict(data.row(i)) < 2);
            }
            let imp = forest.feature_importance();
            let total: f64 = imp.iter().sum();
            prop_assert!(total == 0.0 || (total - 1.0).abs() < 1e-9);
        }
    }
}
