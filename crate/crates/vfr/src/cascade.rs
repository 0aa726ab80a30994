//! Two-stage frame-rate classifier.
//!
//! Stage one separates "the full 120 fps is needed" from "some reduction is
//! acceptable"; stage two, consulted only after a reduction verdict, decides
//! between 60 and 30 fps. Vote ties inside either forest resolve toward the
//! higher frame rate, because over-estimating the needed rate only costs
//! bits while under-estimating it costs visible quality.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};
use crate::features::FeatureRecord;
use crate::forest::{train_forest, Dataset, Forest, TrainConfig};
use crate::persist;
use crate::rate::FrameRate;

pub const CASCADE_FORMAT_VERSION: u32 = 1;

/// Stage-one class names, by class index.
pub const CLF1_CLASSES: [&str; 2] = ["120fps", "FD"];
/// Stage-two class names, by class index.
pub const CLF2_CLASSES: [&str; 2] = ["60fps", "30fps"];

/// The balanced binary training sets for the two stages, with the indices of
/// the source samples they were drawn from (ascending, so original temporal
/// order survives the subsampling).
#[derive(Debug, Clone, PartialEq)]
pub struct BalancedSets {
    /// "120fps" (class 0) vs "FD" (class 1).
    pub ds1: Dataset,
    pub ds1_indices: Vec<usize>,
    /// "60fps" (class 0) vs "30fps" (class 1).
    pub ds2: Dataset,
    pub ds2_indices: Vec<usize>,
}

/// `k` distinct positions of `pool`, returned in ascending order.
fn sample_sorted(rng: &mut ChaCha12Rng, pool: &[usize], k: usize) -> Vec<usize> {
    debug_assert!(k <= pool.len());
    if k == pool.len() {
        return pool.to_vec();
    }
    let mut scratch: Vec<usize> = pool.to_vec();
    for i in 0..k {
        let j = rng.gen_range(i..scratch.len());
        scratch.swap(i, j);
    }
    let mut chosen = scratch[..k].to_vec();
    chosen.sort_unstable();
    chosen
}

/// Builds the two balanced training sets by undersampling, never by
/// duplication.
///
/// Set one pits every 120 fps sample against an equally sized pool of
/// reduced-rate samples: all 30 fps samples first, topped up with a random
/// 60 fps subset. If the 30 fps samples alone already cover the quota (or
/// the 120 fps side itself outnumbers all reduced samples), the surplus side
/// is subsampled instead. Set two pairs the 30 and 60 fps samples,
/// subsampling the larger class to the smaller one's size.
pub fn build_training_sets(
    features: &[Vec<f64>],
    labels: &[FrameRate],
    seed: u64,
) -> Result<BalancedSets> {
    if features.len() != labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} feature rows but {} labels",
            features.len(),
            labels.len()
        )));
    }
    let mut by_class: [Vec<usize>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for (i, &label) in labels.iter().enumerate() {
        let slot = match label {
            FrameRate::F30 => 0,
            FrameRate::F60 => 1,
            FrameRate::F120 => 2,
        };
        by_class[slot].push(i);
    }
    for (slot, name) in ["30fps", "60fps", "120fps"].iter().enumerate() {
        if by_class[slot].is_empty() {
            return Err(Error::MissingClass(name.to_string()));
        }
    }
    let [idx30, idx60, idx120] = by_class;

    // stage one: 120fps vs FD
    let mut rng1 = ChaCha12Rng::seed_from_u64(seed);
    rng1.set_stream(1);
    let target1 = idx120.len().min(idx30.len() + idx60.len());
    let side120 = sample_sorted(&mut rng1, &idx120, target1);
    let n30 = idx30.len().min(target1);
    let n60 = target1 - n30;
    let mut side_fd = sample_sorted(&mut rng1, &idx30, n30);
    side_fd.extend(sample_sorted(&mut rng1, &idx60, n60));
    side_fd.sort_unstable();

    let mut ds1_indices: Vec<usize> = side120.iter().chain(&side_fd).copied().collect();
    ds1_indices.sort_unstable();
    let ds1_rows: Vec<Vec<f64>> = ds1_indices.iter().map(|&i| features[i].clone()).collect();
    let ds1_labels: Vec<usize> = ds1_indices
        .iter()
        .map(|&i| usize::from(labels[i] != FrameRate::F120))
        .collect();
    let ds1 = Dataset::from_rows(&ds1_rows, &ds1_labels, 2)?;

    // stage two: 60fps vs 30fps
    let mut rng2 = ChaCha12Rng::seed_from_u64(seed);
    rng2.set_stream(2);
    let target2 = idx30.len().min(idx60.len());
    let side30 = sample_sorted(&mut rng2, &idx30, target2);
    let side60 = sample_sorted(&mut rng2, &idx60, target2);

    let mut ds2_indices: Vec<usize> = side30.iter().chain(&side60).copied().collect();
    ds2_indices.sort_unstable();
    let ds2_rows: Vec<Vec<f64>> = ds2_indices.iter().map(|&i| features[i].clone()).collect();
    let ds2_labels: Vec<usize> = ds2_indices
        .iter()
        .map(|&i| usize::from(labels[i] == FrameRate::F30))
        .collect();
    let ds2 = Dataset::from_rows(&ds2_rows, &ds2_labels, 2)?;

    Ok(BalancedSets {
        ds1,
        ds1_indices,
        ds2,
        ds2_indices,
    })
}

/// Hyper-parameters for training the cascade. Forest defaults follow the
/// reference setup: 200 depth-7 trees for stage one, 100 for stage two.
/// `seed` drives the balancing subsample; the forests use their own seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CascadeTrainConfig {
    pub seed: u64,
    pub forest1: TrainConfig,
    pub forest2: TrainConfig,
    /// Feature columns fed to stage one (indices into the input vector).
    pub features1: Vec<usize>,
    /// Feature columns fed to stage two.
    pub features2: Vec<usize>,
}

impl Default for CascadeTrainConfig {
    fn default() -> Self {
        let all: Vec<usize> = (0..crate::features::FEATURE_COUNT).collect();
        CascadeTrainConfig {
            seed: 0,
            forest1: TrainConfig {
                n_trees: 200,
                max_depth: 7,
                seed: 1,
                ..TrainConfig::default()
            },
            forest2: TrainConfig {
                n_trees: 100,
                max_depth: 7,
                seed: 2,
                ..TrainConfig::default()
            },
            features1: all.clone(),
            features2: all,
        }
    }
}

impl CascadeTrainConfig {
    /// Derives every internal seed from one master seed.
    pub fn with_seed(seed: u64) -> Self {
        let mut cfg = CascadeTrainConfig::default();
        cfg.seed = seed;
        cfg.forest1.seed = seed.wrapping_add(1);
        cfg.forest2.seed = seed.wrapping_add(2);
        cfg
    }
}

/// The trained two-stage model. Prediction projects the full feature vector
/// onto each stage's column subset, so the stages may use different features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CascadeModel {
    input_dim: usize,
    clf1_features: Vec<usize>,
    clf1: Forest,
    clf2_features: Vec<usize>,
    clf2: Forest,
}

impl CascadeModel {
    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn clf1(&self) -> &Forest {
        &self.clf1
    }

    pub fn clf2(&self) -> &Forest {
        &self.clf2
    }

    pub fn clf1_features(&self) -> &[usize] {
        &self.clf1_features
    }

    pub fn clf2_features(&self) -> &[usize] {
        &self.clf2_features
    }

    /// Builds a cascade from two already-trained binary forests.
    pub fn from_parts(
        input_dim: usize,
        clf1: Forest,
        clf1_features: Vec<usize>,
        clf2: Forest,
        clf2_features: Vec<usize>,
    ) -> Result<CascadeModel> {
        validate_columns(&clf1_features, input_dim)?;
        validate_columns(&clf2_features, input_dim)?;
        for (forest, cols, name) in [(&clf1, &clf1_features, "one"), (&clf2, &clf2_features, "two")]
        {
            if forest.n_classes() != 2 {
                return Err(Error::InvalidConfig(format!(
                    "stage {name} must be binary, has {} classes",
                    forest.n_classes()
                )));
            }
            if forest.n_features() != cols.len() {
                return Err(Error::DimensionMismatch(format!(
                    "stage {name} expects {} features but {} columns are mapped",
                    forest.n_features(),
                    cols.len()
                )));
            }
        }
        Ok(CascadeModel {
            input_dim,
            clf1_features,
            clf1,
            clf2_features,
            clf2,
        })
    }

    /// Predicted rate for one feature vector.
    pub fn predict_chunk(&self, features: &[f64]) -> FrameRate {
        self.predict_chunk_traced(features).0
    }

    /// Predicted rate plus whether stage two was consulted. Stage two runs
    /// only when stage one rules out 120 fps.
    pub fn predict_chunk_traced(&self, features: &[f64]) -> (FrameRate, bool) {
        assert_eq!(
            features.len(),
            self.input_dim,
            "feature vector has {} values, model expects {}",
            features.len(),
            self.input_dim
        );
        let v1: Vec<f64> = self.clf1_features.iter().map(|&i| features[i]).collect();
        if self.clf1.predict(&v1) == 0 {
            return (FrameRate::F120, false);
        }
        let v2: Vec<f64> = self.clf2_features.iter().map(|&i| features[i]).collect();
        let rate = if self.clf2.predict(&v2) == 0 {
            FrameRate::F60
        } else {
            FrameRate::F30
        };
        (rate, true)
    }

    pub fn save<P: AsRef<Path>>(&self, path: P) -> Result<()> {
        persist::save_json(path.as_ref(), "vfr_cascade", CASCADE_FORMAT_VERSION, self)
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<CascadeModel> {
        persist::load_json(path.as_ref(), "vfr_cascade", CASCADE_FORMAT_VERSION)
    }
}

fn validate_columns(columns: &[usize], input_dim: usize) -> Result<()> {
    if columns.is_empty() {
        return Err(Error::InvalidConfig("empty feature subset".into()));
    }
    let mut seen = vec![false; input_dim];
    for &c in columns {
        if c >= input_dim {
            return Err(Error::DimensionMismatch(format!(
                "feature column {c} out of range for {input_dim} inputs"
            )));
        }
        if seen[c] {
            return Err(Error::InvalidConfig(format!(
                "feature column {c} listed twice"
            )));
        }
        seen[c] = true;
    }
    Ok(())
}

/// Trains both stages on balanced subsets of the labelled samples.
pub fn train_cascade(
    features: &[Vec<f64>],
    labels: &[FrameRate],
    cfg: &CascadeTrainConfig,
) -> Result<CascadeModel> {
    if features.is_empty() {
        return Err(Error::EmptyInput("no training samples".into()));
    }
    let input_dim = features[0].len();
    validate_columns(&cfg.features1, input_dim)?;
    validate_columns(&cfg.features2, input_dim)?;

    let sets = build_training_sets(features, labels, cfg.seed)?;
    let clf1 = train_forest(&sets.ds1.select_columns(&cfg.features1)?, &cfg.forest1)?;
    let clf2 = train_forest(&sets.ds2.select_columns(&cfg.features2)?, &cfg.forest2)?;
    CascadeModel::from_parts(
        input_dim,
        clf1,
        cfg.features1.clone(),
        clf2,
        cfg.features2.clone(),
    )
}

/// Splits labelled records into training rows and rates; every record must
/// carry a label and the same number of features.
pub fn training_data_from_records(
    records: &[FeatureRecord],
) -> Result<(Vec<Vec<f64>>, Vec<FrameRate>)> {
    if records.is_empty() {
        return Err(Error::EmptyInput("no feature records".into()));
    }
    let dim = records[0].features.len();
    let mut rows = Vec::with_capacity(records.len());
    let mut labels = Vec::with_capacity(records.len());
    for r in records {
        if r.features.len() != dim {
            return Err(Error::DimensionMismatch(format!(
                "chunk {} has {} features, expected {dim}",
                r.chunk_index,
                r.features.len()
            )));
        }
        let label = r.label.ok_or_else(|| {
            Error::DataFormat(format!("chunk {} has no label", r.chunk_index))
        })?;
        rows.push(r.features.clone());
        labels.push(label);
    }
    Ok((rows, labels))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forest::TreeNode;

    /// Synthetic labelled rows: one informative feature per class boundary.
    /// Feature 0 separates 120 fps (high values); feature 1 separates 30
    /// from 60 fps.
    fn labelled_rows(n30: usize, n60: usize, n120: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<FrameRate>) {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        let mut push = |label: FrameRate, rng: &mut ChaCha12Rng| {
            let (f0, f1) = match label {
                FrameRate::F120 => (5.0, 0.0),
                FrameRate::F60 => (0.0, 2.0),
                FrameRate::F30 => (0.0, 0.0),
            };
            rows.push(vec![
                f0 + rng.gen_range(-0.5..0.5),
                f1 + rng.gen_range(-0.5..0.5),
            ]);
            labels.push(label);
        };
        // interleave so the classes are spread through the sequence
        let total = n30 + n60 + n120;
        let (mut c30, mut c60, mut c120) = (0, 0, 0);
        for i in 0..total {
            let pick = match i % 3 {
                0 if c30 < n30 => FrameRate::F30,
                1 if c60 < n60 => FrameRate::F60,
                2 if c120 < n120 => FrameRate::F120,
                _ if c30 < n30 => FrameRate::F30,
                _ if c60 < n60 => FrameRate::F60,
                _ => FrameRate::F120,
            };
            match pick {
                FrameRate::F30 => c30 += 1,
                FrameRate::F60 => c60 += 1,
                FrameRate::F120 => c120 += 1,
            }
            push(pick, &mut rng);
        }
        (rows, labels)
    }

    #[test]
    fn reference_counts_balance_exactly() {
        let (rows, labels) = labelled_rows(3749, 22327, 19996, 1);
        let sets = build_training_sets(&rows, &labels, 0).unwrap();

        assert_eq!(sets.ds1.n_samples(), 2 * 19996);
        assert_eq!(sets.ds1.class_counts(), vec![19996, 19996]);
        let fd_30 = sets
            .ds1_indices
            .iter()
            .filter(|&&i| labels[i] == FrameRate::F30)
            .count();
        let fd_60 = sets
            .ds1_indices
            .iter()
            .filter(|&&i| labels[i] == FrameRate::F60)
            .count();
        assert_eq!(fd_30, 3749);
        assert_eq!(fd_60, 16247);

        assert_eq!(sets.ds2.n_samples(), 2 * 3749);
        assert_eq!(sets.ds2.class_counts(), vec![3749, 3749]);
        assert!(sets
            .ds2_indices
            .iter()
            .all(|&i| labels[i] != FrameRate::F120));
    }

    #[test]
    fn equal_counts_need_no_sampling() {
        let (rows, labels) = labelled_rows(10, 10, 10, 2);
        let sets = build_training_sets(&rows, &labels, 0).unwrap();
        assert_eq!(sets.ds1.class_counts(), vec![10, 10]);
        // the FD side is all ten 30 fps samples, no 60 fps at all
        let fd_60 = sets
            .ds1_indices
            .iter()
            .filter(|&&i| labels[i] == FrameRate::F60)
            .count();
        assert_eq!(fd_60, 0);
        assert_eq!(sets.ds2.class_counts(), vec![10, 10]);
    }

    #[test]
    fn missing_class_is_an_error() {
        let (rows, mut labels) = labelled_rows(5, 10, 10, 3);
        for l in labels.iter_mut() {
            if *l == FrameRate::F30 {
                *l = FrameRate::F60;
            }
        }
        assert!(matches!(
            build_training_sets(&rows, &labels, 0),
            Err(Error::MissingClass(name)) if name == "30fps"
        ));
    }

    #[test]
    fn surplus_low_rate_class_is_subsampled() {
        // more 30 fps samples than 120 fps: the FD side uses 30 fps only
        let (rows, labels) = labelled_rows(20, 15, 10, 4);
        let sets = build_training_sets(&rows, &labels, 0).unwrap();
        assert_eq!(sets.ds1.class_counts(), vec![10, 10]);
        let fd_60 = sets
            .ds1_indices
            .iter()
            .filter(|&&i| labels[i] == FrameRate::F60)
            .count();
        assert_eq!(fd_60, 0);
        // and ds2 subsamples the 30 fps class down to the 60 fps count
        assert_eq!(sets.ds2.class_counts(), vec![15, 15]);
    }

    #[test]
    fn balancing_is_seed_deterministic() {
        let (rows, labels) = labelled_rows(50, 80, 60, 5);
        let a = build_training_sets(&rows, &labels, 7).unwrap();
        let b = build_training_sets(&rows, &labels, 7).unwrap();
        assert_eq!(a, b);
        let c = build_training_sets(&rows, &labels, 8).unwrap();
        assert_ne!(a.ds1_indices, c.ds1_indices);
    }

    #[test]
    fn selected_indices_are_sorted_and_unique() {
        let (rows, labels) = labelled_rows(50, 80, 60, 6);
        let sets = build_training_sets(&rows, &labels, 3).unwrap();
        for indices in [&sets.ds1_indices, &sets.ds2_indices] {
            assert!(indices.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn short_circuit_skips_stage_two() {
        let (rows, labels) = labelled_rows(60, 60, 60, 7);
        let cfg = CascadeTrainConfig {
            forest1: TrainConfig {
                n_trees: 20,
                seed: 1,
                ..TrainConfig::default()
            },
            forest2: TrainConfig {
                n_trees: 20,
                seed: 2,
                ..TrainConfig::default()
            },
            features1: vec![0, 1],
            features2: vec![0, 1],
            seed: 0,
        };
        let model = train_cascade(&rows, &labels, &cfg).unwrap();

        let (rate, used2) = model.predict_chunk_traced(&[5.0, 0.0]);
        assert_eq!(rate, FrameRate::F120);
        assert!(!used2, "stage two must not run on a 120 fps verdict");

        let (rate, used2) = model.predict_chunk_traced(&[0.0, 2.0]);
        assert_eq!(rate, FrameRate::F60);
        assert!(used2);

        let (rate, used2) = model.predict_chunk_traced(&[0.0, 0.0]);
        assert_eq!(rate, FrameRate::F30);
        assert!(used2);
    }

    #[test]
    fn vote_ties_resolve_to_the_higher_rate() {
        // two leaf-only trees voting opposite classes: a guaranteed tie
        let tied = |n_features| {
            Forest::from_trees(
                vec![
                    TreeNode::Leaf {
                        class_counts: vec![1, 0],
                    },
                    TreeNode::Leaf {
                        class_counts: vec![0, 1],
                    },
                ],
                n_features,
                2,
            )
            .unwrap()
        };
        let model =
            CascadeModel::from_parts(2, tied(1), vec![0], tied(1), vec![1]).unwrap();
        // clf1 ties -> class 0 -> 120 fps, stage two untouched
        let (rate, used2) = model.predict_chunk_traced(&[0.0, 0.0]);
        assert_eq!(rate, FrameRate::F120);
        assert!(!used2);
    }

    #[test]
    fn stage_two_tie_prefers_60fps() {
        let decisive_fd = Forest::from_trees(
            vec![TreeNode::Leaf {
                class_counts: vec![0, 5],
            }],
            1,
            2,
        )
        .unwrap();
        let tied = Forest::from_trees(
            vec![
                TreeNode::Leaf {
                    class_counts: vec![1, 0],
                },
                TreeNode::Leaf {
                    class_counts: vec![0, 1],
                },
            ],
            1,
            2,
        )
        .unwrap();
        let model = CascadeModel::from_parts(2, decisive_fd, vec![0], tied, vec![1]).unwrap();
        let (rate, used2) = model.predict_chunk_traced(&[0.0, 0.0]);
        assert_eq!(rate, FrameRate::F60);
        assert!(used2);
    }

    #[test]
    fn training_is_reproducible() {
        let (rows, labels) = labelled_rows(40, 40, 40, 8);
        let cfg = CascadeTrainConfig {
            forest1: TrainConfig {
                n_trees: 10,
                seed: 3,
                ..TrainConfig::default()
            },
            forest2: TrainConfig {
                n_trees: 10,
                seed: 4,
                ..TrainConfig::default()
            },
            features1: vec![0, 1],
            features2: vec![0, 1],
            seed: 5,
        };
        let a = train_cascade(&rows, &labels, &cfg).unwrap();
        let b = train_cascade(&rows, &labels, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn cascade_separates_synthetic_classes() {
        let (rows, labels) = labelled_rows(80, 80, 80, 9);
        let cfg = CascadeTrainConfig {
            forest1: TrainConfig {
                n_trees: 30,
                seed: 1,
                ..TrainConfig::default()
            },
            forest2: TrainConfig {
                n_trees: 30,
                seed: 2,
                ..TrainConfig::default()
            },
            features1: vec![0, 1],
            features2: vec![0, 1],
            seed: 0,
        };
        let model = train_cascade(&rows, &labels, &cfg).unwrap();
        let (test_rows, test_labels) = labelled_rows(30, 30, 30, 10);
        let correct = test_rows
            .iter()
            .zip(&test_labels)
            .filter(|(row, &want)| model.predict_chunk(row) == want)
            .count();
        assert!(correct as f64 / test_rows.len() as f64 > 0.9);
    }

    #[test]
    fn save_load_round_trips() {
        let (rows, labels) = labelled_rows(30, 30, 30, 11);
        let cfg = CascadeTrainConfig {
            forest1: TrainConfig {
                n_trees: 5,
                ..TrainConfig::default()
            },
            forest2: TrainConfig {
                n_trees: 5,
                ..TrainConfig::default()
            },
            features1: vec![0, 1],
            features2: vec![1],
            seed: 0,
        };
        let model = train_cascade(&rows, &labels, &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cascade.json");
        model.save(&path).unwrap();
        let loaded = CascadeModel::load(&path).unwrap();
        assert_eq!(model, loaded);
    }

    #[test]
    fn stale_model_file_is_rejected() {
        let (rows, labels) = labelled_rows(20, 20, 20, 12);
        let cfg = CascadeTrainConfig {
            forest1: TrainConfig {
                n_trees: 2,
                ..TrainConfig::default()
            },
            forest2: TrainConfig {
                n_trees: 2,
                ..TrainConfig::default()
            },
            features1: vec![0],
            features2: vec![1],
            seed: 0,
        };
        let model = train_cascade(&rows, &labels, &cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cascade.json");
        model.save(&path).unwrap();
        let text = std::fs::read_to_string(&path)
            .unwrap()
            .replace("\"format_version\":1", "\"format_version\":3");
        std::fs::write(&path, text).unwrap();
        assert!(matches!(
            CascadeModel::load(&path),
            Err(Error::ModelVersion {
                found: 3,
                expected: CASCADE_FORMAT_VERSION
            })
        ));
    }

    #[test]
    fn duplicate_feature_columns_are_rejected() {
        let (rows, labels) = labelled_rows(10, 10, 10, 13);
        let cfg = CascadeTrainConfig {
            features1: vec![0, 0],
            features2: vec![1],
            ..CascadeTrainConfig::default()
        };
        assert!(matches!(
            train_cascade(&rows, &labels, &cfg),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn unlabelled_records_cannot_train() {
        let records = vec![FeatureRecord {
            chunk_index: 0,
            features: vec![1.0, 2.0],
            label: None,
        }];
        assert!(matches!(
            training_data_from_records(&records),
            Err(Error::DataFormat(_))
        ));
    }
}
