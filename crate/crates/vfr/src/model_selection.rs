//! Model evaluation and tuning: confusion matrices, the critical-error
//! metric, non-shuffled k-fold cross-validation, recursive feature
//! elimination and hyper-parameter grid search.
//!
//! Folds are contiguous slices of the dataset in its original order. Chunks
//! of one sequence sit next to each other, so contiguity keeps a sequence
//! out of training and validation at the same time except at fold borders;
//! passing sequence start offsets aligns the borders too.

use std::path::Path;

use crate::error::{Error, Result};
use crate::forest::{train_forest, Dataset, Forest, TrainConfig};

/// Prediction counts indexed `[true class][predicted class]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionMatrix {
    classes: Vec<String>,
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(classes: &[&str]) -> Self {
        let n = classes.len();
        ConfusionMatrix {
            classes: classes.iter().map(|s| s.to_string()).collect(),
            counts: vec![vec![0; n]; n],
        }
    }

    pub fn from_predictions(classes: &[&str], truth: &[usize], pred: &[usize]) -> Result<Self> {
        if truth.len() != pred.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} truths but {} predictions",
                truth.len(),
                pred.len()
            )));
        }
        let mut cm = ConfusionMatrix::new(classes);
        for (&t, &p) in truth.iter().zip(pred) {
            if t >= classes.len() || p >= classes.len() {
                return Err(Error::DataFormat(format!(
                    "class index out of range: truth {t}, prediction {p}"
                )));
            }
            cm.record(t, p);
        }
        Ok(cm)
    }

    pub fn record(&mut self, truth: usize, pred: usize) {
        self.counts[truth][pred] += 1;
    }

    /// Adds another matrix with the same class list into this one.
    pub fn merge(&mut self, other: &ConfusionMatrix) -> Result<()> {
        if self.classes != other.classes {
            return Err(Error::DimensionMismatch(
                "cannot merge confusion matrices over different classes".into(),
            ));
        }
        for (mine, theirs) in self.counts.iter_mut().zip(&other.counts) {
            for (m, t) in mine.iter_mut().zip(theirs) {
                *m += t;
            }
        }
        Ok(())
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn count(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth][pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn true_positives(&self, class: usize) -> u64 {
        self.counts[class][class]
    }

    pub fn false_positives(&self, class: usize) -> u64 {
        (0..self.n_classes())
            .filter(|&t| t != class)
            .map(|t| self.counts[t][class])
            .sum()
    }

    pub fn false_negatives(&self, class: usize) -> u64 {
        (0..self.n_classes())
            .filter(|&p| p != class)
            .map(|p| self.counts[class][p])
            .sum()
    }

    pub fn true_negatives(&self, class: usize) -> u64 {
        self.total()
            - self.true_positives(class)
            - self.false_positives(class)
            - self.false_negatives(class)
    }

    /// Per-class precision; 0 when the class is never predicted.
    pub fn precision(&self, class: usize) -> f64 {
        ratio_or_zero(
            self.true_positives(class),
            self.true_positives(class) + self.false_positives(class),
        )
    }

    /// Per-class recall; 0 when the class never occurs.
    pub fn recall(&self, class: usize) -> f64 {
        ratio_or_zero(
            self.true_positives(class),
            self.true_positives(class) + self.false_negatives(class),
        )
    }

    /// Rows rescaled to sum to 1; an empty row stays all zero.
    pub fn row_normalized(&self) -> Vec<Vec<f64>> {
        self.counts
            .iter()
            .map(|row| {
                let total: u64 = row.iter().sum();
                row.iter()
                    .map(|&c| if total == 0 { 0.0 } else { c as f64 / total as f64 })
                    .collect()
            })
            .collect()
    }

    /// CSV rendering; raw counts or row-normalized rates.
    pub fn to_csv(&self, normalized: bool) -> String {
        let mut out = String::from("true\\predicted");
        for c in &self.classes {
            out.push(',');
            out.push_str(c);
        }
        out.push('\n');
        let rates = self.row_normalized();
        for (i, c) in self.classes.iter().enumerate() {
            out.push_str(c);
            for j in 0..self.n_classes() {
                out.push(',');
                if normalized {
                    out.push_str(&format!("{:.6}", rates[i][j]));
                } else {
                    out.push_str(&self.counts[i][j].to_string());
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv<P: AsRef<Path>>(&self, path: P, normalized: bool) -> Result<()> {
        std::fs::write(path.as_ref(), self.to_csv(normalized))
            .map_err(|e| Error::io(path.as_ref(), e))
    }
}

fn ratio_or_zero(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Macro-averaged precision and recall, with the combined score
/// `2 p r / (p + r)` (0 when both are 0).
pub fn macro_metrics(cm: &ConfusionMatrix) -> (f64, f64, f64) {
    let n = cm.n_classes() as f64;
    let precision = (0..cm.n_classes()).map(|c| cm.precision(c)).sum::<f64>() / n;
    let recall = (0..cm.n_classes()).map(|c| cm.recall(c)).sum::<f64>() / n;
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    (precision, recall, f1)
}

/// Critical-error metric of a binary matrix: the mean of the lower-rate
/// class's precision and the higher-rate class's recall. Both terms punish
/// predicting a lower rate than the content needs.
pub fn m_crit(cm: &ConfusionMatrix, lower: usize, higher: usize) -> Result<f64> {
    if cm.n_classes() != 2 {
        return Err(Error::DimensionMismatch(format!(
            "critical-error metric needs a binary matrix, got {} classes",
            cm.n_classes()
        )));
    }
    if lower > 1 || higher > 1 || lower == higher {
        return Err(Error::InvalidConfig(
            "lower/higher must name the two distinct classes".into(),
        ));
    }
    Ok(0.5 * (cm.precision(lower) + cm.recall(higher)))
}

/// Weighted combination of the two scores, normalised by the weight sum.
pub fn score_weighted(f1: f64, m_crit: f64, w_f1: f64, w_m: f64) -> f64 {
    let total = w_f1 + w_m;
    if total == 0.0 {
        return 0.0;
    }
    (w_f1 * f1 + w_m * m_crit) / total
}

/// Evaluation summary of one binary classifier.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub m_crit: f64,
    pub confusion: ConfusionMatrix,
}

impl EvalReport {
    pub fn from_confusion(cm: ConfusionMatrix, lower: usize, higher: usize) -> Result<EvalReport> {
        let (precision, recall, f1) = macro_metrics(&cm);
        let m = m_crit(&cm, lower, higher)?;
        Ok(EvalReport {
            precision,
            recall,
            f1,
            m_crit: m,
            confusion: cm,
        })
    }
}

/// Writes named evaluation rows as CSV.
pub fn write_reports_csv<P: AsRef<Path>>(path: P, rows: &[(String, EvalReport)]) -> Result<()> {
    let mut out = String::from("name,precision,recall,f1,m_crit\n");
    for (name, r) in rows {
        out.push_str(&format!(
            "{name},{},{},{},{}\n",
            r.precision, r.recall, r.f1, r.m_crit
        ));
    }
    std::fs::write(path.as_ref(), out).map_err(|e| Error::io(path.as_ref(), e))
}

/// Contiguous fold boundaries: `k` half-open index ranges whose sizes differ
/// by at most one, in order.
pub fn fold_bounds(n: usize, k: usize) -> Vec<(usize, usize)> {
    (0..k).map(|i| (i * n / k, (i + 1) * n / k)).collect()
}

/// Fold boundaries snapped to sequence starts, so no sequence straddles a
/// training/validation border. `sequence_starts` must begin with 0, be
/// strictly increasing and stay below `n`.
pub fn aligned_fold_bounds(n: usize, k: usize, sequence_starts: &[usize]) -> Result<Vec<(usize, usize)>> {
    if sequence_starts.first() != Some(&0) {
        return Err(Error::InvalidConfig(
            "sequence starts must begin with 0".into(),
        ));
    }
    if sequence_starts.windows(2).any(|w| w[0] >= w[1]) || *sequence_starts.last().unwrap() >= n {
        return Err(Error::InvalidConfig(
            "sequence starts must be strictly increasing and below the sample count".into(),
        ));
    }
    // candidate cut points: every sequence start plus the end of the data
    let mut cuts: Vec<usize> = sequence_starts.to_vec();
    cuts.push(n);
    let snap = |target: usize| -> usize {
        *cuts
            .iter()
            .min_by_key(|&&c| (c.abs_diff(target), c))
            .expect("cut list is never empty")
    };
    let mut bounds = Vec::with_capacity(k);
    let mut start = 0;
    for i in 1..=k {
        let end = if i == k { n } else { snap(i * n / k).max(start) };
        bounds.push((start, end));
        start = end;
    }
    if bounds.iter().any(|&(s, e)| s == e) {
        return Err(Error::InvalidConfig(format!(
            "{k} folds cannot all be non-empty with these sequence boundaries"
        )));
    }
    Ok(bounds)
}

/// Cross-validation output: per-fold reports and models, plus the pooled
/// matrix over every validation prediction.
#[derive(Debug, Clone)]
pub struct CvOutcome {
    pub fold_reports: Vec<EvalReport>,
    pub fold_models: Vec<Forest>,
    pub pooled: ConfusionMatrix,
    pub pooled_report: EvalReport,
}

/// k-fold cross-validation over contiguous, unshuffled folds.
pub fn kfold_cv<F>(
    data: &Dataset,
    k: usize,
    class_names: [&str; 2],
    lower: usize,
    higher: usize,
    trainer: F,
) -> Result<CvOutcome>
where
    F: Fn(&Dataset) -> Result<Forest>,
{
    let bounds = validate_k(data, k)?;
    cv_over_bounds(data, &bounds, class_names, lower, higher, trainer)
}

/// Like [`kfold_cv`] but with fold borders snapped to sequence starts.
pub fn kfold_cv_aligned<F>(
    data: &Dataset,
    k: usize,
    sequence_starts: &[usize],
    class_names: [&str; 2],
    lower: usize,
    higher: usize,
    trainer: F,
) -> Result<CvOutcome>
where
    F: Fn(&Dataset) -> Result<Forest>,
{
    validate_k(data, k)?;
    let bounds = aligned_fold_bounds(data.n_samples(), k, sequence_starts)?;
    cv_over_bounds(data, &bounds, class_names, lower, higher, trainer)
}

fn validate_k(data: &Dataset, k: usize) -> Result<Vec<(usize, usize)>> {
    if k < 2 {
        return Err(Error::InvalidConfig(
            "cross-validation needs at least 2 folds".into(),
        ));
    }
    if k > data.n_samples() {
        return Err(Error::InvalidConfig(format!(
            "{k} folds exceed the {} samples",
            data.n_samples()
        )));
    }
    Ok(fold_bounds(data.n_samples(), k))
}

fn cv_over_bounds<F>(
    data: &Dataset,
    bounds: &[(usize, usize)],
    class_names: [&str; 2],
    lower: usize,
    higher: usize,
    trainer: F,
) -> Result<CvOutcome>
where
    F: Fn(&Dataset) -> Result<Forest>,
{
    if data.n_classes() != 2 {
        return Err(Error::InvalidConfig(
            "cross-validation reports are defined for binary classifiers".into(),
        ));
    }
    let n = data.n_samples();
    let mut fold_reports = Vec::with_capacity(bounds.len());
    let mut fold_models = Vec::with_capacity(bounds.len());
    let mut pooled = ConfusionMatrix::new(&class_names);

    for &(start, end) in bounds {
        let train_idx: Vec<usize> = (0..start).chain(end..n).collect();
        let model = trainer(&data.subset(&train_idx)?)?;

        let mut cm = ConfusionMatrix::new(&class_names);
        for i in start..end {
            cm.record(data.label(i), model.predict(data.row(i)));
        }
        pooled.merge(&cm)?;
        fold_reports.push(EvalReport::from_confusion(cm, lower, higher)?);
        fold_models.push(model);
    }

    let pooled_report = EvalReport::from_confusion(pooled.clone(), lower, higher)?;
    Ok(CvOutcome {
        fold_reports,
        fold_models,
        pooled,
        pooled_report,
    })
}

/// One point of the elimination curve.
#[derive(Debug, Clone, PartialEq)]
pub struct RfePoint {
    pub n_features: usize,
    pub score: f64,
    /// Original column indices still in play at this point.
    pub features: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RfeResult {
    pub best_features: Vec<usize>,
    pub best_score: f64,
    pub curve: Vec<RfePoint>,
}

/// Recursive feature elimination.
///
/// Scores the current feature set with cross-validation, drops the feature
/// with the lowest mean importance across the fold models, and repeats down
/// to `min_dim` features. Returns the best-scoring set (ties go to the
/// smaller set) and the whole score curve.
#[allow(clippy::too_many_arguments)]
pub fn rfe<F>(
    data: &Dataset,
    initial_features: &[usize],
    min_dim: usize,
    k: usize,
    class_names: [&str; 2],
    lower: usize,
    higher: usize,
    score_weights: (f64, f64),
    trainer: F,
) -> Result<RfeResult>
where
    F: Fn(&Dataset) -> Result<Forest>,
{
    if min_dim < 1 {
        return Err(Error::InvalidConfig("min_dim must be at least 1".into()));
    }
    if initial_features.len() < min_dim {
        return Err(Error::InvalidConfig(format!(
            "{} initial features are fewer than min_dim {min_dim}",
            initial_features.len()
        )));
    }
    let mut current: Vec<usize> = initial_features.to_vec();
    let mut curve = Vec::new();
    let mut best: Option<(Vec<usize>, f64)> = None;

    loop {
        let projected = data.select_columns(&current)?;
        let cv = kfold_cv(&projected, k, class_names, lower, higher, &trainer)?;
        let score = score_weighted(
            cv.pooled_report.f1,
            cv.pooled_report.m_crit,
            score_weights.0,
            score_weights.1,
        );
        curve.push(RfePoint {
            n_features: current.len(),
            score,
            features: current.clone(),
        });
        // >= so that an equal score on a later (smaller) set wins
        if best.as_ref().map_or(true, |(_, b)| score >= *b) {
            best = Some((current.clone(), score));
        }
        if current.len() == min_dim {
            break;
        }

        let mut mean_importance = vec![0.0; current.len()];
        for model in &cv.fold_models {
            for (m, imp) in mean_importance.iter_mut().zip(model.feature_importance()) {
                *m += imp;
            }
        }
        for m in &mut mean_importance {
            *m /= cv.fold_models.len() as f64;
        }
        // drop the least important feature; ties drop the highest index so
        // earlier (conventionally more fundamental) columns survive longer
        let mut drop_local = 0;
        for (i, &imp) in mean_importance.iter().enumerate() {
            if imp <= mean_importance[drop_local] {
                drop_local = i;
            }
        }
        current.remove(drop_local);
    }

    let (best_features, best_score) = best.expect("at least one iteration ran");
    Ok(RfeResult {
        best_features,
        best_score,
        curve,
    })
}

/// Writes the elimination curve as CSV; the feature list is
/// semicolon-joined so the file stays one value per column.
pub fn write_curve_csv<P: AsRef<Path>>(path: P, curve: &[RfePoint]) -> Result<()> {
    let mut out = String::from("n_features,score,features\n");
    for p in curve {
        let joined: Vec<String> = p.features.iter().map(|f| f.to_string()).collect();
        out.push_str(&format!("{},{},{}\n", p.n_features, p.score, joined.join(";")));
    }
    std::fs::write(path.as_ref(), out).map_err(|e| Error::io(path.as_ref(), e))
}

/// One evaluated hyper-parameter combination.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub n_trees: usize,
    pub max_depth: usize,
    pub score: f64,
}

/// Evaluates every (n_trees, max_depth) combination with cross-validation
/// and returns the winning configuration plus all evaluated points. Score
/// ties prefer fewer trees, then a smaller depth.
#[allow(clippy::too_many_arguments)]
pub fn grid_search(
    data: &Dataset,
    k: usize,
    class_names: [&str; 2],
    lower: usize,
    higher: usize,
    score_weights: (f64, f64),
    n_trees_grid: &[usize],
    max_depth_grid: &[usize],
    base: &TrainConfig,
) -> Result<(TrainConfig, Vec<GridPoint>)> {
    if n_trees_grid.is_empty() || max_depth_grid.is_empty() {
        return Err(Error::InvalidConfig("empty hyper-parameter grid".into()));
    }
    let mut points = Vec::new();
    let mut best: Option<(TrainConfig, f64)> = None;
    for &n_trees in n_trees_grid {
        for &max_depth in max_depth_grid {
            let cfg = TrainConfig {
                n_trees,
                max_depth,
                ..base.clone()
            };
            let cv = kfold_cv(data, k, class_names, lower, higher, |d| {
                train_forest(d, &cfg)
            })?;
            let score = score_weighted(
                cv.pooled_report.f1,
                cv.pooled_report.m_crit,
                score_weights.0,
                score_weights.1,
            );
            points.push(GridPoint {
                n_trees,
                max_depth,
                score,
            });
            let wins = match &best {
                None => true,
                Some((b, s)) => {
                    score > *s
                        || (score == *s
                            && (n_trees, max_depth) < (b.n_trees, b.max_depth))
                }
            };
            if wins {
                best = Some((cfg, score));
            }
        }
    }
    Ok((best.expect("grid is non-empty").0, points))
}
