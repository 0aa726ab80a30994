//! Model selection on a binary stage: cross-validation, recursive feature
//! elimination, and a small hyper-parameter grid search.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use vfr::forest::{train_forest, Dataset, TrainConfig};
use vfr::model_selection::{grid_search, kfold_cv, rfe};

fn main() -> vfr::Result<()> {
    // Eight columns, but only 0 and 3 carry signal. Classes alternate so the
    // contiguous folds stay balanced.
    let mut rng = ChaCha12Rng::seed_from_u64(3);
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    for i in 0..160 {
        let class = i % 2;
        let mut row: Vec<f64> = (0..8).map(|_| rng.gen::<f64>()).collect();
        row[0] += class as f64 * 0.8;
        row[3] -= class as f64 * 0.5;
        rows.push(row);
        labels.push(class);
    }
    let data = Dataset::from_rows(&rows, &labels, 2)?;

    // Class 0 is the higher rate by convention, class 1 the lower one.
    let classes = ["60fps", "30fps"];
    let trainer = |d: &Dataset| {
        train_forest(
            d,
            &TrainConfig {
                n_trees: 30,
                max_depth: 5,
                seed: 11,
                ..TrainConfig::default()
            },
        )
    };

    let cv = kfold_cv(&data, 5, classes, 1, 0, trainer)?;
    for (i, fold) in cv.fold_reports.iter().enumerate() {
        println!(
            "fold {i}: f1 {:.3}, critical-error score {:.3}",
            fold.f1, fold.m_crit
        );
    }
    println!(
        "pooled: f1 {:.3}, critical-error score {:.3}",
        cv.pooled_report.f1, cv.pooled_report.m_crit
    );

    let all: Vec<usize> = (0..8).collect();
    let result = rfe(&data, &all, 2, 5, classes, 1, 0, (1.0, 1.0), trainer)?;
    println!("elimination curve (features -> score):");
    for point in &result.curve {
        println!(
            "  {} features {:?} -> {:.3}",
            point.n_features, point.features, point.score
        );
    }
    println!(
        "best set: {:?} at {:.3}; the informative columns survive",
        result.best_features, result.best_score
    );

    let base = TrainConfig {
        seed: 11,
        ..TrainConfig::default()
    };
    let (winner, points) = grid_search(
        &data,
        5,
        classes,
        1,
        0,
        (1.0, 1.0),
        &[10, 30],
        &[3, 5],
        &base,
    )?;
    for p in &points {
        println!(
            "  {} trees, depth {} -> {:.3}",
            p.n_trees, p.max_depth, p.score
        );
    }
    println!(
        "grid winner: {} trees at depth {}",
        winner.n_trees, winner.max_depth
    );
    Ok(())
}
