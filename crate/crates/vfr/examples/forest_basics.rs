//! Grows a small random forest on a toy table and inspects its parts:
//! impurity, the chosen root split, votes, and feature importance.

use vfr::forest::{best_split, gini, train_forest, Dataset, TrainConfig};

fn main() -> vfr::Result<()> {
    // Column 0 carries the signal, column 1 is a fixed noise pattern.
    let rows: Vec<Vec<f64>> = (0..60)
        .map(|i| vec![i as f64 * 0.1, ((i * 13) % 7) as f64])
        .collect();
    let labels: Vec<usize> = rows.iter().map(|r| usize::from(r[0] >= 3.0)).collect();
    let data = Dataset::from_rows(&rows, &labels, 2)?;

    println!(
        "samples: {}, class counts: {:?}",
        data.n_samples(),
        data.class_counts()
    );
    println!("root gini: {:.4}", gini(&data.class_counts()));

    let every_row: Vec<usize> = (0..data.n_samples()).collect();
    let split = best_split(&data, &every_row, &[0, 1]).expect("separable data always splits");
    println!(
        "root split: column {} at {:.2}, gain {:.4}",
        split.feature, split.threshold, split.gain
    );

    let cfg = TrainConfig {
        n_trees: 25,
        max_depth: 4,
        seed: 7,
        ..TrainConfig::default()
    };
    let forest = train_forest(&data, &cfg)?;

    for sample in [[0.5, 3.0], [2.9, 1.0], [3.1, 1.0], [5.5, 6.0]] {
        println!(
            "sample {:?} -> class {} (votes {:?})",
            sample,
            forest.predict(&sample),
            forest.votes(&sample)
        );
    }

    println!("feature importance: {:.3?}", forest.feature_importance());

    // Same seed, same forest, no matter how many threads rayon happens to use.
    let again = train_forest(&data, &cfg)?;
    assert_eq!(forest, again);
    println!("retraining with the same seed reproduced the forest bit for bit");
    Ok(())
}
