//! Per-chunk feature extraction.
//!
//! Each frame yields eight maps: three motion maps from block matching
//! against the previous frame (vector norm, horizontal and vertical
//! components), a thresholded absolute luma difference, three Sobel gradient
//! maps (magnitude, horizontal, vertical) and the raw luma plane. Each map is
//! summarised by four statistics (mean, standard deviation, maximum, mean of
//! the top decile), giving 32 values per frame. A chunk's feature vector is
//! the average of its four frames' vectors.
//!
//! The very first frame of a sequence has no predecessor; its four temporal
//! maps are taken to be all zero.

pub mod motion;

use serde::{Deserialize, Serialize};
use std::path::Path;

use crate::error::{Error, Result};
use crate::rate::FrameRate;
use crate::video_io::{Chunk, Frame};
use motion::{estimate_motion, SearchMode};

/// Number of values in a chunk feature vector: 8 maps x 4 statistics.
pub const FEATURE_COUNT: usize = 32;

/// Canonical column names, in feature-vector order (map major, statistic
/// minor). CSV files use exactly these names.
pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "norm_mv_mean",
    "norm_mv_std",
    "norm_mv_max",
    "norm_mv_top10mean",
    "hor_mv_mean",
    "hor_mv_std",
    "hor_mv_max",
    "hor_mv_top10mean",
    "ver_mv_mean",
    "ver_mv_std",
    "ver_mv_max",
    "ver_mv_top10mean",
    "thresh_diff_mean",
    "thresh_diff_std",
    "thresh_diff_max",
    "thresh_diff_top10mean",
    "grad_mag_mean",
    "grad_mag_std",
    "grad_mag_max",
    "grad_mag_top10mean",
    "grad_hor_mean",
    "grad_hor_std",
    "grad_hor_max",
    "grad_hor_top10mean",
    "grad_ver_mean",
    "grad_ver_std",
    "grad_ver_max",
    "grad_ver_top10mean",
    "luma_mean",
    "luma_std",
    "luma_max",
    "luma_top10mean",
];

/// Settings for feature extraction. Defaults match the reference pipeline:
/// 16x16 blocks searched exhaustively in a +/-32 window, difference maps
/// thresholded at 25.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FeatureConfig {
    pub block_size: usize,
    pub search_range: i32,
    pub search_mode: SearchMode,
    pub diff_threshold: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            block_size: 16,
            search_range: 32,
            search_mode: SearchMode::Exhaustive,
            diff_threshold: 25.0,
        }
    }
}

/// Absolute luma difference per pixel.
pub fn frame_difference(current: &Frame, prev: &Frame) -> Result<Vec<f64>> {
    if !current.same_dimensions(prev) {
        return Err(Error::DimensionMismatch(format!(
            "frame difference needs equal frames, got {}x{} vs {}x{}",
            current.width(),
            current.height(),
            prev.width(),
            prev.height()
        )));
    }
    Ok(current
        .luma()
        .iter()
        .zip(prev.luma())
        .map(|(&a, &b)| (a as i16 - b as i16).abs() as f64)
        .collect())
}

/// Binarises a difference map: 1 where the difference reaches `threshold`
/// (inclusive), 0 below it.
pub fn threshold_map(diff: &[f64], threshold: f64) -> Vec<f64> {
    diff.iter()
        .map(|&d| if d >= threshold { 1.0 } else { 0.0 })
        .collect()
}

/// Sobel responses of a luma plane. `horizontal` and `vertical` hold the
/// absolute x- and y-derivative estimates; `magnitude` their Euclidean
/// combination.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub magnitude: Vec<f64>,
    pub horizontal: Vec<f64>,
    pub vertical: Vec<f64>,
}

/// 3x3 Sobel with replicated borders, so output size equals input size.
pub fn sobel_gradients(frame: &Frame) -> Gradients {
    let (w, h) = (frame.width() as i64, frame.height() as i64);
    let luma = frame.luma();
    let at = |x: i64, y: i64| -> f64 {
        let x = x.clamp(0, w - 1) as usize;
        let y = y.clamp(0, h - 1) as usize;
        luma[y * w as usize + x] as f64
    };
    let n = (w * h) as usize;
    let mut magnitude = vec![0.0; n];
    let mut horizontal = vec![0.0; n];
    let mut vertical = vec![0.0; n];
    for y in 0..h {
        for x in 0..w {
            let tl = at(x - 1, y - 1);
            let tc = at(x, y - 1);
            let tr = at(x + 1, y - 1);
            let ml = at(x - 1, y);
            let mr = at(x + 1, y);
            let bl = at(x - 1, y + 1);
            let bc = at(x, y + 1);
            let br = at(x + 1, y + 1);
            let gx = (tr + 2.0 * mr + br) - (tl + 2.0 * ml + bl);
            let gy = (bl + 2.0 * bc + br) - (tl + 2.0 * tc + tr);
            let i = (y * w + x) as usize;
            horizontal[i] = gx.abs();
            vertical[i] = gy.abs();
            magnitude[i] = (gx * gx + gy * gy).sqrt();
        }
    }
    Gradients {
        magnitude,
        horizontal,
        vertical,
    }
}

/// The four summary statistics of one map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapStats {
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub max: f64,
    /// Mean of the `ceil(n / 10)` largest values.
    pub top10mean: f64,
}

impl MapStats {
    pub const ZERO: MapStats = MapStats {
        mean: 0.0,
        std: 0.0,
        max: 0.0,
        top10mean: 0.0,
    };

    pub fn as_array(&self) -> [f64; 4] {
        [self.mean, self.std, self.max, self.top10mean]
    }
}

/// Summarises a map. An empty map yields all zeros.
pub fn map_statistics(values: &[f64]) -> MapStats {
    let n = values.len();
    if n == 0 {
        return MapStats::ZERO;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);

    let k = n.div_ceil(10);
    let mut sorted = values.to_vec();
    // k-th largest first, everything after index k-1 is <= it
    sorted.select_nth_unstable_by(k - 1, |a, b| b.total_cmp(a));
    let top10mean = sorted[..k].iter().sum::<f64>() / k as f64;

    MapStats {
        mean,
        std: var.sqrt(),
        max,
        top10mean,
    }
}

/// 32 statistics of one frame given its predecessor (`None` only for the
/// first frame of a sequence, which zeroes the temporal maps).
fn frame_features(
    current: &Frame,
    prev: Option<&Frame>,
    cfg: &FeatureConfig,
) -> Result<[f64; FEATURE_COUNT]> {
    let temporal: [MapStats; 4] = match prev {
        Some(prev) => {
            let field = estimate_motion(
                current,
                prev,
                cfg.block_size,
                cfg.search_range,
                cfg.search_mode,
            )?;
            let diff = frame_difference(current, prev)?;
            let thresh = threshold_map(&diff, cfg.diff_threshold);
            [
                map_statistics(&field.norm_map()),
                map_statistics(&field.horizontal_map()),
                map_statistics(&field.vertical_map()),
                map_statistics(&thresh),
            ]
        }
        None => [MapStats::ZERO; 4],
    };

    let grads = sobel_gradients(current);
    let luma: Vec<f64> = current.luma().iter().map(|&v| v as f64).collect();
    let spatial = [
        map_statistics(&grads.magnitude),
        map_statistics(&grads.horizontal),
        map_statistics(&grads.vertical),
        map_statistics(&luma),
    ];

    let mut out = [0.0; FEATURE_COUNT];
    for (m, stats) in temporal.iter().chain(spatial.iter()).enumerate() {
        out[m * 4..m * 4 + 4].copy_from_slice(&stats.as_array());
    }
    Ok(out)
}

/// Feature vector of a chunk: the mean of its four frames' statistics.
pub fn extract_chunk_features(chunk: &Chunk, cfg: &FeatureConfig) -> Result<[f64; FEATURE_COUNT]> {
    let mut acc = [0.0; FEATURE_COUNT];
    for (i, frame) in chunk.frames.iter().enumerate() {
        let prev = if i == 0 {
            chunk.prev_last.as_ref()
        } else {
            Some(&chunk.frames[i - 1])
        };
        let f = frame_features(frame, prev, cfg)?;
        for (a, v) in acc.iter_mut().zip(f) {
            *a += v;
        }
    }
    for a in &mut acc {
        *a /= chunk.frames.len() as f64;
    }
    Ok(acc)
}

/// One row of a feature file: a chunk index, its 32 features and an optional
/// ground-truth rate.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRecord {
    pub chunk_index: usize,
    pub features: Vec<f64>,
    pub label: Option<FrameRate>,
}

/// Writes records as CSV with the canonical header. Either every record is
/// labelled (a `label` column is appended) or none is.
pub fn write_features_csv<P: AsRef<Path>>(path: P, records: &[FeatureRecord]) -> Result<()> {
    let path = path.as_ref();
    let labelled = records.iter().filter(|r| r.label.is_some()).count();
    if labelled != 0 && labelled != records.len() {
        return Err(Error::DataFormat(
            "feature records mix labelled and unlabelled rows".into(),
        ));
    }
    let with_labels = labelled == records.len() && !records.is_empty();

    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut header: Vec<&str> = Vec::with_capacity(FEATURE_COUNT + 2);
    header.push("chunk_index");
    header.extend(FEATURE_NAMES);
    if with_labels {
        header.push("label");
    }
    w.write_record(&header).map_err(|e| csv_error(path, e))?;

    for r in records {
        if r.features.len() != FEATURE_COUNT {
            return Err(Error::DataFormat(format!(
                "chunk {} has {} features, expected {FEATURE_COUNT}",
                r.chunk_index,
                r.features.len()
            )));
        }
        let mut row: Vec<String> = Vec::with_capacity(FEATURE_COUNT + 2);
        row.push(r.chunk_index.to_string());
        row.extend(r.features.iter().map(|v| v.to_string()));
        if with_labels {
            row.push(r.label.expect("checked above").fps().to_string());
        }
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Reads a feature CSV written by [`write_features_csv`] (or produced
/// externally with the same header). The label column is optional.
pub fn read_features_csv<P: AsRef<Path>>(path: P) -> Result<Vec<FeatureRecord>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let header = r.headers().map_err(|e| csv_error(path, e))?.clone();

    let mut expected: Vec<&str> = Vec::with_capacity(FEATURE_COUNT + 1);
    expected.push("chunk_index");
    expected.extend(FEATURE_NAMES);
    let with_labels = match header.len() {
        n if n == expected.len() => false,
        n if n == expected.len() + 1 && &header[expected.len()] == "label" => true,
        n => {
            return Err(Error::DataFormat(format!(
                "feature file has {n} columns, expected {} or {} with a label",
                expected.len(),
                expected.len() + 1
            )))
        }
    };
    for (i, name) in expected.iter().enumerate() {
        if &header[i] != *name {
            return Err(Error::DataFormat(format!(
                "feature column {i} is '{}', expected '{name}'",
                &header[i]
            )));
        }
    }

    let mut records = Vec::new();
    for (line, row) in r.records().enumerate() {
        let row = row.map_err(|e| csv_error(path, e))?;
        let parse_f = |i: usize| -> Result<f64> {
            row[i].parse::<f64>().map_err(|_| {
                Error::DataFormat(format!(
                    "row {}: '{}' is not a number in column '{}'",
                    line + 2,
                    &row[i],
                    if i == 0 { "chunk_index" } else { FEATURE_NAMES[i - 1] }
                ))
            })
        };
        let chunk_index = row[0].parse::<usize>().map_err(|_| {
            Error::DataFormat(format!("row {}: bad chunk_index '{}'", line + 2, &row[0]))
        })?;
        let mut features = Vec::with_capacity(FEATURE_COUNT);
        for i in 1..=FEATURE_COUNT {
            features.push(parse_f(i)?);
        }
        let label = if with_labels {
            let fps = row[FEATURE_COUNT + 1].parse::<u32>().map_err(|_| {
                Error::DataFormat(format!(
                    "row {}: bad label '{}'",
                    line + 2,
                    &row[FEATURE_COUNT + 1]
                ))
            })?;
            Some(FrameRate::from_fps(fps)?)
        } else {
            None
        };
        records.push(FeatureRecord {
            chunk_index,
            features,
            label,
        });
    }
    Ok(records)
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::DataFormat(format!("{}: {other:?}", path.display())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{noise_frame, static_clip};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn statistics_match_hand_computed_values() {
        let s = map_statistics(&[1.0, 2.0, 3.0, 4.0]);
        assert_relative_eq!(s.mean, 2.5);
        assert_relative_eq!(s.std, 1.25f64.sqrt());
        assert_relative_eq!(s.max, 4.0);
        // ceil(4 / 10) = 1 value
        assert_relative_eq!(s.top10mean, 4.0);
    }

    #[test]
    fn top_decile_averages_the_right_count() {
        // 20 values: ceil(2) = 2 largest -> (19 + 18) / 2
        let v: Vec<f64> = (0..20).map(|i| i as f64).collect();
        assert_relative_eq!(map_statistics(&v).top10mean, 18.5);
        // 11 values: ceil(1.1) = 2 largest -> (10 + 9) / 2
        let v: Vec<f64> = (0..11).map(|i| i as f64).collect();
        assert_relative_eq!(map_statistics(&v).top10mean, 9.5);
    }

    #[test]
    fn constant_map_has_zero_spread() {
        let s = map_statistics(&[7.0; 100]);
        assert_eq!(s.mean, 7.0);
        assert_eq!(s.std, 0.0);
        assert_eq!(s.max, 7.0);
        assert_eq!(s.top10mean, 7.0);
    }

    #[test]
    fn threshold_is_inclusive() {
        let diff = vec![24.0, 25.0, 26.0, 0.0];
        assert_eq!(threshold_map(&diff, 25.0), vec![0.0, 1.0, 1.0, 0.0]);
    }

    #[test]
    fn difference_is_symmetric_and_zero_on_self() {
        let a = noise_frame(32, 32, 5);
        let b = noise_frame(32, 32, 6);
        let ab = frame_difference(&a, &b).unwrap();
        let ba = frame_difference(&b, &a).unwrap();
        assert_eq!(ab, ba);
        assert!(frame_difference(&a, &a).unwrap().iter().all(|&d| d == 0.0));
    }

    #[test]
    fn sobel_peaks_on_step_edge() {
        // left half 0, right half 255: max horizontal response is 4 * 255
        let w = 16;
        let h = 8;
        let mut luma = vec![0u8; w * h];
        for y in 0..h {
            for x in w / 2..w {
                luma[y * w + x] = 255;
            }
        }
        let f = Frame::from_luma(w, h, luma).unwrap();
        let g = sobel_gradients(&f);
        let peak = g.horizontal.iter().cloned().fold(0.0, f64::max);
        assert_relative_eq!(peak, 1020.0);
        // a vertical step has no vertical gradient anywhere
        assert!(g.vertical.iter().all(|&v| v == 0.0));
        let mag_peak = g.magnitude.iter().cloned().fold(0.0, f64::max);
        assert_relative_eq!(mag_peak, 1020.0);
    }

    #[test]
    fn sobel_is_zero_on_flat_frames() {
        let f = Frame::from_luma(16, 16, vec![128; 256]).unwrap();
        let g = sobel_gradients(&f);
        assert!(g.magnitude.iter().all(|&v| v == 0.0));
        assert!(g.horizontal.iter().all(|&v| v == 0.0));
        assert!(g.vertical.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn first_chunk_zeroes_temporal_maps_only() {
        let frames = static_clip(32, 32, 4, 42);
        let (chunks, _) = crate::video_io::chunk_frames(&frames);
        let cfg = FeatureConfig::default();
        let f = extract_chunk_features(&chunks[0], &cfg).unwrap();
        // temporal features (maps 0..4) are zero on a static clip
        assert!(f[..16].iter().all(|&v| v == 0.0));
        // luma mean of a noise frame is far from zero
        assert!(f[28] > 1.0);
    }

    #[test]
    fn panning_clip_reports_motion() {
        // replicated borders: no wrap-around column confusing the matcher
        let mut frames = vec![noise_frame(64, 64, 42)];
        for _ in 1..8 {
            let next = crate::synthetic::translate_replicated(frames.last().unwrap(), 3, 0);
            frames.push(next);
        }
        let (chunks, _) = crate::video_io::chunk_frames(&frames);
        let cfg = FeatureConfig::default();
        let f1 = extract_chunk_features(&chunks[1], &cfg).unwrap();
        // second chunk has a predecessor for every frame: hor_mv_mean ~ 3
        assert!(f1[4] > 1.5, "hor_mv_mean = {}", f1[4]);
        // vertical motion stays near zero
        assert!(f1[8].abs() < 1.0, "ver_mv_mean = {}", f1[8]);
    }

    #[test]
    fn feature_csv_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("features.csv");
        let records: Vec<FeatureRecord> = (0..3)
            .map(|i| FeatureRecord {
                chunk_index: i,
                features: (0..FEATURE_COUNT)
                    .map(|j| (i * FEATURE_COUNT + j) as f64 * 0.123456789)
                    .collect(),
                label: Some(FrameRate::ALL[i % 3]),
            })
            .collect();
        write_features_csv(&path, &records).unwrap();
        let back = read_features_csv(&path).unwrap();
        assert_eq!(back, records);
    }

    #[test]
    fn unlabelled_csv_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("features.csv");
        let records = vec![FeatureRecord {
            chunk_index: 0,
            features: vec![0.5; FEATURE_COUNT],
            label: None,
        }];
        write_features_csv(&path, &records).unwrap();
        let back = read_features_csv(&path).unwrap();
        assert_eq!(back, records);
    }

    #[test]
    fn mixed_labels_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("features.csv");
        let records = vec![
            FeatureRecord {
                chunk_index: 0,
                features: vec![0.0; FEATURE_COUNT],
                label: Some(FrameRate::F30),
            },
            FeatureRecord {
                chunk_index: 1,
                features: vec![0.0; FEATURE_COUNT],
                label: None,
            },
        ];
        assert!(matches!(
            write_features_csv(&path, &records),
            Err(Error::DataFormat(_))
        ));
    }

    #[test]
    fn wrong_header_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("features.csv");
        let mut cols = vec!["chunk_index".to_string()];
        cols.extend(FEATURE_NAMES.iter().map(|s| s.to_string()));
        cols[5] = "bogus".into();
        std::fs::write(&path, cols.join(",") + "\n").unwrap();
        assert!(matches!(
            read_features_csv(&path),
            Err(Error::DataFormat(_))
        ));
    }

    #[test]
    fn bad_label_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("features.csv");
        let mut cols = vec!["chunk_index".to_string()];
        cols.extend(FEATURE_NAMES.iter().map(|s| s.to_string()));
        cols.push("label".into());
        let mut row = vec!["0".to_string()];
        row.extend(std::iter::repeat("1.0".to_string()).take(FEATURE_COUNT));
        row.push("48".into());
        std::fs::write(&path, format!("{}\n{}\n", cols.join(","), row.join(","))).unwrap();
        assert!(matches!(
            read_features_csv(&path),
            Err(Error::DataFormat(_))
        ));
    }

    proptest! {
        #[test]
        fn stats_are_ordered(values in proptest::collection::vec(0.0f64..1000.0, 1..200)) {
            let s = map_statistics(&values);
            prop_assert!(s.mean <= s.top10mean + 1e-9);
            prop_assert!(s.top10mean <= s.max + 1e-9);
            prop_assert!(s.std >= 0.0);
            prop_assert!(s.mean <= s.max + 1e-9);
        }

        #[test]
        fn threshold_map_is_binary(
            values in proptest::collection::vec(0.0f64..255.0, 1..100),
            th in 0.0f64..255.0,
        ) {
            let m = threshold_map(&values, th);
            prop_assert!(m.iter().all(|&v| v == 0.0 || v == 1.0));
        }
    }
}
