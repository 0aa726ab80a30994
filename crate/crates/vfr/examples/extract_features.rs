//! Turns a clip into per-chunk feature vectors and shows the raw motion
//! field they are pooled from.

use vfr::features::motion::{estimate_motion, SearchMode};
use vfr::features::{extract_chunk_features, FeatureConfig, FEATURE_NAMES};
use vfr::synthetic::{noise_frame, translate_replicated};
use vfr::video_io::{chunk_frames, Frame};

/// 64x64 noise panning right at `dx` pixels per frame.
fn pan(n: usize, dx: i32, seed: u64) -> Vec<Frame> {
    let mut frames = vec![noise_frame(64, 64, seed)];
    for _ in 1..n {
        frames.push(translate_replicated(frames.last().unwrap(), dx, 0));
    }
    frames
}

fn main() -> vfr::Result<()> {
    let frames = pan(10, 2, 42);
    let (chunks, tail) = chunk_frames(&frames);
    println!(
        "{} frames -> {} chunks + {} tail frames",
        frames.len(),
        chunks.len(),
        tail.len()
    );

    // One frame pair's motion field, before any pooling. Content moves two
    // pixels right, so interior blocks report (2, 0). The left edge exposes
    // replicated columns that already match in place, and ties go to the
    // shortest vector, so column 0 reports (0, 0).
    let field = estimate_motion(&frames[5], &frames[4], 16, 8, SearchMode::Exhaustive)?;
    println!("block vectors ({} cols x {} rows):", field.cols(), field.rows());
    for row in 0..field.rows() {
        let line: Vec<String> = (0..field.cols())
            .map(|col| format!("{:?}", field.vector_at(col, row)))
            .collect();
        println!("  {}", line.join("  "));
    }

    let cfg = FeatureConfig {
        search_range: 8,
        ..FeatureConfig::default()
    };
    let v = extract_chunk_features(&chunks[0], &cfg)?;
    println!("chunk 0 feature vector (temporal half is zero-biased: frame 0 has no reference):");
    for (name, value) in FEATURE_NAMES.iter().zip(v.iter()) {
        println!("  {name:<22} {value:9.3}");
    }

    for chunk in &chunks[1..] {
        let v = extract_chunk_features(chunk, &cfg)?;
        println!(
            "chunk {}: norm_mv_mean {:.3}, thresh_diff_mean {:.3}, luma_mean {:.3}",
            chunk.index, v[0], v[12], v[28]
        );
    }
    Ok(())
}
