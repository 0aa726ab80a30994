//! The whole loop on one clip: train, decide a per-chunk timeline, decimate
//! to the kept frames, then reconstruct the original frame count by
//! duplication. Kept frames survive the round trip untouched.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use vfr::cascade::{train_cascade, CascadeTrainConfig};
use vfr::features::{extract_chunk_features, FeatureConfig};
use vfr::pipeline::{
    decide_sequence, decimate, duplicate_upsample, frames_dropped_report, read_timeline_csv,
    write_timeline_csv, write_timeline_svg,
};
use vfr::video_io::{chunk_frames, write_yuv, Frame};
use vfr::FrameRate;

/// Frames of a 64x64 window sliding over a wide noise panorama, one offset
/// per frame. Nothing is revealed or invented, so spatial statistics stay
/// constant while true motion follows the offsets.
fn window_clip(offsets: &[usize], seed: u64) -> Vec<Frame> {
    let (w, h) = (64usize, 64usize);
    let big_w = w + offsets.iter().copied().max().unwrap_or(0);
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let panorama: Vec<u8> = (0..big_w * h).map(|_| rng.gen()).collect();
    offsets
        .iter()
        .map(|&off| {
            let mut luma = Vec::with_capacity(w * h);
            for y in 0..h {
                luma.extend_from_slice(&panorama[y * big_w + off..y * big_w + off + w]);
            }
            Frame::from_luma(w, h, luma).expect("valid dimensions")
        })
        .collect()
}

fn pan(n: usize, dx: usize, seed: u64) -> Vec<Frame> {
    let offsets: Vec<usize> = (0..n).map(|i| i * dx).collect();
    window_clip(&offsets, seed)
}

/// A clip whose speed changes every chunk: within chunk `c` the window
/// advances `pattern[c]` pixels per frame, including the step into the
/// chunk's first frame, so time stays coherent across chunk borders.
fn mixed_clip(pattern: &[usize], seed: u64) -> Vec<Frame> {
    let mut offsets = vec![0usize];
    while offsets.len() < pattern.len() * 4 {
        let dx = pattern[offsets.len() / 4];
        offsets.push(offsets.last().unwrap() + dx);
    }
    window_clip(&offsets, seed)
}

fn main() -> vfr::Result<()> {
    let cfg = FeatureConfig {
        search_range: 8,
        ..FeatureConfig::default()
    };
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    let corpus = [
        (0, FrameRate::F30, 2),
        (1, FrameRate::F60, 4),
        (6, FrameRate::F120, 4),
    ];
    for (kind, (dx, rate, n_clips)) in corpus.iter().enumerate() {
        for clip in 0..*n_clips {
            let frames = pan(24, *dx, 1 + kind as u64 * 10 + clip);
            let (chunks, _) = chunk_frames(&frames);
            for chunk in &chunks {
                rows.push(extract_chunk_features(chunk, &cfg)?.to_vec());
                labels.push(*rate);
            }
        }
    }
    let mut train_cfg = CascadeTrainConfig::with_seed(10);
    train_cfg.forest1.n_trees = 60;
    train_cfg.forest2.n_trees = 40;
    let model = train_cascade(&rows, &labels, &train_cfg)?;

    // Still, slow, fast, slow, still, fast. Expect 30/60/120/60/30/120 fps.
    let frames = mixed_clip(&[0, 1, 6, 1, 0, 6], 500);
    let timeline = decide_sequence(&frames, &model, &cfg)?;
    for entry in timeline.entries() {
        println!(
            "chunk {} (frames {}..{}): {} fps",
            entry.chunk_index,
            entry.start_frame,
            entry.start_frame + 3,
            entry.rate
        );
    }

    let report = frames_dropped_report(&timeline);
    println!(
        "keeping {} of {} frames, {:.1}% dropped",
        report.kept_frames,
        report.source_frames,
        report.dropped_fraction * 100.0
    );

    let dir = tempfile::tempdir().expect("temp dir");
    let csv = dir.path().join("timeline.csv");
    write_timeline_csv(&csv, &timeline)?;
    write_timeline_svg(dir.path().join("timeline.svg"), &timeline)?;
    let reread = read_timeline_csv(&csv, Some(frames.len()))?;
    assert_eq!(timeline, reread);

    let (kept, positions) = decimate(&frames, &timeline)?;
    write_yuv(&dir.path().join("decimated.yuv"), &kept)?;
    println!("kept source positions: {positions:?}");

    let restored = duplicate_upsample(&kept, &timeline)?;
    assert_eq!(restored.len(), frames.len());
    for (pos, frame) in positions.iter().zip(&kept) {
        assert_eq!(&restored[*pos], frame);
    }
    println!(
        "upsampled back to {} frames; all {} kept frames are bit-exact",
        restored.len(),
        kept.len()
    );
    Ok(())
}
