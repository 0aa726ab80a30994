//! Trains the two-stage rate classifier from labelled chunk features, shows
//! how the balanced training sets are carved out, and round-trips the model
//! through its JSON envelope.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use vfr::cascade::{build_training_sets, train_cascade, CascadeTrainConfig};
use vfr::features::{extract_chunk_features, FeatureConfig};
use vfr::video_io::{chunk_frames, Frame};
use vfr::FrameRate;

/// A 64x64 window sliding right at `dx` pixels per frame over a wide noise
/// panorama. Nothing is revealed or invented, so spatial statistics stay
/// constant while true motion follows `dx`.
fn pan(n: usize, dx: usize, seed: u64) -> Vec<Frame> {
    let (w, h) = (64usize, 64usize);
    let big_w = w + (n - 1) * dx;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let panorama: Vec<u8> = (0..big_w * h).map(|_| rng.gen()).collect();
    (0..n)
        .map(|i| {
            let off = i * dx;
            let mut luma = Vec::with_capacity(w * h);
            for y in 0..h {
                luma.extend_from_slice(&panorama[y * big_w + off..y * big_w + off + w]);
            }
            Frame::from_luma(w, h, luma).expect("valid dimensions")
        })
        .collect()
}

fn main() -> vfr::Result<()> {
    let cfg = FeatureConfig {
        search_range: 8,
        ..FeatureConfig::default()
    };
    let mut rows = Vec::new();
    let mut labels = Vec::new();
    // Static content wants 30 fps, slow pans 60, fast pans 120. Static clips
    // are the rarest kind, as in real footage.
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

    let sets = build_training_sets(&rows, &labels, 99)?;
    println!(
        "stage 1 set: {:?} (120fps vs frame-drop), stage 2 set: {:?} (60 vs 30 fps)",
        sets.ds1.class_counts(),
        sets.ds2.class_counts()
    );

    let mut train_cfg = CascadeTrainConfig::with_seed(10);
    train_cfg.forest1.n_trees = 60;
    train_cfg.forest2.n_trees = 40;
    let model = train_cascade(&rows, &labels, &train_cfg)?;

    // Fresh clips, one per kind. The traced call also reports whether the
    // second stage ran: it is skipped whenever stage one already says 120 fps.
    for (kind, (dx, rate, _)) in corpus.iter().enumerate() {
        let frames = pan(24, *dx, 900 + kind as u64);
        let (chunks, _) = chunk_frames(&frames);
        let v = extract_chunk_features(&chunks[2], &cfg)?;
        let (pred, used_stage_two) = model.predict_chunk_traced(&v);
        println!("truth {rate} fps -> predicted {pred} fps (stage two ran: {used_stage_two})");
    }

    let dir = tempfile::tempdir().expect("temp dir");
    let path = dir.path().join("cascade.json");
    model.save(&path)?;
    let restored = vfr::cascade::CascadeModel::load(&path)?;
    assert_eq!(model, restored);
    println!(
        "model round-tripped bit for bit through {} ({} input columns)",
        path.display(),
        restored.input_dim()
    );
    Ok(())
}
