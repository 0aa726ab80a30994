//! Deterministic synthetic clips for tests, examples and benchmarks.
//!
//! All generators are pure functions of their arguments; the same seed always
//! produces the same bytes, so expectations stay stable across runs and
//! platforms. Chroma planes are neutral grey, content lives in luma.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::video_io::Frame;

/// Uniform random luma. Dimensions must be even and non-zero.
pub fn noise_frame(width: usize, height: usize, seed: u64) -> Frame {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let luma: Vec<u8> = (0..width * height).map(|_| rng.gen()).collect();
    Frame::from_luma(width, height, luma).expect("valid synthetic dimensions")
}

/// `n` identical noise frames: no motion, no luma change.
pub fn static_clip(width: usize, height: usize, n: usize, seed: u64) -> Vec<Frame> {
    let frame = noise_frame(width, height, seed);
    vec![frame; n]
}

/// Toroidal shift of the luma plane by `(dx, dy)` per content displacement:
/// the pixel at `p` comes from `p - (dx, dy)`, wrapping around the borders.
pub fn shift_toroidal(frame: &Frame, dx: i32, dy: i32) -> Frame {
    let (w, h) = (frame.width(), frame.height());
    let mut luma = vec![0u8; w * h];
    for y in 0..h {
        let sy = (y as i64 - dy as i64).rem_euclid(h as i64) as usize;
        for x in 0..w {
            let sx = (x as i64 - dx as i64).rem_euclid(w as i64) as usize;
            luma[y * w + x] = frame.luma_at(sx, sy);
        }
    }
    Frame::from_luma(w, h, luma).expect("valid synthetic dimensions")
}

/// Shift with replicated borders instead of wrap-around, so interior blocks
/// match the source exactly while revealed areas stay plausible.
pub fn translate_replicated(frame: &Frame, dx: i32, dy: i32) -> Frame {
    let (w, h) = (frame.width(), frame.height());
    let mut luma = vec![0u8; w * h];
    for y in 0..h {
        let sy = (y as i64 - dy as i64).clamp(0, h as i64 - 1) as usize;
        for x in 0..w {
            let sx = (x as i64 - dx as i64).clamp(0, w as i64 - 1) as usize;
            luma[y * w + x] = frame.luma_at(sx, sy);
        }
    }
    Frame::from_luma(w, h, luma).expect("valid synthetic dimensions")
}

/// A clip panning at a constant `(dx, dy)` pixels per frame over wrapped
/// noise, so every consecutive pair is related by the same displacement.
pub fn pan_clip(width: usize, height: usize, n: usize, dx: i32, dy: i32, seed: u64) -> Vec<Frame> {
    let base = noise_frame(width, height, seed);
    (0..n)
        .map(|i| shift_toroidal(&base, dx * i as i32, dy * i as i32))
        .collect()
}

/// A clip whose luma is re-rolled independently every frame: maximal temporal
/// change, useless motion compensation.
pub fn flicker_clip(width: usize, height: usize, n: usize, seed: u64) -> Vec<Frame> {
    (0..n)
        .map(|i| noise_frame(width, height, seed.wrapping_add(i as u64 + 1)))
        .collect()
}
