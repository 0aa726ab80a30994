//! Integer-pel block-matching motion estimation.
//!
//! The reference behaviour is an exhaustive SAD search over a square window;
//! a diamond-search mode exists for real-time use and trades exactness for
//! speed. Vectors use the content-displacement convention: `(dx, dy)` means
//! the block content moved by that amount from the previous frame to the
//! current one, so a frame translated by `(2, 0)` reports `(2, 0)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::video_io::Frame;

/// Block-matching strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    /// Every displacement in the window is evaluated. Deterministic optimum,
    /// used as the oracle-checkable reference.
    #[default]
    Exhaustive,
    /// Large/small diamond pattern descent. Much faster, may return a local
    /// minimum; still respects the window bound and the tie-break rules.
    Diamond,
}

/// Per-block integer motion vectors on a `ceil(w/bs) x ceil(h/bs)` grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MotionField {
    block_size: usize,
    cols: usize,
    rows: usize,
    vectors: Vec<(i32, i32)>,
}

impl MotionField {
    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn vectors(&self) -> &[(i32, i32)] {
        &self.vectors
    }

    pub fn vector_at(&self, col: usize, row: usize) -> (i32, i32) {
        self.vectors[row * self.cols + col]
    }

    /// Euclidean norms, one value per block.
    pub fn norm_map(&self) -> Vec<f64> {
        self.vectors
            .iter()
            .map(|&(dx, dy)| ((dx as f64).powi(2) + (dy as f64).powi(2)).sqrt())
            .collect()
    }

    /// Signed horizontal components, one value per block.
    pub fn horizontal_map(&self) -> Vec<f64> {
        self.vectors.iter().map(|&(dx, _)| dx as f64).collect()
    }

    /// Signed vertical components, one value per block.
    pub fn vertical_map(&self) -> Vec<f64> {
        self.vectors.iter().map(|&(_, dy)| dy as f64).collect()
    }
}

struct SearchContext<'a> {
    cur: &'a [u8],
    prev: &'a [u8],
    width: usize,
    height: usize,
    range: i32,
}

impl SearchContext<'_> {
    /// SAD between the current block at (bx, by) and the previous frame at
    /// (bx - dx, by - dy). Candidates whose reference block falls outside the
    /// frame are invalid. `limit` allows early exit once the running sum
    /// exceeds the best SAD seen so far.
    fn sad(
        &self,
        bx: usize,
        by: usize,
        bw: usize,
        bh: usize,
        dx: i32,
        dy: i32,
        limit: u64,
    ) -> Option<u64> {
        let rx = bx as i64 - dx as i64;
        let ry = by as i64 - dy as i64;
        if rx < 0 || ry < 0 || rx + bw as i64 > self.width as i64 || ry + bh as i64 > self.height as i64
        {
            return None;
        }
        let (rx, ry) = (rx as usize, ry as usize);
        let mut sum = 0u64;
        for row in 0..bh {
            let cur_off = (by + row) * self.width + bx;
            let ref_off = (ry + row) * self.width + rx;
            let c = &self.cur[cur_off..cur_off + bw];
            let r = &self.prev[ref_off..ref_off + bw];
            sum += c
                .iter()
                .zip(r)
                .map(|(&a, &b)| (a as i32 - b as i32).unsigned_abs() as u64)
                .sum::<u64>();
            if sum > limit {
                return Some(sum);
            }
        }
        Some(sum)
    }
}

/// (SAD, |dx|+|dy|) ordering; the caller's scan order breaks remaining ties.
#[inline]
fn better(sad: u64, dx: i32, dy: i32, best_sad: u64, best_dx: i32, best_dy: i32) -> bool {
    let l1 = dx.unsigned_abs() + dy.unsigned_abs();
    let best_l1 = best_dx.unsigned_abs() + best_dy.unsigned_abs();
    sad < best_sad || (sad == best_sad && l1 < best_l1)
}

fn full_search(ctx: &SearchContext, bx: usize, by: usize, bw: usize, bh: usize) -> (i32, i32) {
    // (0, 0) is always inside the window and in bounds.
    let mut best_sad = ctx
        .sad(bx, by, bw, bh, 0, 0, u64::MAX)
        .expect("zero displacement is always valid");
    let (mut best_dx, mut best_dy) = (0i32, 0i32);
    for dy in -ctx.range..=ctx.range {
        for dx in -ctx.range..=ctx.range {
            if dx == 0 && dy == 0 {
                continue;
            }
            // Early exit can only skip candidates strictly worse than best;
            // exact ties are always fully evaluated.
            if let Some(sad) = ctx.sad(bx, by, bw, bh, dx, dy, best_sad) {
                if better(sad, dx, dy, best_sad, best_dx, best_dy) {
                    best_sad = sad;
                    best_dx = dx;
                    best_dy = dy;
                }
            }
        }
    }
    (best_dx, best_dy)
}

const LARGE_DIAMOND: [(i32, i32); 8] = [
    (0, -2),
    (-1, -1),
    (1, -1),
    (-2, 0),
    (2, 0),
    (-1, 1),
    (1, 1),
    (0, 2),
];
const SMALL_DIAMOND: [(i32, i32); 4] = [(0, -1), (-1, 0), (1, 0), (0, 1)];

fn diamond_search(ctx: &SearchContext, bx: usize, by: usize, bw: usize, bh: usize) -> (i32, i32) {
    let mut center = (0i32, 0i32);
    let mut center_sad = ctx
        .sad(bx, by, bw, bh, 0, 0, u64::MAX)
        .expect("zero displacement is always valid");

    // Large diamond descent, bounded to guarantee termination.
    for _ in 0..4 * ctx.range {
        let mut best = center;
        let mut best_sad = center_sad;
        for &(odx, ody) in &LARGE_DIAMOND {
            let (dx, dy) = (center.0 + odx, center.1 + ody);
            if dx.abs() > ctx.range || dy.abs() > ctx.range {
                continue;
            }
            if let Some(sad) = ctx.sad(bx, by, bw, bh, dx, dy, best_sad) {
                if better(sad, dx, dy, best_sad, best.0, best.1) {
                    best_sad = sad;
                    best = (dx, dy);
                }
            }
        }
        if best == center {
            break;
        }
        center = best;
        center_sad = best_sad;
    }

    // One small-diamond refinement.
    let mut best = center;
    let mut best_sad = center_sad;
    for &(odx, ody) in &SMALL_DIAMOND {
        let (dx, dy) = (center.0 + odx, center.1 + ody);
        if dx.abs() > ctx.range || dy.abs() > ctx.range {
            continue;
        }
        if let Some(sad) = ctx.sad(bx, by, bw, bh, dx, dy, best_sad) {
            if better(sad, dx, dy, best_sad, best.0, best.1) {
                best_sad = sad;
                best = (dx, dy);
            }
        }
    }
    best
}

/// Estimates per-block motion of `current` relative to `prev`.
///
/// Blocks tile the frame from the top-left; right/bottom edge blocks may be
/// partial. Every returned vector satisfies `|dx| <= search_range` and
/// `|dy| <= search_range`. Ties on SAD prefer the smallest `|dx| + |dy|`,
/// then the earliest candidate in row-major window scan order.
pub fn estimate_motion(
    current: &Frame,
    prev: &Frame,
    block_size: usize,
    search_range: i32,
    mode: SearchMode,
) -> Result<MotionField> {
    if !current.same_dimensions(prev) {
        return Err(Error::DimensionMismatch(format!(
            "motion estimation needs equal frames, got {}x{} vs {}x{}",
            current.width(),
            current.height(),
            prev.width(),
            prev.height()
        )));
    }
    if block_size == 0 || search_range < 0 {
        return Err(Error::InvalidConfig(
            "block_size must be > 0 and search_range >= 0".into(),
        ));
    }
    let (w, h) = (current.width(), current.height());
    let cols = w.div_ceil(block_size);
    let rows = h.div_ceil(block_size);
    let ctx = SearchContext {
        cur: current.luma(),
        prev: prev.luma(),
        width: w,
        height: h,
        range: search_range,
    };

    let vectors: Vec<(i32, i32)> = (0..rows * cols)
        .into_par_iter()
        .map(|i| {
            let (row, col) = (i / cols, i % cols);
            let bx = col * block_size;
            let by = row * block_size;
            let bw = block_size.min(w - bx);
            let bh = block_size.min(h - by);
            match mode {
                SearchMode::Exhaustive => full_search(&ctx, bx, by, bw, bh),
                SearchMode::Diamond => diamond_search(&ctx, bx, by, bw, bh),
            }
        })
        .collect();

    Ok(MotionField {
        block_size,
        cols,
        rows,
        vectors,
    })
}
