//! From per-chunk rate decisions to actual frames: decimation, duplication
//! upsampling, GOP-level skip planning and savings reporting.
//!
//! Decimation keeps the first frame of every decimation period (local index
//! 0 for 30 fps, {0, 2} for 60 fps). That phase is forced by the
//! hierarchical-B GOP structure: the kept picture order counts then fall on
//! the lower temporal layers, so an encoder can realise the same decision by
//! skipping upper-layer frames without breaking any reference.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::path::Path;
use std::time::{Duration, Instant};

use crate::cascade::CascadeModel;
use crate::error::{Error, Result};
use crate::features::{extract_chunk_features, FeatureConfig};
use crate::rate::FrameRate;
use crate::video_io::{chunk_frames, Frame, CHUNK_FRAMES};

/// One decided chunk.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimelineEntry {
    pub chunk_index: usize,
    pub start_frame: usize,
    pub rate: FrameRate,
}

/// Per-chunk rate decisions for one 120 fps source clip. Chunk `i` covers
/// source frames `[4i, 4i + 4)`; up to three trailing frames fall outside
/// any chunk and pass through untouched.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecisionTimeline {
    rates: Vec<FrameRate>,
    source_frames: usize,
}

impl DecisionTimeline {
    pub fn new(rates: Vec<FrameRate>, source_frames: usize) -> Result<Self> {
        let covered = rates.len() * CHUNK_FRAMES;
        if source_frames < covered || source_frames >= covered + CHUNK_FRAMES {
            return Err(Error::TimelineMismatch(format!(
                "{} chunks cover frames 0..{covered}, incompatible with {source_frames} source frames",
                rates.len()
            )));
        }
        Ok(DecisionTimeline {
            rates,
            source_frames,
        })
    }

    pub fn n_chunks(&self) -> usize {
        self.rates.len()
    }

    pub fn source_frames(&self) -> usize {
        self.source_frames
    }

    /// Trailing frames not covered by any chunk.
    pub fn tail_len(&self) -> usize {
        self.source_frames - self.rates.len() * CHUNK_FRAMES
    }

    pub fn rates(&self) -> &[FrameRate] {
        &self.rates
    }

    pub fn entry(&self, chunk_index: usize) -> TimelineEntry {
        TimelineEntry {
            chunk_index,
            start_frame: chunk_index * CHUNK_FRAMES,
            rate: self.rates[chunk_index],
        }
    }

    pub fn entries(&self) -> Vec<TimelineEntry> {
        (0..self.rates.len()).map(|i| self.entry(i)).collect()
    }

    /// Source indices that survive decimation, strictly increasing.
    pub fn kept_indices(&self) -> Vec<usize> {
        let mut kept = Vec::new();
        for (i, rate) in self.rates.iter().enumerate() {
            let start = i * CHUNK_FRAMES;
            for local in (0..CHUNK_FRAMES).step_by(rate.period()) {
                kept.push(start + local);
            }
        }
        kept.extend(self.rates.len() * CHUNK_FRAMES..self.source_frames);
        kept
    }

    /// Frame count after decimation.
    pub fn kept_count(&self) -> usize {
        let chunk_keeps: usize = self
            .rates
            .iter()
            .map(|r| CHUNK_FRAMES / r.period())
            .sum();
        chunk_keeps + self.tail_len()
    }
}

/// Decides every full chunk of a clip with the cascade. Chunks are processed
/// in parallel; outputs keep source order. Fewer than four frames produce an
/// empty timeline whose frames are all tail.
pub fn decide_sequence(
    frames: &[Frame],
    model: &CascadeModel,
    cfg: &FeatureConfig,
) -> Result<DecisionTimeline> {
    Ok(decide_sequence_timed(frames, model, cfg)?.0)
}

/// [`decide_sequence`] plus the wall-clock time each chunk spent in feature
/// extraction and prediction, for latency reporting.
pub fn decide_sequence_timed(
    frames: &[Frame],
    model: &CascadeModel,
    cfg: &FeatureConfig,
) -> Result<(DecisionTimeline, Vec<Duration>)> {
    let (chunks, _) = chunk_frames(frames);
    let decisions: Vec<(FrameRate, Duration)> = chunks
        .par_iter()
        .map(|chunk| {
            let started = Instant::now();
            let features = extract_chunk_features(chunk, cfg)?;
            let rate = model.predict_chunk(&features);
            Ok((rate, started.elapsed()))
        })
        .collect::<Result<_>>()?;
    let (rates, times) = decisions.into_iter().unzip();
    Ok((DecisionTimeline::new(rates, frames.len())?, times))
}

/// Rebuilds the timeline a decimated clip was produced under. The timeline
/// CSV cannot carry the tail length, but the decimated frame count pins it
/// down uniquely.
pub fn timeline_for_kept_count(
    rates: Vec<FrameRate>,
    kept_frames: usize,
) -> Result<DecisionTimeline> {
    let chunk_keeps: usize = rates.iter().map(|r| CHUNK_FRAMES / r.period()).sum();
    if kept_frames < chunk_keeps || kept_frames - chunk_keeps >= CHUNK_FRAMES {
        return Err(Error::TimelineMismatch(format!(
            "{} chunks keep {chunk_keeps} frames plus a tail under {CHUNK_FRAMES}, \
             incompatible with a decimated clip of {kept_frames} frames",
            rates.len()
        )));
    }
    let source = rates.len() * CHUNK_FRAMES + (kept_frames - chunk_keeps);
    DecisionTimeline::new(rates, source)
}

/// Drops frames according to the timeline. Returns the surviving frames and
/// their source indices.
pub fn decimate(frames: &[Frame], timeline: &DecisionTimeline) -> Result<(Vec<Frame>, Vec<usize>)> {
    if frames.len() != timeline.source_frames() {
        return Err(Error::TimelineMismatch(format!(
            "timeline covers {} source frames, video has {}",
            timeline.source_frames(),
            frames.len()
        )));
    }
    let indices = timeline.kept_indices();
    let kept = indices.iter().map(|&i| frames[i].clone()).collect();
    Ok((kept, indices))
}

/// Rebuilds a 120 fps clip from decimated frames by repeating each kept
/// frame across its decimation period. Kept source positions come back
/// bit-exact; dropped positions hold copies of the nearest earlier kept
/// frame.
pub fn duplicate_upsample(kept: &[Frame], timeline: &DecisionTimeline) -> Result<Vec<Frame>> {
    if kept.len() != timeline.kept_count() {
        return Err(Error::TimelineMismatch(format!(
            "timeline expects {} kept frames, got {}",
            timeline.kept_count(),
            kept.len()
        )));
    }
    let mut out = Vec::with_capacity(timeline.source_frames());
    let mut next = 0;
    for rate in timeline.rates() {
        let period = rate.period();
        for _ in 0..CHUNK_FRAMES / period {
            for _ in 0..period {
                out.push(kept[next].clone());
            }
            next += 1;
        }
    }
    out.extend(kept[next..].iter().cloned());
    debug_assert_eq!(out.len(), timeline.source_frames());
    Ok(out)
}

/// Hierarchical-B GOP-16 structure with a fixed intra refresh.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GopPlan {
    pub gop_size: usize,
    /// Frames between intra pictures; a multiple of the GOP size, default
    /// 112 (close to one second at 120 fps).
    pub intra_period: usize,
}

impl Default for GopPlan {
    fn default() -> Self {
        GopPlan {
            gop_size: 16,
            intra_period: 112,
        }
    }
}

impl GopPlan {
    pub fn validated(self) -> Result<Self> {
        if self.gop_size != 16 {
            return Err(Error::InvalidConfig(
                "only the 16-frame hierarchical-B GOP is modelled".into(),
            ));
        }
        if self.intra_period == 0 || self.intra_period % self.gop_size != 0 {
            return Err(Error::InvalidConfig(format!(
                "intra period {} is not a positive multiple of the GOP size",
                self.intra_period
            )));
        }
        Ok(self)
    }

    /// Temporal layer of a picture: GOP anchors are layer 0, odd positions
    /// the top layer 4, with the dyadic levels in between.
    pub fn temporal_layer(&self, poc: usize) -> usize {
        let r = poc % self.gop_size;
        if r == 0 {
            0
        } else {
            4 - r.trailing_zeros() as usize
        }
    }

    /// Pictures this POC predicts from under dyadic hierarchical-B coding.
    /// Intra pictures reference nothing; anchors reference the previous
    /// anchor; everything else references its two dyadic neighbours.
    pub fn references(&self, poc: usize) -> Vec<usize> {
        if poc % self.intra_period == 0 {
            return Vec::new();
        }
        let r = poc % self.gop_size;
        if r == 0 {
            vec![poc - self.gop_size]
        } else {
            let v = 1 << r.trailing_zeros();
            vec![poc - v, poc + v]
        }
    }
}

/// A kept picture whose reference was dropped; encoding the plan as-is would
/// break prediction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReferenceViolation {
    pub poc: usize,
    pub missing_reference: usize,
}

/// Checks that every kept picture can still be predicted: all its references
/// inside the coded range must themselves be kept. References beyond the
/// last frame (truncated final GOP) are ignored.
pub fn legality_violations(
    kept_pocs: &[usize],
    total_frames: usize,
    plan: &GopPlan,
) -> Vec<ReferenceViolation> {
    let kept: BTreeSet<usize> = kept_pocs.iter().copied().collect();
    let mut violations = Vec::new();
    for &poc in &kept {
        for r in plan.references(poc) {
            if r < total_frames && !kept.contains(&r) {
                violations.push(ReferenceViolation {
                    poc,
                    missing_reference: r,
                });
            }
        }
    }
    violations
}

/// The encoder-facing view of a timeline: which picture order counts to
/// code, and any reference breakage (none can arise from 4-aligned chunk
/// decisions; the field exists so foreign plans can be audited).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GopSkipPlan {
    pub kept_pocs: Vec<usize>,
    pub violations: Vec<ReferenceViolation>,
}

pub fn gop_skip_plan(timeline: &DecisionTimeline, plan: &GopPlan) -> Result<GopSkipPlan> {
    let plan = plan.validated()?;
    let kept_pocs = timeline.kept_indices();
    let violations = legality_violations(&kept_pocs, timeline.source_frames(), &plan);
    debug_assert!(
        violations.is_empty(),
        "4-aligned chunk decisions cannot break dyadic references"
    );
    Ok(GopSkipPlan {
        kept_pocs,
        violations,
    })
}

/// Frames-dropped accounting for a timeline.
///
/// The percentage counts frames only; bit-rate savings of a real encoder run
/// below it, because the dropped upper-layer pictures are the cheapest to
/// code.
#[derive(Debug, Clone, PartialEq)]
pub struct SavingsReport {
    pub source_frames: usize,
    pub kept_frames: usize,
    pub dropped_frames: usize,
    /// `dropped_frames / source_frames`, in [0, 0.75].
    pub dropped_fraction: f64,
    /// Chunk counts per decision, indexed like [`FrameRate::ALL`].
    pub chunks_per_rate: [usize; 3],
    pub tail_frames: usize,
}

pub fn frames_dropped_report(timeline: &DecisionTimeline) -> SavingsReport {
    let mut chunks_per_rate = [0usize; 3];
    for rate in timeline.rates() {
        let slot = FrameRate::ALL.iter().position(|r| r == rate).unwrap();
        chunks_per_rate[slot] += 1;
    }
    let kept = timeline.kept_count();
    let dropped = timeline.source_frames() - kept;
    let fraction = if timeline.source_frames() == 0 {
        0.0
    } else {
        dropped as f64 / timeline.source_frames() as f64
    };
    SavingsReport {
        source_frames: timeline.source_frames(),
        kept_frames: kept,
        dropped_frames: dropped,
        dropped_fraction: fraction,
        chunks_per_rate,
        tail_frames: timeline.tail_len(),
    }
}

/// Writes a timeline as `chunk_index,start_frame,fps` rows.
pub fn write_timeline_csv<P: AsRef<Path>>(path: P, timeline: &DecisionTimeline) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("chunk_index,start_frame,fps\n");
    for e in timeline.entries() {
        out.push_str(&format!("{},{},{}\n", e.chunk_index, e.start_frame, e.rate));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads a timeline CSV. The file format does not carry the source frame
/// count, so callers that know it (from the source video) pass it in;
/// `None` assumes the chunks cover the clip exactly, with no tail.
pub fn read_timeline_csv<P: AsRef<Path>>(
    path: P,
    source_frames: Option<usize>,
) -> Result<DecisionTimeline> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    match lines.next() {
        Some("chunk_index,start_frame,fps") => {}
        other => {
            return Err(Error::DataFormat(format!(
                "{}: bad timeline header {:?}",
                path.display(),
                other.unwrap_or("")
            )))
        }
    }
    let mut rates = Vec::new();
    for (i, line) in lines.enumerate() {
        let mut fields = line.split(',');
        let (a, b, c) = match (fields.next(), fields.next(), fields.next(), fields.next()) {
            (Some(a), Some(b), Some(c), None) => (a, b, c),
            _ => {
                return Err(Error::DataFormat(format!(
                    "{}: row {} needs exactly 3 fields",
                    path.display(),
                    i + 2
                )))
            }
        };
        let parse = |s: &str, what: &str| -> Result<usize> {
            s.parse().map_err(|_| {
                Error::DataFormat(format!("{}: row {}: bad {what} '{s}'", path.display(), i + 2))
            })
        };
        let chunk_index = parse(a, "chunk_index")?;
        let start_frame = parse(b, "start_frame")?;
        if chunk_index != i {
            return Err(Error::DataFormat(format!(
                "{}: chunk indices must be contiguous from 0, row {} has {chunk_index}",
                path.display(),
                i + 2
            )));
        }
        if start_frame != i * CHUNK_FRAMES {
            return Err(Error::DataFormat(format!(
                "{}: chunk {chunk_index} starts at frame {start_frame}, expected {}",
                path.display(),
                i * CHUNK_FRAMES
            )));
        }
        let fps: u32 = c.parse().map_err(|_| {
            Error::DataFormat(format!("{}: row {}: bad fps '{c}'", path.display(), i + 2))
        })?;
        rates.push(FrameRate::from_fps(fps)?);
    }
    let source = source_frames.unwrap_or(rates.len() * CHUNK_FRAMES);
    DecisionTimeline::new(rates, source)
}

/// Renders the decision staircase (chunk index against decided rate) as a
/// small standalone SVG.
pub fn write_timeline_svg<P: AsRef<Path>>(path: P, timeline: &DecisionTimeline) -> Result<()> {
    let path = path.as_ref();
    let n = timeline.n_chunks().max(1);
    let (w, h) = (720.0f64, 240.0f64);
    let (ml, mr, mt, mb) = (50.0, 10.0, 10.0, 30.0);
    let plot_w = w - ml - mr;
    let plot_h = h - mt - mb;
    let x = |chunk: f64| ml + plot_w * chunk / n as f64;
    let y = |fps: f64| mt + plot_h * (1.0 - fps / 120.0);

    let mut points = Vec::new();
    for e in timeline.entries() {
        let fy = y(e.rate.fps() as f64);
        points.push(format!("{:.1},{:.1}", x(e.chunk_index as f64), fy));
        points.push(format!("{:.1},{:.1}", x(e.chunk_index as f64 + 1.0), fy));
    }
    let polyline = points.join(" ");

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n"
    ));
    svg.push_str(&format!(
        "  <rect x=\"0\" y=\"0\" width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n"
    ));
    for fps in [30u32, 60, 120] {
        let gy = y(fps as f64);
        svg.push_str(&format!(
            "  <line x1=\"{ml}\" y1=\"{gy:.1}\" x2=\"{:.1}\" y2=\"{gy:.1}\" stroke=\"#ddd\"/>\n",
            w - mr
        ));
        svg.push_str(&format!(
            "  <text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"end\">{fps} fps</text>\n",
            ml - 6.0,
            gy + 4.0
        ));
    }
    svg.push_str(&format!(
        "  <text x=\"{:.1}\" y=\"{:.1}\" font-size=\"12\" text-anchor=\"middle\">chunk</text>\n",
        ml + plot_w / 2.0,
        h - 8.0
    ));
    if !polyline.is_empty() {
        svg.push_str(&format!(
            "  <polyline points=\"{polyline}\" fill=\"none\" stroke=\"#0066cc\" stroke-width=\"2\"/>\n"
        ));
    }
    svg.push_str("</svg>\n");
    std::fs::write(path, svg).map_err(|e| Error::io(path, e))
}
