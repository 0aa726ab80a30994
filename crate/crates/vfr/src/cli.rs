//! Command-line front end. Each subcommand wraps one library workflow and
//! is deterministic given its inputs, the config file and the seed.

use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cascade::{
    build_training_sets, train_cascade, training_data_from_records, CascadeModel,
    CascadeTrainConfig, CLF1_CLASSES, CLF2_CLASSES,
};
use crate::error::{Error, Result};
use crate::features::{
    extract_chunk_features, read_features_csv, write_features_csv, FeatureConfig, FeatureRecord,
    FEATURE_COUNT, FEATURE_NAMES,
};
use crate::forest::{train_forest, Dataset};
use crate::model_selection::{
    kfold_cv, macro_metrics, rfe, write_curve_csv, write_reports_csv, ConfusionMatrix, EvalReport,
};
use crate::pipeline::{
    decide_sequence_timed, decimate, duplicate_upsample, frames_dropped_report, read_timeline_csv,
    timeline_for_kept_count, write_timeline_csv, write_timeline_svg,
};
use crate::rate::FrameRate;
use crate::subjective::{dmos_table, pairwise_table, write_dmos_csv, write_pairwise_csv, ScoreTable};
use crate::video_io::{chunk_frames, read_yuv, write_yuv};

/// Forest size of one cascade stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StageParams {
    pub n_trees: usize,
    pub max_depth: usize,
}

/// Everything a run needs besides its input files. Loaded from a TOML file,
/// overridable by flags; a saved config plus the inputs reproduces any
/// output byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Luma width of every raw video given to the run. Geometry is never
    /// inferred from file names.
    pub width: usize,
    pub height: usize,
    /// Master seed; every random choice of a run derives from it.
    pub seed: u64,
    /// Folds for the cross-validated reports of train and select-features.
    pub folds: usize,
    /// Smallest feature-set size the elimination search may reach.
    pub min_features: usize,
    pub features: FeatureConfig,
    pub stage1: StageParams,
    pub stage2: StageParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            width: 1920,
            height: 1080,
            seed: 0,
            folds: 5,
            min_features: 2,
            features: FeatureConfig::default(),
            stage1: StageParams {
                n_trees: 200,
                max_depth: 7,
            },
            stage2: StageParams {
                n_trees: 100,
                max_depth: 7,
            },
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.width == 0 || self.height == 0 || self.width % 2 != 0 || self.height % 2 != 0 {
            return bad(format!(
                "geometry {}x{} must be nonzero and even for 4:2:0 video",
                self.width, self.height
            ));
        }
        if self.folds < 2 {
            return bad(format!("{} folds cannot cross-validate", self.folds));
        }
        if self.min_features == 0 || self.min_features > FEATURE_COUNT {
            return bad(format!(
                "min_features {} must be in 1..={FEATURE_COUNT}",
                self.min_features
            ));
        }
        if self.features.block_size == 0 {
            return bad("block_size must be positive".into());
        }
        if self.features.search_range < 0 {
            return bad("search_range cannot be negative".into());
        }
        if !self.features.diff_threshold.is_finite() || self.features.diff_threshold < 0.0 {
            return bad(format!(
                "diff_threshold {} must be finite and nonnegative",
                self.features.diff_threshold
            ));
        }
        for (name, stage) in [("stage1", self.stage1), ("stage2", self.stage2)] {
            if stage.n_trees == 0 || stage.max_depth == 0 {
                return bad(format!("{name} needs at least one tree and depth 1"));
            }
        }
        Ok(())
    }

    /// Training configuration with every seed derived from the master seed.
    pub fn cascade_config(&self) -> CascadeTrainConfig {
        let mut cfg = CascadeTrainConfig::with_seed(self.seed);
        cfg.forest1.n_trees = self.stage1.n_trees;
        cfg.forest1.max_depth = self.stage1.max_depth;
        cfg.forest2.n_trees = self.stage2.n_trees;
        cfg.forest2.max_depth = self.stage2.max_depth;
        cfg
    }

    pub fn load<P: AsRef<Path>>(path: P) -> Result<RunConfig> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text)
            .map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))
    }
}

#[derive(Parser)]
#[command(
    name = "vfr",
    version,
    about = "Per-chunk frame-rate decisions for 120 fps video",
    propagate_version = true
)]
pub struct Cli {
    /// TOML run configuration; the flags below override its values.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Master seed override.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Video luma width override.
    #[arg(long, global = true)]
    pub width: Option<usize>,
    /// Video luma height override.
    #[arg(long, global = true)]
    pub height: Option<usize>,
    /// Pixel-difference activation threshold override.
    #[arg(long, global = true)]
    pub threshold: Option<f64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand)]
pub enum Command {
    /// Compute per-chunk feature vectors from a raw 4:2:0 video.
    Extract(ExtractArgs),
    /// Train the two-stage cascade from labelled feature tables.
    Train(TrainArgs),
    /// Run recursive feature elimination for both cascade stages.
    SelectFeatures(SelectFeaturesArgs),
    /// Decide a frame-rate for every 4-frame chunk of a video.
    Predict(PredictArgs),
    /// Drop frames according to a decision timeline.
    Decimate(DecimateArgs),
    /// Rebuild a 120 fps clip from a decimated one by frame duplication.
    Upsample(UpsampleArgs),
    /// Compare a predicted timeline against ground truth.
    Evaluate(EvaluateArgs),
    /// Summarize the frame savings of a timeline.
    Report(ReportArgs),
    /// Compute DMOS values and pairwise t-tests from a score sheet.
    Stats(StatsArgs),
}

#[derive(Args)]
pub struct ExtractArgs {
    /// Planar YUV 4:2:0 input video.
    #[arg(long)]
    pub video: PathBuf,
    /// Output feature CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Timeline CSV with ground-truth rates; adds a label column.
    #[arg(long)]
    pub labels: Option<PathBuf>,
}

#[derive(Args)]
pub struct TrainArgs {
    /// Labelled feature CSVs, typically one per clip.
    #[arg(long, required = true, num_args = 1..)]
    pub features: Vec<PathBuf>,
    /// Output model file (JSON).
    #[arg(long)]
    pub model_out: PathBuf,
    /// Also write a cross-validation report covering both stages.
    #[arg(long)]
    pub cv_report: Option<PathBuf>,
}

#[derive(Args)]
pub struct SelectFeaturesArgs {
    /// Labelled feature CSVs.
    #[arg(long, required = true, num_args = 1..)]
    pub features: Vec<PathBuf>,
    /// Directory receiving the curves and the chosen feature sets.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Args)]
pub struct PredictArgs {
    /// Planar YUV 4:2:0 input video.
    #[arg(long)]
    pub video: PathBuf,
    /// Trained cascade model.
    #[arg(long)]
    pub model: PathBuf,
    /// Output timeline CSV.
    #[arg(long)]
    pub timeline_out: PathBuf,
    /// Optional decision staircase plot (SVG).
    #[arg(long)]
    pub plot_out: Option<PathBuf>,
}

#[derive(Args)]
pub struct DecimateArgs {
    /// Planar YUV 4:2:0 input video.
    #[arg(long)]
    pub video: PathBuf,
    /// Decision timeline CSV for this video.
    #[arg(long)]
    pub timeline: PathBuf,
    /// Output video holding only the kept frames.
    #[arg(long)]
    pub out: PathBuf,
    /// Optional sidecar CSV mapping kept positions to source frames.
    #[arg(long)]
    pub sidecar_out: Option<PathBuf>,
}

#[derive(Args)]
pub struct UpsampleArgs {
    /// Decimated video produced under the given timeline.
    #[arg(long)]
    pub video: PathBuf,
    /// Decision timeline CSV the video was decimated with.
    #[arg(long)]
    pub timeline: PathBuf,
    /// Output 120 fps video.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct EvaluateArgs {
    /// Predicted timeline CSV.
    #[arg(long)]
    pub predictions: PathBuf,
    /// Ground-truth timeline CSV.
    #[arg(long)]
    pub truth: PathBuf,
    /// Optional metrics CSV (metric,value rows).
    #[arg(long)]
    pub report_out: Option<PathBuf>,
    /// Optional confusion matrix CSV (counts).
    #[arg(long)]
    pub confusion_out: Option<PathBuf>,
}

#[derive(Args)]
pub struct ReportArgs {
    /// Decision timeline CSV.
    #[arg(long)]
    pub timeline: PathBuf,
    /// Source frame count, needed only when the clip has tail frames the
    /// timeline cannot describe.
    #[arg(long)]
    pub source_frames: Option<usize>,
}

#[derive(Args)]
pub struct StatsArgs {
    /// Score sheet CSV (observer,sequence,condition,score).
    #[arg(long)]
    pub scores: PathBuf,
    /// Directory receiving dmos.csv and pvalues.csv.
    #[arg(long)]
    pub out_dir: PathBuf,
}

/// Parses the command line, runs it and returns the process exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.class());
            e.exit_code()
        }
    }
}

pub fn execute(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(width) = cli.width {
        cfg.width = width;
    }
    if let Some(height) = cli.height {
        cfg.height = height;
    }
    if let Some(threshold) = cli.threshold {
        cfg.features.diff_threshold = threshold;
    }
    cfg.validate()?;
    match &cli.command {
        Command::Extract(args) => cmd_extract(&cfg, args),
        Command::Train(args) => cmd_train(&cfg, args),
        Command::SelectFeatures(args) => cmd_select_features(&cfg, args),
        Command::Predict(args) => cmd_predict(&cfg, args),
        Command::Decimate(args) => cmd_decimate(&cfg, args),
        Command::Upsample(args) => cmd_upsample(&cfg, args),
        Command::Evaluate(args) => cmd_evaluate(&cfg, args),
        Command::Report(args) => cmd_report(&cfg, args),
        Command::Stats(args) => cmd_stats(&cfg, args),
    }
}

pub fn cmd_extract(cfg: &RunConfig, args: &ExtractArgs) -> Result<()> {
    let frames = read_yuv(&args.video, cfg.width, cfg.height)?;
    let (chunks, tail) = chunk_frames(&frames);
    let labels: Option<Vec<FrameRate>> = match &args.labels {
        Some(path) => {
            let timeline = read_timeline_csv(path, None)?;
            if timeline.n_chunks() != chunks.len() {
                return Err(Error::TimelineMismatch(format!(
                    "label timeline has {} chunks, video has {}",
                    timeline.n_chunks(),
                    chunks.len()
                )));
            }
            Some(timeline.rates().to_vec())
        }
        None => None,
    };
    let vectors: Vec<[f64; FEATURE_COUNT]> = chunks
        .par_iter()
        .map(|chunk| extract_chunk_features(chunk, &cfg.features))
        .collect::<Result<_>>()?;
    let records: Vec<FeatureRecord> = vectors
        .into_iter()
        .enumerate()
        .map(|(i, v)| FeatureRecord {
            chunk_index: i,
            features: v.to_vec(),
            label: labels.as_ref().map(|l| l[i]),
        })
        .collect();
    write_features_csv(&args.out, &records)?;
    println!(
        "extracted {} chunks ({} tail frames skipped) -> {}",
        records.len(),
        tail.len(),
        args.out.display()
    );
    Ok(())
}

fn read_labelled_rows(paths: &[PathBuf]) -> Result<(Vec<Vec<f64>>, Vec<FrameRate>)> {
    let mut records = Vec::new();
    for path in paths {
        records.extend(read_features_csv(path)?);
    }
    training_data_from_records(&records)
}

pub fn cmd_train(cfg: &RunConfig, args: &TrainArgs) -> Result<()> {
    let (rows, labels) = read_labelled_rows(&args.features)?;
    let train_cfg = cfg.cascade_config();
    let model = train_cascade(&rows, &labels, &train_cfg)?;
    model.save(&args.model_out)?;
    println!(
        "trained cascade on {} chunks -> {}",
        rows.len(),
        args.model_out.display()
    );
    if let Some(report_path) = &args.cv_report {
        let sets = build_training_sets(&rows, &labels, cfg.seed)?;
        let mut report_rows: Vec<(String, EvalReport)> = Vec::new();
        for (stage, data, classes, forest_cfg) in [
            ("stage1", &sets.ds1, CLF1_CLASSES, &train_cfg.forest1),
            ("stage2", &sets.ds2, CLF2_CLASSES, &train_cfg.forest2),
        ] {
            // class 0 is always the higher rate, class 1 the lower
            let cv = kfold_cv(data, cfg.folds, classes, 1, 0, |d: &Dataset| {
                train_forest(d, forest_cfg)
            })?;
            for (i, fold) in cv.fold_reports.iter().enumerate() {
                report_rows.push((format!("{stage} fold{i}"), fold.clone()));
            }
            report_rows.push((format!("{stage} pooled"), cv.pooled_report.clone()));
        }
        write_reports_csv(report_path, &report_rows)?;
        println!("cross-validation report -> {}", report_path.display());
    }
    Ok(())
}

pub fn cmd_select_features(cfg: &RunConfig, args: &SelectFeaturesArgs) -> Result<()> {
    let (rows, labels) = read_labelled_rows(&args.features)?;
    let sets = build_training_sets(&rows, &labels, cfg.seed)?;
    std::fs::create_dir_all(&args.out_dir).map_err(|e| Error::io(&args.out_dir, e))?;
    let train_cfg = cfg.cascade_config();
    let all: Vec<usize> = (0..FEATURE_COUNT).collect();
    let mut selected = String::from("stage,feature_index,feature_name\n");
    for (stage, data, classes, forest_cfg) in [
        ("stage1", &sets.ds1, CLF1_CLASSES, &train_cfg.forest1),
        ("stage2", &sets.ds2, CLF2_CLASSES, &train_cfg.forest2),
    ] {
        let result = rfe(
            data,
            &all,
            cfg.min_features,
            cfg.folds,
            classes,
            1,
            0,
            (1.0, 1.0),
            |d: &Dataset| train_forest(d, forest_cfg),
        )?;
        let curve_path = args.out_dir.join(format!("rfe_{stage}.csv"));
        write_curve_csv(&curve_path, &result.curve)?;
        for &f in &result.best_features {
            selected.push_str(&format!("{stage},{f},{}\n", FEATURE_NAMES[f]));
        }
        println!(
            "{stage}: kept {} of {FEATURE_COUNT} features (score {:.4}) -> {}",
            result.best_features.len(),
            result.best_score,
            curve_path.display()
        );
    }
    let selected_path = args.out_dir.join("selected_features.csv");
    std::fs::write(&selected_path, selected).map_err(|e| Error::io(&selected_path, e))?;
    println!("chosen feature sets -> {}", selected_path.display());
    Ok(())
}

pub fn cmd_predict(cfg: &RunConfig, args: &PredictArgs) -> Result<()> {
    let frames = read_yuv(&args.video, cfg.width, cfg.height)?;
    let model = CascadeModel::load(&args.model)?;
    if model.input_dim() != FEATURE_COUNT {
        return Err(Error::DataFormat(format!(
            "model expects {} features, this build extracts {FEATURE_COUNT}",
            model.input_dim()
        )));
    }
    let (timeline, times) = decide_sequence_timed(&frames, &model, &cfg.features)?;
    write_timeline_csv(&args.timeline_out, &timeline)?;
    if let Some(plot) = &args.plot_out {
        write_timeline_svg(plot, &timeline)?;
    }
    let per_rate: Vec<String> = FrameRate::ALL
        .iter()
        .map(|r| {
            let n = timeline.rates().iter().filter(|&x| x == r).count();
            format!("{n} at {r} fps")
        })
        .collect();
    println!(
        "decided {} chunks ({}); {} tail frames -> {}",
        timeline.n_chunks(),
        per_rate.join(", "),
        timeline.tail_len(),
        args.timeline_out.display()
    );
    if !times.is_empty() {
        let ms = |d: &Duration| d.as_secs_f64() * 1e3;
        let mean = times.iter().map(ms).sum::<f64>() / times.len() as f64;
        let max = times.iter().map(ms).fold(0.0, f64::max);
        println!(
            "latency: mean {mean:.2} ms/chunk, max {max:.2} ms ({}x{} source)",
            cfg.width, cfg.height
        );
    }
    Ok(())
}

pub fn cmd_decimate(cfg: &RunConfig, args: &DecimateArgs) -> Result<()> {
    let frames = read_yuv(&args.video, cfg.width, cfg.height)?;
    let timeline = read_timeline_csv(&args.timeline, Some(frames.len()))?;
    let (kept, indices) = decimate(&frames, &timeline)?;
    write_yuv(&args.out, &kept)?;
    if let Some(sidecar) = &args.sidecar_out {
        let mut out = String::from("kept_position,source_frame\n");
        for (pos, src) in indices.iter().enumerate() {
            out.push_str(&format!("{pos},{src}\n"));
        }
        std::fs::write(sidecar, out).map_err(|e| Error::io(sidecar, e))?;
    }
    println!(
        "kept {} of {} frames -> {}",
        kept.len(),
        frames.len(),
        args.out.display()
    );
    Ok(())
}

pub fn cmd_upsample(cfg: &RunConfig, args: &UpsampleArgs) -> Result<()> {
    let kept = read_yuv(&args.video, cfg.width, cfg.height)?;
    let rates = read_timeline_csv(&args.timeline, None)?.rates().to_vec();
    let timeline = timeline_for_kept_count(rates, kept.len())?;
    let full = duplicate_upsample(&kept, &timeline)?;
    write_yuv(&args.out, &full)?;
    println!(
        "upsampled {} frames to {} -> {}",
        kept.len(),
        full.len(),
        args.out.display()
    );
    Ok(())
}

pub fn cmd_evaluate(_cfg: &RunConfig, args: &EvaluateArgs) -> Result<()> {
    let pred = read_timeline_csv(&args.predictions, None)?;
    let truth = read_timeline_csv(&args.truth, None)?;
    if pred.n_chunks() != truth.n_chunks() {
        return Err(Error::TimelineMismatch(format!(
            "{} predicted chunks vs {} ground-truth chunks",
            pred.n_chunks(),
            truth.n_chunks()
        )));
    }
    let index_of = |r: FrameRate| FrameRate::ALL.iter().position(|&x| x == r).unwrap();
    let truth_idx: Vec<usize> = truth.rates().iter().map(|&r| index_of(r)).collect();
    let pred_idx: Vec<usize> = pred.rates().iter().map(|&r| index_of(r)).collect();
    let classes = ["30fps", "60fps", "120fps"];
    let cm = ConfusionMatrix::from_predictions(&classes, &truth_idx, &pred_idx)?;
    let (precision, recall, f1) = macro_metrics(&cm);
    let n = truth_idx.len();
    let correct = truth_idx
        .iter()
        .zip(&pred_idx)
        .filter(|(t, p)| t == p)
        .count();
    // predicting below the true rate risks visible artifacts
    let critical = truth
        .rates()
        .iter()
        .zip(pred.rates())
        .filter(|(t, p)| p < t)
        .count();
    let accuracy = correct as f64 / n as f64;
    let critical_rate = critical as f64 / n as f64;
    if let Some(path) = &args.confusion_out {
        cm.write_csv(path, false)?;
    }
    if let Some(path) = &args.report_out {
        let mut out = String::from("metric,value\n");
        for (name, value) in [
            ("accuracy", accuracy),
            ("macro_precision", precision),
            ("macro_recall", recall),
            ("macro_f1", f1),
            ("critical_error_rate", critical_rate),
        ] {
            out.push_str(&format!("{name},{value:.6}\n"));
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))?;
    }
    println!(
        "accuracy {accuracy:.4}, macro precision {precision:.4}, macro recall {recall:.4}, \
         macro f1 {f1:.4}, critical errors {critical_rate:.4} ({critical} of {n} chunks)"
    );
    Ok(())
}

pub fn cmd_report(_cfg: &RunConfig, args: &ReportArgs) -> Result<()> {
    let timeline = read_timeline_csv(&args.timeline, args.source_frames)?;
    let report = frames_dropped_report(&timeline);
    println!(
        "frames dropped: {:.1}% ({} of {})",
        report.dropped_fraction * 100.0,
        report.dropped_frames,
        report.source_frames
    );
    let per_rate: Vec<String> = FrameRate::ALL
        .iter()
        .zip(report.chunks_per_rate)
        .map(|(r, n)| format!("{n} at {r} fps"))
        .collect();
    println!(
        "chunks: {}; tail frames: {}",
        per_rate.join(", "),
        report.tail_frames
    );
    Ok(())
}

pub fn cmd_stats(_cfg: &RunConfig, args: &StatsArgs) -> Result<()> {
    let table = ScoreTable::read_csv(&args.scores)?;
    std::fs::create_dir_all(&args.out_dir).map_err(|e| Error::io(&args.out_dir, e))?;
    let rows = dmos_table(&table)?;
    let dmos_path = args.out_dir.join("dmos.csv");
    write_dmos_csv(&dmos_path, &rows)?;
    let mut cells = Vec::new();
    for sequence in table.sequences() {
        cells.extend(pairwise_table(&table, &sequence)?);
    }
    let p_path = args.out_dir.join("pvalues.csv");
    write_pairwise_csv(&p_path, &cells)?;
    for row in &rows {
        println!(
            "{} {}: dmos {:.1} (ci95 {:.1}, n {})",
            row.sequence, row.condition, row.dmos.value, row.dmos.ci95, row.dmos.n
        );
    }
    println!(
        "{} dmos rows -> {}; {} t-test cells -> {}",
        rows.len(),
        dmos_path.display(),
        cells.len(),
        p_path.display()
    );
    Ok(())
}
