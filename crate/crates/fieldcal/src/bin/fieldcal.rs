//! Command-line front end: dictionary building, per-frame calibration,
//! player localization, top-view rendering, evaluation, and synthetic
//! data generation.
//!
//! Exit codes: 0 success, 2 malformed input, 3 no usable result,
//! 4 I/O failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use fieldcal::calibrate::{calibrate_frame, CalibrateOpts};
use fieldcal::dictionary::build_dictionary;
use fieldcal::eval::{average_map, iou_pair, GroundTruthAction, IouReport, SpottingPrediction};
use fieldcal::field::standard_field;
use fieldcal::formats::{
    load_dictionary, load_segmentation_png, read_doc, save_dictionary, save_segmentation_png,
    save_top_view, write_doc, AnnotationsFile, CalibrationFile, DetectionsFile, FormatError,
    FrameRecord, GraphFrame, GraphsFile, LocalizationFrame, LocalizationsFile, PredictionsFile,
    FORMAT_VERSION,
};
use fieldcal::geometry::{visible_field_polygon, ImageFrame};
use fieldcal::localization::{build_player_graph, localize, LocalizationError};
use fieldcal::raster::{
    render_binary_channels, render_color_composition, TopViewSpec,
};
use fieldcal::synth::{generate_scene, SceneParams};

#[derive(Parser)]
#[command(name = "fieldcal", version, about = "Soccer broadcast camera calibration toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct FrameDims {
    /// Frame width in pixels.
    #[arg(long, default_value_t = 480)]
    width: u32,
    /// Frame height in pixels.
    #[arg(long, default_value_t = 270)]
    height: u32,
}

#[derive(Subcommand)]
enum Command {
    /// Cluster training homographies into a template dictionary.
    BuildDict {
        /// Calibration file providing training homographies.
        #[arg(long)]
        train: PathBuf,
        /// Output dictionary directory.
        #[arg(long)]
        out: PathBuf,
        /// Smallest mode count to consider.
        #[arg(long, default_value_t = 1)]
        k_min: usize,
        /// Largest mode count to consider.
        #[arg(long, default_value_t = 30)]
        k_max: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        dims: FrameDims,
    },
    /// Calibrate zone-segmentation frames against a dictionary.
    Calibrate {
        /// Dictionary directory from build-dict.
        #[arg(long)]
        dict: PathBuf,
        /// Directory of seg_NNNNNN.png label images.
        #[arg(long)]
        segs: PathBuf,
        /// Output calibration file.
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; output is identical for any value.
        #[arg(long, default_value_t = 0)]
        threads: usize,
        #[arg(long, default_value = "synth")]
        game_id: String,
        #[arg(long, default_value_t = 1)]
        half: u8,
    },
    /// Map detections to field positions through calibrations.
    Localize {
        #[arg(long)]
        calib: PathBuf,
        #[arg(long)]
        detections: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        dims: FrameDims,
    },
    /// Build proximity graphs from localizations.
    Graph {
        #[arg(long)]
        localizations: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render top-view images from calibrations and localizations.
    RenderTopview {
        #[arg(long)]
        calib: PathBuf,
        #[arg(long)]
        localizations: PathBuf,
        /// Output directory of topview_NNNNNN.png images.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = ModeArg::Cc)]
        mode: ModeArg,
        /// With --mode bc, write three 1-bit PNGs per frame instead of
        /// one RGB image with values {0, 255}.
        #[arg(long)]
        split_bits: bool,
        #[command(flatten)]
        dims: FrameDims,
    },
    /// Compare predicted calibrations against ground truth.
    EvalCalib {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[command(flatten)]
        dims: FrameDims,
    },
    /// Average-mAP of action-spotting predictions.
    EvalSpotting {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        /// Tolerance margins in seconds, as start:end:step.
        #[arg(long, default_value = "5:60:5")]
        margins: String,
    },
    /// Generate synthetic frames: segmentations, detections, truth.
    Synth {
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        frames: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Border label-noise probability and box jitter scale.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = 12)]
        players: usize,
        #[command(flatten)]
        dims: FrameDims,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    /// Color composition.
    Cc,
    /// Binary channels.
    Bc,
}

enum CliError {
    Format(FormatError),
    NoResult(String),
    Invalid(String),
    Io(String),
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        Self::Format(e)
    }
}

impl CliError {
    fn report(&self) -> (i32, String) {
        match self {
            CliError::Format(e) => (e.exit_code(), e.to_string()),
            CliError::NoResult(m) => (3, m.clone()),
            CliError::Invalid(m) => (2, m.clone()),
            CliError::Io(m) => (4, m.clone()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (code, msg) = e.report();
            eprintln!("fieldcal: {msg}");
            ExitCode::from(code as u8)
        }
    }
}

fn run(cmd: Command) -> Result<(), CliError> {
    let field = standard_field();
    match cmd {
        Command::BuildDict {
            train,
            out,
            k_min,
            k_max,
            seed,
            dims,
        } => {
            let doc: CalibrationFile = read_doc(&train)?;
            let homographies: Vec<_> = doc
                .frames
                .iter()
                .filter(|f| f.relevance == 1)
                .map(|f| f.to_result().map(|r| r.homography))
                .collect::<Result<_, _>>()
                .map_err(|e| CliError::Invalid(format!("{}: {e}", train.display())))?;
            if homographies.is_empty() {
                return Err(CliError::NoResult(format!(
                    "{}: no relevant training frames",
                    train.display()
                )));
            }
            let frame = ImageFrame::new(dims.width, dims.height);
            let dict = build_dictionary(&homographies, &frame, &field, (k_min, k_max), seed)
                .map_err(|e| CliError::Invalid(e.to_string()))?;
            save_dictionary(&out, &dict)?;
            println!("dictionary: {} templates -> {}", dict.entries.len(), out.display());
            Ok(())
        }
        Command::Calibrate {
            dict,
            segs,
            out,
            threads,
            game_id,
            half,
        } => {
            let dict = load_dictionary(&dict)?;
            let mut paths = list_segs(&segs)?;
            paths.sort();
            if paths.is_empty() {
                return Err(CliError::NoResult(format!(
                    "{}: no seg_*.png inputs",
                    segs.display()
                )));
            }
            let inputs: Vec<(u64, fieldcal::raster::ZoneSegmentation)> = paths
                .iter()
                .map(|(idx, p)| load_segmentation_png(p).map(|s| (*idx, s)))
                .collect::<Result<_, _>>()?;
            let opts = CalibrateOpts::default();
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .map_err(|e| CliError::Io(e.to_string()))?;
            // Order-preserving parallel map keeps the output independent
            // of the thread count.
            let frames: Vec<FrameRecord> = pool.install(|| {
                inputs
                    .par_iter()
                    .map(|(idx, seg)| {
                        let frame = ImageFrame::new(seg.width_px, seg.height_px);
                        calibrate_frame(seg, &dict, &frame, &field, &opts)
                            .map(|r| FrameRecord::from_result(&game_id, half, *idx, &r))
                            .map_err(|e| CliError::Invalid(e.to_string()))
                    })
                    .collect::<Result<_, _>>()
            })?;
            write_doc(
                &out,
                &CalibrationFile {
                    version: FORMAT_VERSION,
                    frames,
                },
            )?;
            println!("calibrated {} frames -> {}", inputs.len(), out.display());
            Ok(())
        }
        Command::Localize {
            calib,
            detections,
            out,
            dims,
        } => {
            let calib: CalibrationFile = read_doc(&calib)?;
            let dets: DetectionsFile = read_doc(&detections)?;
            let frame = ImageFrame::new(dims.width, dims.height);
            let mut frames = Vec::new();
            for df in &dets.frames {
                let Some(cf) = calib.frames.iter().find(|f| {
                    f.game_id == df.game_id && f.half == df.half && f.frame_index == df.frame_index
                }) else {
                    continue;
                };
                let result = cf
                    .to_result()
                    .map_err(|e| CliError::Invalid(e.to_string()))?;
                let players = match localize(&df.detections, &result, &frame, &field) {
                    Ok(p) => p,
                    Err(LocalizationError::Uncalibrated) => continue,
                };
                frames.push(LocalizationFrame {
                    game_id: df.game_id.clone(),
                    half: df.half,
                    frame_index: df.frame_index,
                    players,
                });
            }
            if frames.is_empty() {
                return Err(CliError::NoResult(
                    "no frames with both detections and a relevant calibration".into(),
                ));
            }
            let n = frames.len();
            write_doc(
                &out,
                &LocalizationsFile {
                    version: FORMAT_VERSION,
                    frames,
                },
            )?;
            println!("localized {n} frames -> {}", out.display());
            Ok(())
        }
        Command::Graph { localizations, out } => {
            let locs: LocalizationsFile = read_doc(&localizations)?;
            let frames: Vec<GraphFrame> = locs
                .frames
                .iter()
                .map(|f| GraphFrame {
                    game_id: f.game_id.clone(),
                    half: f.half,
                    frame_index: f.frame_index,
                    graph: build_player_graph(&f.players),
                })
                .collect();
            let n = frames.len();
            write_doc(
                &out,
                &GraphsFile {
                    version: FORMAT_VERSION,
                    frames,
                },
            )?;
            println!("graphs for {n} frames -> {}", out.display());
            Ok(())
        }
        Command::RenderTopview {
            calib,
            localizations,
            out,
            mode,
            split_bits,
            dims,
        } => {
            let calib: CalibrationFile = read_doc(&calib)?;
            let locs: LocalizationsFile = read_doc(&localizations)?;
            let frame = ImageFrame::new(dims.width, dims.height);
            let spec = TopViewSpec::default();
            std::fs::create_dir_all(&out)
                .map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
            let mut rendered = 0u64;
            for lf in &locs.frames {
                let Some(cf) = calib.frames.iter().find(|f| {
                    f.game_id == lf.game_id && f.half == lf.half && f.frame_index == lf.frame_index
                }) else {
                    continue;
                };
                if cf.relevance != 1 {
                    continue;
                }
                let result = cf
                    .to_result()
                    .map_err(|e| CliError::Invalid(e.to_string()))?;
                let polygon = visible_field_polygon(&result.homography, &frame, &field);
                let img = match mode {
                    ModeArg::Cc => {
                        render_color_composition(&spec, &lf.players, &polygon, &field)
                    }
                    ModeArg::Bc => render_binary_channels(&spec, &lf.players, &polygon, &field),
                };
                let path = out.join(format!("topview_{:06}.png", lf.frame_index));
                save_top_view(&path, &img, split_bits)?;
                rendered += 1;
            }
            if rendered == 0 {
                return Err(CliError::NoResult(
                    "no frames with both a relevant calibration and localizations".into(),
                ));
            }
            println!("rendered {rendered} top views -> {}", out.display());
            Ok(())
        }
        Command::EvalCalib { pred, truth, dims } => {
            let pred: CalibrationFile = read_doc(&pred)?;
            let truth: CalibrationFile = read_doc(&truth)?;
            let frame = ImageFrame::new(dims.width, dims.height);
            let mut pairs = Vec::new();
            for tf in &truth.frames {
                let Some(pf) = pred.frames.iter().find(|f| {
                    f.game_id == tf.game_id && f.half == tf.half && f.frame_index == tf.frame_index
                }) else {
                    continue;
                };
                let h_gt = tf
                    .to_result()
                    .map_err(|e| CliError::Invalid(e.to_string()))?
                    .homography;
                let h_pred = pf
                    .to_result()
                    .map_err(|e| CliError::Invalid(e.to_string()))?
                    .homography;
                pairs.push(iou_pair(&h_gt, &h_pred, &frame, &field));
            }
            if pairs.is_empty() {
                return Err(CliError::NoResult("no matching frames to compare".into()));
            }
            let report = IouReport::from_pairs(pairs);
            print_iou_report(&report);
            Ok(())
        }
        Command::EvalSpotting {
            pred,
            truth,
            margins,
        } => {
            let pred: PredictionsFile = read_doc(&pred)?;
            let truth: AnnotationsFile = read_doc(&truth)?;
            let margins = parse_margins(&margins)?;
            let preds: Vec<SpottingPrediction> = pred
                .predictions
                .iter()
                .map(|p| SpottingPrediction {
                    class: p.class.clone(),
                    time_s: p.time_ms as f64 / 1000.0,
                    half: p.half,
                    game_id: p.game_id.clone(),
                    confidence: p.confidence,
                })
                .collect();
            let gts: Vec<GroundTruthAction> = truth
                .actions
                .iter()
                .map(|a| GroundTruthAction {
                    class: a.class.clone(),
                    time_s: a.time_ms as f64 / 1000.0,
                    half: a.half,
                    game_id: a.game_id.clone(),
                })
                .collect();
            if gts.is_empty() {
                return Err(CliError::NoResult("ground truth has no actions".into()));
            }
            let report = average_map(&preds, &gts, &margins)
                .map_err(|e| CliError::Invalid(e.to_string()))?;
            for (m, v) in report.margins.iter().zip(&report.map_per_margin) {
                println!("mAP@{m:>5.1}s  {v:.4}");
            }
            println!("average-mAP  {:.4}", report.average_map);
            Ok(())
        }
        Command::Synth {
            out,
            frames,
            seed,
            noise,
            players,
            dims,
        } => {
            if !(0.0..=1.0).contains(&noise) {
                return Err(CliError::Invalid("noise must lie in [0, 1]".into()));
            }
            std::fs::create_dir_all(&out)
                .map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
            let params = SceneParams {
                frame: ImageFrame::new(dims.width, dims.height),
                n_players: players,
                noise,
                ..SceneParams::default()
            };
            let mut truth_frames = Vec::new();
            let mut det_frames = Vec::new();
            for i in 0..frames {
                let scene = generate_scene(&params, &field, seed.wrapping_add(i))
                    .map_err(|e| CliError::NoResult(e.to_string()))?;
                save_segmentation_png(&out.join(format!("seg_{i:06}.png")), &scene.segmentation)?;
                truth_frames.push(FrameRecord {
                    game_id: "synth".into(),
                    half: 1,
                    frame_index: i,
                    homography: scene.truth.to_row_major(),
                    relevance: 1,
                    residual: 0.0,
                    template_index: 0,
                });
                det_frames.push(fieldcal::formats::DetectionFrame {
                    game_id: "synth".into(),
                    half: 1,
                    frame_index: i,
                    detections: scene.detections,
                });
            }
            write_doc(
                &out.join("truth.json"),
                &CalibrationFile {
                    version: FORMAT_VERSION,
                    frames: truth_frames,
                },
            )?;
            write_doc(
                &out.join("detections.json"),
                &DetectionsFile {
                    version: FORMAT_VERSION,
                    frames: det_frames,
                },
            )?;
            println!("synthesized {frames} frames -> {}", out.display());
            Ok(())
        }
    }
}

/// seg_NNNNNN.png files in a directory with their frame indices.
fn list_segs(dir: &Path) -> Result<Vec<(u64, PathBuf)>, CliError> {
    let entries =
        std::fs::read_dir(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let mut out = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
        let name = entry.file_name();
        let name = name.to_string_lossy();
        if let Some(idx) = name
            .strip_prefix("seg_")
            .and_then(|s| s.strip_suffix(".png"))
            .and_then(|s| s.parse::<u64>().ok())
        {
            out.push((idx, entry.path()));
        }
    }
    Ok(out)
}

fn parse_margins(spec: &str) -> Result<Vec<f64>, CliError> {
    let parts: Vec<&str> = spec.split(':').collect();
    let err = || CliError::Invalid(format!("bad margins spec '{spec}', want start:end:step"));
    if parts.len() != 3 {
        return Err(err());
    }
    let start: f64 = parts[0].parse().map_err(|_| err())?;
    let end: f64 = parts[1].parse().map_err(|_| err())?;
    let step: f64 = parts[2].parse().map_err(|_| err())?;
    if step <= 0.0 || end < start {
        return Err(err());
    }
    let mut out = Vec::new();
    let mut m = start;
    while m <= end + 1e-9 {
        out.push(m);
        m += step;
    }
    Ok(out)
}

fn print_iou_report(report: &IouReport) {
    let fmt = |v: Option<f64>| v.map_or("n/a".to_string(), |x| format!("{x:.4}"));
    println!("frames          {}", report.per_image.len());
    println!("mean IoU entire {}", fmt(report.mean_entire));
    println!("median IoU entire {}", fmt(report.median_entire));
    println!("mean IoU part   {}", fmt(report.mean_part));
    println!("median IoU part {}", fmt(report.median_part));
    println!(
        "undefined       entire {} part {}",
        report.undefined_entire, report.undefined_part
    );
}
