//! `proseg` command-line entry point.

mod commands;
mod font;
mod manifest;
mod overlay;
mod summary;

use clap::{Parser, Subcommand, ValueEnum};
use proseg_core::ReportMode;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "proseg", version, about = "Prostate lesion detection toolkit")]
pub struct Cli {
    /// Worker threads for cohort processing (default: all cores)
    #[arg(long, global = true)]
    jobs: Option<usize>,

    /// Base seed for anything stochastic
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Directory receiving all outputs
    #[arg(long, global = true, default_value = ".")]
    out_dir: PathBuf,

    /// JSON file with assembly thresholds (nms_dsc_threshold, score_threshold,
    /// link_dsc_threshold, max_lesions); flags override individual fields
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricsMode {
    /// Prostate segmentation: DSC/HD95 on the gland, slice-level sens/spec
    ProstateSlice,
    /// Lesion segmentation: DSC/HD95 on the lesion union, pixel-level
    /// sens/spec inside the prostate, agreement rate
    LesionPixel,
}

impl From<MetricsMode> for ReportMode {
    fn from(m: MetricsMode) -> Self {
        match m {
            MetricsMode::ProstateSlice => ReportMode::ProstateSlice,
            MetricsMode::LesionPixel => ReportMode::LesionPixel,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a cohort manifest, writing per-case reports and a summary
    Metrics {
        /// JSON array of case manifests; relative paths resolve against it
        manifest: PathBuf,
        #[arg(long, value_enum, default_value = "lesion-pixel")]
        mode: MetricsMode,
        /// Report the directed (truth-to-prediction) HD95 instead of the
        /// symmetric max-of-directed default
        #[arg(long)]
        directed: bool,
    },
    /// Assemble per-slice detections into ranked 3D lesions
    Assemble {
        /// Detection JSON-lines file
        detections: PathBuf,
        #[arg(long)]
        nms_dsc: Option<f64>,
        #[arg(long)]
        score_thresh: Option<f64>,
        #[arg(long)]
        link_dsc: Option<f64>,
        #[arg(long)]
        max_lesions: Option<usize>,
        /// Keep only detections whose mask intersects this prostate mask
        #[arg(long)]
        prostate_mask: Option<PathBuf>,
        /// Also write a MetaImage volume with voxel value = lesion rank
        #[arg(long)]
        labeled_volume: Option<PathBuf>,
    },
    /// Pick the single best prostate detection per slice
    ProstateSelect {
        /// Detection JSON-lines file
        detections: PathBuf,
    },
    /// Normalize, equalize, and resize a volume; optionally register a pair
    Preprocess {
        /// Volume to preprocess
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, default_value_t = 384)]
        target_long: usize,
        #[arg(long)]
        hist_eq: bool,
        /// Gray levels for histogram equalization
        #[arg(long, default_value_t = 256)]
        levels: usize,
        /// Rigidly register MOVING onto FIXED (in-plane) and resample
        #[arg(long, num_args = 2, value_names = ["MOVING", "FIXED"])]
        register: Option<Vec<PathBuf>>,
    },
    /// Sample and apply training-style augmentations to a volume
    Augment {
        /// Volume to augment
        input: PathBuf,
        /// Mask transformed alongside the image (nearest neighbor)
        #[arg(long)]
        mask: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "lesion")]
        mode: AugmentModeArg,
        /// Number of augmented samples to draw
        #[arg(long, default_value_t = 1)]
        count: u64,
    },
    /// Generate a synthetic phantom: volume, masks, and detections
    Phantom {
        /// Full phantom spec as JSON; overrides --lesions
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value_t = 3)]
        lesions: usize,
    },
    /// Render per-slice PNGs with contours, boxes, and rank/score text
    Overlay {
        /// Grayscale volume to render
        volume: PathBuf,
        /// Prostate mask drawn as a green contour
        #[arg(long)]
        prostate: Option<PathBuf>,
        /// Lesion JSON from `assemble`, drawn as red contours with boxes
        #[arg(long)]
        lesions: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AugmentModeArg {
    Prostate,
    Lesion,
}

fn run(cli: Cli) -> anyhow::Result<()> {
    std::fs::create_dir_all(&cli.out_dir)?;
    match &cli.command {
        Command::Metrics {
            manifest,
            mode,
            directed,
        } => commands::metrics::run(&cli, manifest, *mode, *directed),
        Command::Assemble {
            detections,
            nms_dsc,
            score_thresh,
            link_dsc,
            max_lesions,
            prostate_mask,
            labeled_volume,
        } => commands::assemble::run(
            &cli,
            detections,
            commands::assemble::Overrides {
                nms_dsc: *nms_dsc,
                score_thresh: *score_thresh,
                link_dsc: *link_dsc,
                max_lesions: *max_lesions,
            },
            prostate_mask.as_deref(),
            labeled_volume.as_deref(),
        ),
        Command::ProstateSelect { detections } => commands::prostate_select::run(&cli, detections),
        Command::Preprocess {
            input,
            target_long,
            hist_eq,
            levels,
            register,
        } => commands::preprocess::run(
            &cli,
            input.as_deref(),
            *target_long,
            *hist_eq,
            *levels,
            register.as_deref(),
        ),
        Command::Augment {
            input,
            mask,
            mode,
            count,
        } => commands::augment::run(&cli, input, mask.as_deref(), *mode, *count),
        Command::Phantom { spec, lesions } => commands::phantom::run(&cli, spec.as_deref(), *lesions),
        Command::Overlay {
            volume,
            prostate,
            lesions,
        } => commands::overlay_cmd::run(&cli, volume, prostate.as_deref(), lesions.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
