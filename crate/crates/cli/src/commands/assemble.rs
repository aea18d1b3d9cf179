//! Detections-to-lesions assembly: NMS, recursive linking, top-k ranking.

use crate::Cli;
use anyhow::Context;
use proseg_core::assembly::{extract_top_lesions, AssemblyConfig, DetectionPool};
use proseg_core::detections::load_detections;
use proseg_core::metaimage::{load_mask, save_volume, ElementType};
use proseg_core::rle::{rle_encode, RleMask};
use proseg_core::{Detection, Lesion3D, Mask, Volume};
use serde::Serialize;
use std::path::Path;

#[derive(Clone, Copy, Default)]
pub struct Overrides {
    pub nms_dsc: Option<f64>,
    pub score_thresh: Option<f64>,
    pub link_dsc: Option<f64>,
    pub max_lesions: Option<usize>,
}

pub fn resolve_config(cli: &Cli, ov: Overrides) -> anyhow::Result<AssemblyConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => AssemblyConfig::default(),
    };
    if let Some(v) = ov.nms_dsc {
        cfg.nms_dsc_threshold = v;
    }
    if let Some(v) = ov.score_thresh {
        cfg.score_threshold = v;
    }
    if let Some(v) = ov.link_dsc {
        cfg.link_dsc_threshold = v;
    }
    if let Some(v) = ov.max_lesions {
        cfg.max_lesions = v;
    }
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Serialize)]
struct LesionOut {
    rank: usize,
    score: f64,
    slice_range: [usize; 2],
    constituent_scores: Vec<f64>,
    slices: Vec<SliceOut>,
}

#[derive(Serialize)]
struct SliceOut {
    slice: usize,
    mask: RleMask,
}

#[derive(Serialize)]
struct AssembleOut {
    config: AssemblyConfig,
    lesions: Vec<LesionOut>,
}

fn lesion_out(l: &Lesion3D) -> LesionOut {
    let (lo, hi) = l.slice_range();
    LesionOut {
        rank: l.rank,
        score: l.score,
        slice_range: [lo, hi],
        constituent_scores: l.constituent_scores.clone(),
        slices: l
            .slices
            .iter()
            .map(|(&slice, mask)| SliceOut {
                slice,
                mask: rle_encode(mask),
            })
            .collect(),
    }
}

fn restrict_to_prostate(dets: Vec<Detection>, prostate: &Mask) -> anyhow::Result<Vec<Detection>> {
    let mut kept = Vec::new();
    for d in dets {
        if d.slice >= prostate.dims.2 {
            continue;
        }
        let slice = prostate.extract_slice(d.slice)?;
        if d.mask.width != slice.width || d.mask.height != slice.height {
            anyhow::bail!(
                "slice {}: detection mask {}x{} does not match prostate grid {}x{}",
                d.slice,
                d.mask.width,
                d.mask.height,
                slice.width,
                slice.height
            );
        }
        if d.mask.intersection_count(&slice) > 0 {
            kept.push(d);
        }
    }
    Ok(kept)
}

fn labeled_volume(lesions: &[Lesion3D], grid: &Mask) -> anyhow::Result<Volume> {
    let mut v = Volume::zeros(grid.dims, grid.spacing);
    v.origin = grid.origin;
    for l in lesions {
        let m = l.to_mask(grid.dims, grid.spacing, grid.origin)?;
        for (out, &bit) in v.data.iter_mut().zip(&m.data) {
            if bit == 1 && *out == 0.0 {
                *out = l.rank as f64;
            }
        }
    }
    Ok(v)
}

pub fn run(
    cli: &Cli,
    detections: &Path,
    ov: Overrides,
    prostate_mask: Option<&Path>,
    labeled: Option<&Path>,
) -> anyhow::Result<()> {
    let cfg = resolve_config(cli, ov)?;
    let mut dets = load_detections(detections)
        .with_context(|| format!("loading {}", detections.display()))?;
    dets.retain(|d| d.label == "lesion");

    let prostate = prostate_mask
        .map(|p| load_mask(p).with_context(|| format!("loading {}", p.display())))
        .transpose()?;
    if let Some(p) = &prostate {
        dets = restrict_to_prostate(dets, p)?;
    }

    let mut pool = DetectionPool::from_detections(dets).nms(&cfg)?;
    let lesions = extract_top_lesions(&mut pool, &cfg)?;

    let out = AssembleOut {
        config: cfg,
        lesions: lesions.iter().map(lesion_out).collect(),
    };
    super::write_json(&cli.out_dir.join("lesions.json"), &out)?;

    if let Some(path) = labeled {
        let grid = prostate
            .as_ref()
            .context("--labeled-volume requires --prostate-mask for the output grid")?;
        let v = labeled_volume(&lesions, grid)?;
        let target = if path.is_absolute() {
            path.to_path_buf()
        } else {
            cli.out_dir.join(path)
        };
        save_volume(&v, target, ElementType::Uchar)?;
    }
    Ok(())
}
