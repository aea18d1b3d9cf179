//! Per-slice PNG rendering of volumes with mask and lesion annotations.

use crate::overlay::{draw_box, draw_contour, draw_label, slice_to_rgb, GREEN, RED, YELLOW};
use crate::Cli;
use anyhow::Context;
use proseg_core::metaimage::{load_mask, load_volume};
use proseg_core::rle::{rle_decode, RleMask};
use proseg_core::Mask2;
use serde::Deserialize;
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Deserialize)]
struct LesionsFile {
    lesions: Vec<LesionIn>,
}

#[derive(Deserialize)]
struct LesionIn {
    rank: usize,
    score: f64,
    slices: Vec<SliceIn>,
}

#[derive(Deserialize)]
struct SliceIn {
    slice: usize,
    mask: RleMask,
}

struct SliceAnnotation {
    rank: usize,
    score: f64,
    mask: Mask2,
}

fn load_lesions(path: &Path) -> anyhow::Result<BTreeMap<usize, Vec<SliceAnnotation>>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let file: LesionsFile =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let mut by_slice: BTreeMap<usize, Vec<SliceAnnotation>> = BTreeMap::new();
    for lesion in file.lesions {
        for s in lesion.slices {
            by_slice.entry(s.slice).or_default().push(SliceAnnotation {
                rank: lesion.rank,
                score: lesion.score,
                mask: rle_decode(&s.mask)?,
            });
        }
    }
    Ok(by_slice)
}

pub fn run(
    cli: &Cli,
    volume: &Path,
    prostate: Option<&Path>,
    lesions: Option<&Path>,
) -> anyhow::Result<()> {
    let v = load_volume(volume).with_context(|| format!("loading {}", volume.display()))?;
    let pmask = prostate
        .map(|p| load_mask(p).with_context(|| format!("loading {}", p.display())))
        .transpose()?;
    if let Some(m) = &pmask {
        if m.dims != v.dims {
            anyhow::bail!("prostate dims {:?} do not match volume {:?}", m.dims, v.dims);
        }
    }
    let annotations = lesions.map(load_lesions).transpose()?.unwrap_or_default();

    for z in 0..v.dims.2 {
        let mut canvas = slice_to_rgb(&v.extract_slice(z)?);
        if let Some(m) = &pmask {
            draw_contour(&mut canvas, &m.extract_slice(z)?, GREEN);
        }
        for ann in annotations.get(&z).map(|v| v.as_slice()).unwrap_or(&[]) {
            draw_contour(&mut canvas, &ann.mask, RED);
            if let Some(bbox) = ann.mask.tight_bbox() {
                draw_box(&mut canvas, &bbox, YELLOW);
                let text = format!("#{} {:.2}", ann.rank, ann.score);
                let ty = bbox.y0.saturating_sub(7);
                draw_label(&mut canvas, &text, bbox.x0, ty, RED);
            }
        }
        let path = cli.out_dir.join(format!("slice_{z:03}.png"));
        canvas
            .save(&path)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}
