//! Per-slice prostate selection: keep the single best detection per slice.

use crate::Cli;
use anyhow::Context;
use proseg_core::assembly::select_prostate_slices;
use proseg_core::detections::load_detections;
use proseg_core::rle::{rle_encode, RleMask};
use serde::Serialize;
use std::path::Path;

#[derive(Serialize)]
struct DecisionOut {
    slice: usize,
    present: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    score: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    bbox: Option<[usize; 4]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mask: Option<RleMask>,
}

pub fn run(cli: &Cli, detections: &Path) -> anyhow::Result<()> {
    let dets = load_detections(detections)
        .with_context(|| format!("loading {}", detections.display()))?;
    let prostate: Vec<_> = dets.into_iter().filter(|d| d.label == "prostate").collect();
    let n_slices = prostate.iter().map(|d| d.slice + 1).max().unwrap_or(0);
    let mut per_slice = vec![Vec::new(); n_slices];
    for d in prostate {
        per_slice[d.slice].push(d);
    }
    let decisions = select_prostate_slices(&per_slice);
    let out: Vec<DecisionOut> = decisions
        .iter()
        .map(|d| DecisionOut {
            slice: d.slice,
            present: d.present,
            score: d.chosen.as_ref().map(|c| c.score),
            bbox: d
                .chosen
                .as_ref()
                .map(|c| [c.bbox.x0, c.bbox.y0, c.bbox.x1, c.bbox.y1]),
            mask: d.chosen.as_ref().map(|c| rle_encode(&c.mask)),
        })
        .collect();
    super::write_json(&cli.out_dir.join("prostate_slices.json"), &out)
}
