//! Synthetic phantom generation for self-contained pipeline runs.

use crate::Cli;
use anyhow::Context;
use proseg_core::detections::save_detections;
use proseg_core::metaimage::{save_mask, save_volume, ElementType};
use proseg_core::phantom::{generate, PhantomSpec};
use std::path::Path;

pub fn run(cli: &Cli, spec_path: Option<&Path>, lesions: usize) -> anyhow::Result<()> {
    let spec = match spec_path {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => PhantomSpec::example(cli.seed, lesions)?,
    };
    let phantom = generate(&spec)?;
    save_volume(&phantom.t2, cli.out_dir.join("t2.mha"), ElementType::Float)?;
    save_mask(&phantom.prostate, cli.out_dir.join("prostate.mha"))?;
    for (i, lesion) in phantom.lesions.iter().enumerate() {
        save_mask(lesion, cli.out_dir.join(format!("lesion_{i:02}.mha")))?;
    }
    save_detections(&phantom.detections, cli.out_dir.join("detections.jsonl"))?;
    super::write_json(&cli.out_dir.join("phantom_spec.json"), &spec)
}
