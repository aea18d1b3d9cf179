//! Seeded augmentation sampling applied slice-wise to a volume.

use crate::{AugmentModeArg, Cli};
use anyhow::Context;
use proseg_core::augment::{apply_augmentation, sample_augmentation, sample_rng, AugmentConfig};
use proseg_core::metaimage::{load_mask, load_volume, save_mask, save_volume, ElementType};
use proseg_core::{Image2, Mask, Volume};
use std::path::Path;

pub fn run(
    cli: &Cli,
    input: &Path,
    mask: Option<&Path>,
    mode: AugmentModeArg,
    count: u64,
) -> anyhow::Result<()> {
    let v = load_volume(input).with_context(|| format!("loading {}", input.display()))?;
    let m = mask
        .map(|p| load_mask(p).with_context(|| format!("loading {}", p.display())))
        .transpose()?;
    if let Some(m) = &m {
        if m.dims != v.dims {
            anyhow::bail!("mask dims {:?} do not match volume dims {:?}", m.dims, v.dims);
        }
    }
    let cfg = match mode {
        AugmentModeArg::Prostate => AugmentConfig::prostate(cli.seed),
        AugmentModeArg::Lesion => AugmentConfig::lesion(cli.seed),
    };
    for i in 0..count {
        let mut rng = sample_rng(cfg.seed, i);
        let rec = sample_augmentation(&cfg, &mut rng)?;
        let mut img_slices: Vec<Image2> = Vec::with_capacity(v.dims.2);
        let mut mask_out = m.as_ref().map(|m| Mask::zeros(m.dims, m.spacing));
        for z in 0..v.dims.2 {
            let slice = v.extract_slice(z)?;
            let mslice = m.as_ref().map(|m| m.extract_slice(z)).transpose()?;
            let (aug, aug_mask) = apply_augmentation(&slice, mslice.as_ref(), &rec)?;
            img_slices.push(aug);
            if let (Some(out), Some(am)) = (&mut mask_out, aug_mask) {
                for y in 0..am.height {
                    for x in 0..am.width {
                        out.set(x, y, z, am.get(x, y));
                    }
                }
            }
        }
        let out = Volume::from_slices(&img_slices, v.spacing, v.origin)?;
        save_volume(
            &out,
            cli.out_dir.join(format!("aug_{i:04}.mha")),
            ElementType::Float,
        )?;
        if let Some(mut mo) = mask_out {
            mo.origin = m.as_ref().unwrap().origin;
            save_mask(&mo, cli.out_dir.join(format!("aug_{i:04}_mask.mha")))?;
        }
        super::write_json(&cli.out_dir.join(format!("aug_{i:04}.json")), &rec)?;
    }
    Ok(())
}
