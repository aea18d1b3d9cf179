//! Slice-wise preprocessing and in-plane rigid registration.

use crate::Cli;
use anyhow::{bail, Context};
use proseg_core::metaimage::{load_volume, save_volume, ElementType};
use proseg_core::preprocess::{
    apply_rigid, hist_equalize, normalize_slice, register_rigid, resize_pad, RegisterOpts,
    ResizeSpec, RigidTransform2D,
};
use proseg_core::{Image2, Volume};
use serde::Serialize;
use std::path::Path;

#[derive(Serialize)]
struct ResizeSidecar {
    scale: f64,
    offsets: [usize; 2],
    target_long: usize,
    hist_eq: bool,
    levels: usize,
}

#[derive(Serialize)]
struct RegisterSidecar {
    transform: RigidTransform2D,
    theta_deg: f64,
    nmi_bins: usize,
    levels: Vec<usize>,
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "volume".into())
}

fn preprocess_volume(
    cli: &Cli,
    input: &Path,
    target_long: usize,
    hist_eq: bool,
    levels: usize,
) -> anyhow::Result<()> {
    let v = load_volume(input).with_context(|| format!("loading {}", input.display()))?;
    let spec = ResizeSpec {
        target_long,
        ..ResizeSpec::default()
    };
    let mut slices = Vec::with_capacity(v.dims.2);
    let mut scale = 1.0;
    let mut offsets = (0, 0);
    for z in 0..v.dims.2 {
        let mut s = normalize_slice(&v.extract_slice(z)?)?;
        if hist_eq {
            s = hist_equalize(&s, levels)?;
        }
        let (resized, sc, off) = resize_pad(&s, &spec)?;
        scale = sc;
        offsets = off;
        slices.push(resized);
    }
    // upscaling by `scale` shrinks the physical pixel size accordingly
    let out = Volume::from_slices(
        &slices,
        (v.spacing.0 / scale, v.spacing.1 / scale, v.spacing.2),
        v.origin,
    )?;
    let name = stem(input);
    save_volume(&out, cli.out_dir.join(format!("{name}_pre.mha")), ElementType::Float)?;
    super::write_json(
        &cli.out_dir.join(format!("{name}_pre.json")),
        &ResizeSidecar {
            scale,
            offsets: [offsets.0, offsets.1],
            target_long,
            hist_eq,
            levels,
        },
    )
}

fn register_pair(cli: &Cli, moving: &Path, fixed: &Path) -> anyhow::Result<()> {
    let mv = load_volume(moving).with_context(|| format!("loading {}", moving.display()))?;
    let fx = load_volume(fixed).with_context(|| format!("loading {}", fixed.display()))?;
    // one in-plane transform per volume pair, estimated on the middle slices
    let mid_m = normalize_slice(&mv.extract_slice(mv.dims.2 / 2)?)?;
    let mid_f = normalize_slice(&fx.extract_slice(fx.dims.2.min(mv.dims.2) / 2)?)?;
    let opts = RegisterOpts::default();
    let t = register_rigid(&mid_m, &mid_f, &opts)?;

    let slices: Vec<Image2> = (0..mv.dims.2)
        .map(|z| Ok(apply_rigid(&mv.extract_slice(z)?, &t)))
        .collect::<anyhow::Result<_>>()?;
    let out = Volume::from_slices(&slices, mv.spacing, mv.origin)?;
    let name = stem(moving);
    save_volume(&out, cli.out_dir.join(format!("{name}_reg.mha")), ElementType::Float)?;
    super::write_json(
        &cli.out_dir.join(format!("{name}_reg.json")),
        &RegisterSidecar {
            transform: t,
            theta_deg: t.theta.to_degrees(),
            nmi_bins: opts.bins,
            levels: opts.levels.clone(),
        },
    )
}

pub fn run(
    cli: &Cli,
    input: Option<&Path>,
    target_long: usize,
    hist_eq: bool,
    levels: usize,
    register: Option<&[std::path::PathBuf]>,
) -> anyhow::Result<()> {
    if input.is_none() && register.is_none() {
        bail!("preprocess needs --input and/or --register");
    }
    if let Some(path) = input {
        preprocess_volume(cli, path, target_long, hist_eq, levels)?;
    }
    if let Some(pair) = register {
        register_pair(cli, &pair[0], &pair[1])?;
    }
    Ok(())
}
