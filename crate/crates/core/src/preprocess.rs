//! Preprocessing chain: aspect-preserving resize to a square canvas,
//! per-slice normalization, histogram equalization, physical-spacing
//! resampling, and in-plane rigid registration by pattern search over
//! normalized mutual information.

use crate::error::{Error, Result};
use crate::volume::{Image2, Mask2};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    Bilinear,
    Nearest,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResizeSpec {
    pub target_long: usize,
    pub pad_value: f64,
    pub interpolation: Interpolation,
}

impl Default for ResizeSpec {
    fn default() -> Self {
        ResizeSpec {
            target_long: 384,
            pad_value: 0.0,
            interpolation: Interpolation::Bilinear,
        }
    }
}

/// In-plane rigid motion: rotation about the image center, then translation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform2D {
    pub tx: f64,
    pub ty: f64,
    pub theta: f64,
}

impl RigidTransform2D {
    pub fn identity() -> Self {
        RigidTransform2D {
            tx: 0.0,
            ty: 0.0,
            theta: 0.0,
        }
    }

    pub fn inverse(&self) -> Self {
        // p' = R(p - c) + c + t  =>  p = R^-1(p' - c) + c - R^-1 t
        let (s, co) = (-self.theta).sin_cos();
        RigidTransform2D {
            tx: -(co * self.tx - s * self.ty),
            ty: -(s * self.tx + co * self.ty),
            theta: -self.theta,
        }
    }

    /// Maps a point forward, with the rotation center at the center of a
    /// `w`x`h` image.
    pub fn apply_point(&self, p: (f64, f64), w: usize, h: usize) -> (f64, f64) {
        let c = center(w, h);
        let (s, co) = self.theta.sin_cos();
        let dx = p.0 - c.0;
        let dy = p.1 - c.1;
        (
            co * dx - s * dy + c.0 + self.tx,
            s * dx + co * dy + c.1 + self.ty,
        )
    }
}

#[inline]
fn center(w: usize, h: usize) -> (f64, f64) {
    ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0)
}

#[inline]
fn bilinear_clamp(img: &Image2, x: f64, y: f64) -> f64 {
    let xc = x.clamp(0.0, img.width as f64 - 1.0);
    let yc = y.clamp(0.0, img.height as f64 - 1.0);
    let x0 = xc.floor() as usize;
    let y0 = yc.floor() as usize;
    let x1 = (x0 + 1).min(img.width - 1);
    let y1 = (y0 + 1).min(img.height - 1);
    let fx = xc - x0 as f64;
    let fy = yc - y0 as f64;
    let v00 = img.get(x0, y0);
    let v10 = img.get(x1, y0);
    let v01 = img.get(x0, y1);
    let v11 = img.get(x1, y1);
    (v00 * (1.0 - fx) + v10 * fx) * (1.0 - fy) + (v01 * (1.0 - fx) + v11 * fx) * fy
}

#[inline]
fn bilinear_zero(img: &Image2, x: f64, y: f64) -> f64 {
    if x < -1.0 || y < -1.0 || x > img.width as f64 || y > img.height as f64 {
        return 0.0;
    }
    let x0 = x.floor() as isize;
    let y0 = y.floor() as isize;
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    let sample = |xi: isize, yi: isize| -> f64 {
        if xi < 0 || yi < 0 || xi >= img.width as isize || yi >= img.height as isize {
            0.0
        } else {
            img.get(xi as usize, yi as usize)
        }
    };
    let v00 = sample(x0, y0);
    let v10 = sample(x0 + 1, y0);
    let v01 = sample(x0, y0 + 1);
    let v11 = sample(x0 + 1, y0 + 1);
    (v00 * (1.0 - fx) + v10 * fx) * (1.0 - fy) + (v01 * (1.0 - fx) + v11 * fx) * fy
}

#[inline]
fn nearest_zero_mask(mask: &Mask2, x: f64, y: f64) -> u8 {
    let xi = x.round() as isize;
    let yi = y.round() as isize;
    if xi < 0 || yi < 0 || xi >= mask.width as isize || yi >= mask.height as isize {
        0
    } else {
        mask.get(xi as usize, yi as usize)
    }
}

/// Snaps nearly integral coordinates so identity mappings stay exact.
#[inline]
fn snap(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() < 1e-9 {
        r
    } else {
        x
    }
}

fn scaled_dims(w: usize, h: usize, target_long: usize) -> (f64, usize, usize) {
    let scale = target_long as f64 / w.max(h) as f64;
    let new_w = (w as f64 * scale).round().max(1.0) as usize;
    let new_h = (h as f64 * scale).round().max(1.0) as usize;
    (scale, new_w, new_h)
}

/// Scales the long dimension to `target_long`, keeps the aspect ratio, and
/// zero-pads the short dimension symmetrically (odd remainder goes to the
/// high side). Returns the square image, the scale, and the pad offsets.
pub fn resize_pad(img: &Image2, spec: &ResizeSpec) -> Result<(Image2, f64, (usize, usize))> {
    if img.width == 0 || img.height == 0 {
        return Err(Error::Contract("resize_pad on a zero-sized image".into()));
    }
    let t = spec.target_long;
    let (scale, new_w, new_h) = scaled_dims(img.width, img.height, t);
    let px = (t - new_w) / 2;
    let py = (t - new_h) / 2;
    let mut out = Image2 {
        width: t,
        height: t,
        data: vec![spec.pad_value; t * t],
    };
    for y in 0..new_h {
        for x in 0..new_w {
            let sx = snap((x as f64 + 0.5) / scale - 0.5);
            let sy = snap((y as f64 + 0.5) / scale - 0.5);
            let v = match spec.interpolation {
                Interpolation::Bilinear => bilinear_clamp(img, sx, sy),
                Interpolation::Nearest => {
                    let xi = (sx.round() as isize).clamp(0, img.width as isize - 1);
                    let yi = (sy.round() as isize).clamp(0, img.height as isize - 1);
                    img.get(xi as usize, yi as usize)
                }
            };
            out.set(x + px, y + py, v);
        }
    }
    Ok((out, scale, (px, py)))
}

/// Mask variant of [`resize_pad`]: nearest-neighbor, so values stay binary.
pub fn resize_pad_mask(
    mask: &Mask2,
    target_long: usize,
) -> Result<(Mask2, f64, (usize, usize))> {
    let img = Image2 {
        width: mask.width,
        height: mask.height,
        data: mask.data.iter().map(|&v| v as f64).collect(),
    };
    let spec = ResizeSpec {
        target_long,
        pad_value: 0.0,
        interpolation: Interpolation::Nearest,
    };
    let (out, scale, offsets) = resize_pad(&img, &spec)?;
    let data = out.data.iter().map(|&v| (v != 0.0) as u8).collect();
    Ok((
        Mask2 {
            width: out.width,
            height: out.height,
            data,
        },
        scale,
        offsets,
    ))
}

/// Maps a point from the padded/resized canvas back to source coordinates.
pub fn resize_pad_inverse_point(
    scale: f64,
    offsets: (usize, usize),
    p: (f64, f64),
) -> (f64, f64) {
    (
        (p.0 - offsets.0 as f64 + 0.5) / scale - 0.5,
        (p.1 - offsets.1 as f64 + 0.5) / scale - 0.5,
    )
}

/// Maps a source point onto the padded/resized canvas.
pub fn resize_pad_forward_point(
    scale: f64,
    offsets: (usize, usize),
    p: (f64, f64),
) -> (f64, f64) {
    (
        (p.0 + 0.5) * scale - 0.5 + offsets.0 as f64,
        (p.1 + 0.5) * scale - 0.5 + offsets.1 as f64,
    )
}

/// Per-slice min-max normalization to [0, 1]; a constant slice maps to zeros.
pub fn normalize_slice(img: &Image2) -> Result<Image2> {
    if img.width == 0 || img.height == 0 {
        return Err(Error::Contract("normalize_slice on a zero-sized image".into()));
    }
    let min = img.data.iter().copied().fold(f64::INFINITY, f64::min);
    let max = img.data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = max - min;
    let data = if range == 0.0 {
        vec![0.0; img.data.len()]
    } else {
        img.data.iter().map(|&v| (v - min) / range).collect()
    };
    Ok(Image2 {
        width: img.width,
        height: img.height,
        data,
    })
}

/// Histogram equalization over `levels` quantization bins.
///
/// Values map through `(CDF(v) - CDF_min) / (1 - CDF_min)` with `CDF_min`
/// the CDF of the lowest occupied bin; constant images map to zeros.
pub fn hist_equalize(img: &Image2, levels: usize) -> Result<Image2> {
    if levels < 2 {
        return Err(Error::Contract("hist_equalize needs at least 2 levels".into()));
    }
    if img.data.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
        return Err(Error::Contract(
            "hist_equalize input values must lie in [0, 1]".into(),
        ));
    }
    let bin_of = |v: f64| ((v * levels as f64) as usize).min(levels - 1);
    let mut hist = vec![0usize; levels];
    for &v in &img.data {
        hist[bin_of(v)] += 1;
    }
    let mut cdf = vec![0usize; levels];
    let mut acc = 0usize;
    for (c, &h) in cdf.iter_mut().zip(&hist) {
        acc += h;
        *c = acc;
    }
    let total = img.data.len();
    let cdf_min = *cdf
        .iter()
        .find(|&&c| c > 0)
        .expect("image has at least one pixel");
    let denom = total - cdf_min;
    let data = if denom == 0 {
        vec![0.0; total]
    } else {
        img.data
            .iter()
            .map(|&v| (cdf[bin_of(v)] - cdf_min) as f64 / denom as f64)
            .collect()
    };
    Ok(Image2 {
        width: img.width,
        height: img.height,
        data,
    })
}

/// Resamples to a new pixel spacing over the same physical extent; each
/// output pixel is sampled at its physical center with border clamp.
pub fn resample_bilinear(
    img: &Image2,
    src_spacing: (f64, f64),
    dst_spacing: (f64, f64),
) -> Result<Image2> {
    if src_spacing.0 <= 0.0 || src_spacing.1 <= 0.0 || dst_spacing.0 <= 0.0 || dst_spacing.1 <= 0.0
    {
        return Err(Error::Contract("spacings must be positive".into()));
    }
    let out_w = ((img.width as f64 * src_spacing.0 / dst_spacing.0).round() as usize).max(1);
    let out_h = ((img.height as f64 * src_spacing.1 / dst_spacing.1).round() as usize).max(1);
    let mut out = Image2::zeros(out_w, out_h);
    for y in 0..out_h {
        let phys_y = (y as f64 + 0.5) * dst_spacing.1;
        let sy = snap(phys_y / src_spacing.1 - 0.5);
        for x in 0..out_w {
            let phys_x = (x as f64 + 0.5) * dst_spacing.0;
            let sx = snap(phys_x / src_spacing.0 - 0.5);
            out.set(x, y, bilinear_clamp(img, sx, sy));
        }
    }
    Ok(out)
}

/// Warps an image by a rigid transform; out-of-bounds samples are zero.
pub fn apply_rigid(img: &Image2, t: &RigidTransform2D) -> Image2 {
    let inv = t.inverse();
    let mut out = Image2::zeros(img.width, img.height);
    for y in 0..img.height {
        for x in 0..img.width {
            let (sx, sy) = inv.apply_point((x as f64, y as f64), img.width, img.height);
            out.set(x, y, bilinear_zero(img, snap(sx), snap(sy)));
        }
    }
    out
}

/// Mask variant of [`apply_rigid`]: nearest-neighbor sampling.
pub fn apply_rigid_mask(mask: &Mask2, t: &RigidTransform2D) -> Mask2 {
    let inv = t.inverse();
    let mut out = Mask2::zeros(mask.width, mask.height);
    for y in 0..mask.height {
        for x in 0..mask.width {
            let (sx, sy) = inv.apply_point((x as f64, y as f64), mask.width, mask.height);
            out.set(x, y, nearest_zero_mask(mask, snap(sx), snap(sy)));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RegisterOpts {
    /// Joint-histogram bins per axis.
    pub bins: usize,
    /// Downsampling factors, coarse to fine.
    pub levels: Vec<usize>,
    /// Initial pattern-search step (px, px, degrees).
    pub init_step: (f64, f64, f64),
    /// Search stops once all steps fall below these (px, px, degrees).
    pub min_step: (f64, f64, f64),
    /// Objective evaluation budget per pyramid level.
    pub max_evals_per_level: usize,
}

impl Default for RegisterOpts {
    fn default() -> Self {
        RegisterOpts {
            bins: 64,
            levels: vec![4, 2, 1],
            init_step: (8.0, 8.0, 8.0),
            min_step: (0.1, 0.1, 0.1),
            max_evals_per_level: 500,
        }
    }
}

/// Normalized mutual information `(H(A) + H(B)) / H(A, B)` on a joint
/// histogram with `bins` bins per axis.
pub fn normalized_mutual_information(a: &Image2, b: &Image2, bins: usize) -> Result<f64> {
    if a.width != b.width || a.height != b.height {
        return Err(Error::Contract("NMI inputs must share a pixel grid".into()));
    }
    let range = |img: &Image2| {
        let min = img.data.iter().copied().fold(f64::INFINITY, f64::min);
        let max = img.data.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        (min, max)
    };
    let (amin, amax) = range(a);
    let (bmin, bmax) = range(b);
    if amax == amin || bmax == bmin {
        return Err(Error::Contract("NMI undefined for a constant image".into()));
    }
    let bin_of = |v: f64, min: f64, max: f64| {
        (((v - min) / (max - min) * bins as f64) as usize).min(bins - 1)
    };
    let mut joint = vec![0u64; bins * bins];
    for (&va, &vb) in a.data.iter().zip(&b.data) {
        joint[bin_of(va, amin, amax) * bins + bin_of(vb, bmin, bmax)] += 1;
    }
    let n = a.data.len() as f64;
    let mut ha = vec![0u64; bins];
    let mut hb = vec![0u64; bins];
    for i in 0..bins {
        for j in 0..bins {
            ha[i] += joint[i * bins + j];
            hb[j] += joint[i * bins + j];
        }
    }
    let entropy = |counts: &[u64]| {
        counts
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let p = c as f64 / n;
                -p * p.ln()
            })
            .sum::<f64>()
    };
    let hj = entropy(&joint);
    if hj == 0.0 {
        return Err(Error::Contract("NMI undefined: degenerate joint histogram".into()));
    }
    Ok((entropy(&ha) + entropy(&hb)) / hj)
}

fn downsample(img: &Image2, factor: usize) -> Image2 {
    if factor <= 1 {
        return img.clone();
    }
    let out_w = (img.width / factor).max(1);
    let out_h = (img.height / factor).max(1);
    let mut out = Image2::zeros(out_w, out_h);
    for y in 0..out_h {
        for x in 0..out_w {
            let mut sum = 0.0;
            let mut cnt = 0usize;
            for dy in 0..factor {
                for dx in 0..factor {
                    let sx = x * factor + dx;
                    let sy = y * factor + dy;
                    if sx < img.width && sy < img.height {
                        sum += img.get(sx, sy);
                        cnt += 1;
                    }
                }
            }
            out.set(x, y, sum / cnt as f64);
        }
    }
    out
}

/// Rigid registration maximizing NMI with multi-resolution pattern search.
///
/// Deterministic: the search only accepts strict improvements and visits
/// axis moves in a fixed order.
pub fn register_rigid(
    moving: &Image2,
    fixed: &Image2,
    opts: &RegisterOpts,
) -> Result<RigidTransform2D> {
    if moving.width != fixed.width || moving.height != fixed.height {
        return Err(Error::Contract(
            "register_rigid inputs must share a pixel grid (resample first)".into(),
        ));
    }
    let constant = |img: &Image2| {
        let first = img.data[0];
        img.data.iter().all(|&v| v == first)
    };
    if constant(moving) || constant(fixed) {
        return Err(Error::Contract("register_rigid on a constant image".into()));
    }

    let mut levels = opts.levels.clone();
    if levels.is_empty() {
        levels.push(1);
    }
    let mut t = RigidTransform2D::identity();
    let mut prev_factor: Option<usize> = None;
    for &factor in &levels {
        if let Some(pf) = prev_factor {
            // carry translation between pyramid levels
            let ratio = pf as f64 / factor as f64;
            t.tx *= ratio;
            t.ty *= ratio;
        }
        prev_factor = Some(factor);
        let m = downsample(moving, factor);
        let f = downsample(fixed, factor);
        t = pattern_search(&m, &f, t, opts)?;
    }
    Ok(t)
}

fn pattern_search(
    moving: &Image2,
    fixed: &Image2,
    start: RigidTransform2D,
    opts: &RegisterOpts,
) -> Result<RigidTransform2D> {
    let deg = std::f64::consts::PI / 180.0;
    let eval = |t: &RigidTransform2D| -> Result<f64> {
        normalized_mutual_information(&apply_rigid(moving, t), fixed, opts.bins)
    };
    let mut cur = start;
    let mut cur_val = eval(&cur)?;
    let mut evals = 1usize;
    let mut step = [opts.init_step.0, opts.init_step.1, opts.init_step.2 * deg];
    let min_step = [opts.min_step.0, opts.min_step.1, opts.min_step.2 * deg];
    while evals < opts.max_evals_per_level
        && (step[0] >= min_step[0] || step[1] >= min_step[1] || step[2] >= min_step[2])
    {
        let mut improved = false;
        'axes: for axis in 0..3 {
            for dir in [1.0, -1.0] {
                let mut cand = cur;
                match axis {
                    0 => cand.tx += dir * step[0],
                    1 => cand.ty += dir * step[1],
                    _ => cand.theta += dir * step[2],
                }
                let v = eval(&cand)?;
                evals += 1;
                if v > cur_val {
                    cur = cand;
                    cur_val = v;
                    improved = true;
                }
                if evals >= opts.max_evals_per_level {
                    break 'axes;
                }
            }
        }
        if !improved {
            for s in &mut step {
                *s /= 2.0;
            }
        }
    }
    Ok(cur)
}
