//! Seeded stochastic augmentation for training-data generation.
//!
//! Each transform is switched on independently with `apply_prob` and its
//! parameters drawn uniformly from the configured range. Draw order is
//! fixed (flip-lr, flip-ud, noise, blur, rotation, translation axis then
//! magnitude, scale), so a seed plus sample index fully determines the
//! record, and the record alone replays the augmentation.

use crate::error::{Error, Result};
use crate::preprocess::{apply_rigid, apply_rigid_mask, RigidTransform2D};
use crate::volume::{Image2, Mask2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AugmentMode {
    Prostate,
    Lesion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentConfig {
    pub mode: AugmentMode,
    pub apply_prob: f64,
    pub noise_sigma: (f64, f64),
    pub blur_sigma: (f64, f64),
    pub rotation_deg: (f64, f64),
    pub translation_px: (f64, f64),
    pub scale: (f64, f64),
    pub seed: u64,
}

impl AugmentConfig {
    pub fn prostate(seed: u64) -> Self {
        AugmentConfig {
            mode: AugmentMode::Prostate,
            apply_prob: 0.5,
            noise_sigma: (0.05, 0.1),
            blur_sigma: (0.8, 1.3),
            rotation_deg: (-20.0, 20.0),
            translation_px: (0.0, 50.0),
            scale: (0.9, 1.1),
            seed,
        }
    }

    pub fn lesion(seed: u64) -> Self {
        AugmentConfig {
            mode: AugmentMode::Lesion,
            rotation_deg: (-80.0, 80.0),
            translation_px: (0.0, 20.0),
            ..AugmentConfig::prostate(seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.apply_prob) {
            return Err(Error::Contract(format!(
                "apply_prob {} outside [0, 1]",
                self.apply_prob
            )));
        }
        for (name, (lo, hi)) in [
            ("noise_sigma", self.noise_sigma),
            ("blur_sigma", self.blur_sigma),
            ("rotation_deg", self.rotation_deg),
            ("translation_px", self.translation_px),
            ("scale", self.scale),
        ] {
            if lo > hi {
                return Err(Error::Contract(format!("{name} range [{lo}, {hi}] inverted")));
            }
        }
        Ok(())
    }

    /// Up-down flip is only part of the lesion-mode transform set.
    pub fn flip_ud_eligible(&self) -> bool {
        self.mode == AugmentMode::Lesion
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TranslationAxis {
    Horizontal,
    Vertical,
}

/// Applied flags and sampled parameters; enough to replay exactly.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AugmentRecord {
    pub flip_lr: bool,
    pub flip_ud: bool,
    pub noise_sigma: Option<f64>,
    pub blur_sigma: Option<f64>,
    pub rotation_deg: Option<f64>,
    pub translation: Option<(TranslationAxis, f64)>,
    pub scale: Option<f64>,
    /// Seed for the noise field, drawn alongside the sigma.
    pub noise_seed: Option<u64>,
}

/// Deterministic per-sample generator derived from (seed, sample index).
pub fn sample_rng(seed: u64, sample_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(sample_index);
    rng
}

pub fn sample_augmentation(cfg: &AugmentConfig, rng: &mut impl Rng) -> Result<AugmentRecord> {
    cfg.validate()?;
    let mut rec = AugmentRecord::default();
    let coin = |rng: &mut dyn rand::RngCore| rng.gen::<f64>() < cfg.apply_prob;
    let uniform = |rng: &mut dyn rand::RngCore, (lo, hi): (f64, f64)| {
        if lo == hi {
            lo
        } else {
            rng.gen_range(lo..hi)
        }
    };

    rec.flip_lr = coin(rng);
    if cfg.flip_ud_eligible() {
        rec.flip_ud = coin(rng);
    }
    if coin(rng) {
        rec.noise_sigma = Some(uniform(rng, cfg.noise_sigma));
        rec.noise_seed = Some(rng.gen());
    }
    if coin(rng) {
        rec.blur_sigma = Some(uniform(rng, cfg.blur_sigma));
    }
    if coin(rng) {
        rec.rotation_deg = Some(uniform(rng, cfg.rotation_deg));
    }
    if coin(rng) {
        let axis = if rng.gen::<bool>() {
            TranslationAxis::Horizontal
        } else {
            TranslationAxis::Vertical
        };
        rec.translation = Some((axis, uniform(rng, cfg.translation_px)));
    }
    if coin(rng) {
        rec.scale = Some(uniform(rng, cfg.scale));
    }
    Ok(rec)
}

fn flip_lr_image(img: &Image2) -> Image2 {
    Image2::from_fn(img.width, img.height, |x, y| img.get(img.width - 1 - x, y))
}

fn flip_ud_image(img: &Image2) -> Image2 {
    Image2::from_fn(img.width, img.height, |x, y| img.get(x, img.height - 1 - y))
}

fn flip_lr_mask(m: &Mask2) -> Mask2 {
    Mask2::from_fn(m.width, m.height, |x, y| m.get(m.width - 1 - x, y) == 1)
}

fn flip_ud_mask(m: &Mask2) -> Mask2 {
    Mask2::from_fn(m.width, m.height, |x, y| m.get(x, m.height - 1 - y) == 1)
}

fn add_noise(img: &Image2, sigma: f64, seed: u64) -> Image2 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).expect("sigma >= 0");
    Image2 {
        width: img.width,
        height: img.height,
        data: img.data.iter().map(|&v| v + normal.sample(&mut rng)).collect(),
    }
}

/// Separable Gaussian blur, kernel radius `ceil(3*sigma)`, border clamp.
fn gaussian_blur(img: &Image2, sigma: f64) -> Image2 {
    let radius = (3.0 * sigma).ceil() as isize;
    let mut kernel = Vec::with_capacity((2 * radius + 1) as usize);
    for d in -radius..=radius {
        let x = d as f64;
        kernel.push((-x * x / (2.0 * sigma * sigma)).exp());
    }
    let sum: f64 = kernel.iter().sum();
    for k in &mut kernel {
        *k /= sum;
    }
    let clamp_get = |img: &Image2, x: isize, y: isize| {
        let xc = x.clamp(0, img.width as isize - 1) as usize;
        let yc = y.clamp(0, img.height as isize - 1) as usize;
        img.get(xc, yc)
    };
    let mut horiz = Image2::zeros(img.width, img.height);
    for y in 0..img.height {
        for x in 0..img.width {
            let mut acc = 0.0;
            for (ki, d) in (-radius..=radius).enumerate() {
                acc += kernel[ki] * clamp_get(img, x as isize + d, y as isize);
            }
            horiz.set(x, y, acc);
        }
    }
    let mut out = Image2::zeros(img.width, img.height);
    for y in 0..img.height {
        for x in 0..img.width {
            let mut acc = 0.0;
            for (ki, d) in (-radius..=radius).enumerate() {
                acc += kernel[ki] * clamp_get(&horiz, x as isize, y as isize + d);
            }
            out.set(x, y, acc);
        }
    }
    out
}

/// Uniform scale about the image center; bilinear for images, nearest for
/// masks, zero fill outside.
fn scale_image(img: &Image2, factor: f64) -> Image2 {
    let c = ((img.width as f64 - 1.0) / 2.0, (img.height as f64 - 1.0) / 2.0);
    let mut out = Image2::zeros(img.width, img.height);
    for y in 0..img.height {
        for x in 0..img.width {
            let sx = (x as f64 - c.0) / factor + c.0;
            let sy = (y as f64 - c.1) / factor + c.1;
            out.set(x, y, bilinear_zero(img, sx, sy));
        }
    }
    out
}

fn scale_mask(m: &Mask2, factor: f64) -> Mask2 {
    let c = ((m.width as f64 - 1.0) / 2.0, (m.height as f64 - 1.0) / 2.0);
    Mask2::from_fn(m.width, m.height, |x, y| {
        let sx = ((x as f64 - c.0) / factor + c.0).round() as isize;
        let sy = ((y as f64 - c.1) / factor + c.1).round() as isize;
        sx >= 0 && sy >= 0 && sx < m.width as isize && sy < m.height as isize
            && m.get(sx as usize, sy as usize) == 1
    })
}

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
    (sample(x0, y0) * (1.0 - fx) + sample(x0 + 1, y0) * fx) * (1.0 - fy)
        + (sample(x0, y0 + 1) * (1.0 - fx) + sample(x0 + 1, y0 + 1) * fx) * fy
}

/// Replays a record on an image and (optionally) its paired mask.
/// Geometric transforms hit both; intensity transforms hit the image only.
pub fn apply_augmentation(
    img: &Image2,
    mask: Option<&Mask2>,
    rec: &AugmentRecord,
) -> Result<(Image2, Option<Mask2>)> {
    if let Some(m) = mask {
        if m.width != img.width || m.height != img.height {
            return Err(Error::Contract("image and mask shapes differ".into()));
        }
    }
    let mut image = img.clone();
    let mut mask = mask.cloned();

    if rec.flip_lr {
        image = flip_lr_image(&image);
        mask = mask.map(|m| flip_lr_mask(&m));
    }
    if rec.flip_ud {
        image = flip_ud_image(&image);
        mask = mask.map(|m| flip_ud_mask(&m));
    }
    if let Some(sigma) = rec.noise_sigma {
        let seed = rec.noise_seed.unwrap_or(0);
        image = add_noise(&image, sigma, seed);
    }
    if let Some(sigma) = rec.blur_sigma {
        image = gaussian_blur(&image, sigma);
    }
    if let Some(deg) = rec.rotation_deg {
        let t = RigidTransform2D {
            tx: 0.0,
            ty: 0.0,
            theta: deg.to_radians(),
        };
        image = apply_rigid(&image, &t);
        mask = mask.map(|m| apply_rigid_mask(&m, &t));
    }
    if let Some((axis, amount)) = rec.translation {
        let (tx, ty) = match axis {
            TranslationAxis::Horizontal => (amount, 0.0),
            TranslationAxis::Vertical => (0.0, amount),
        };
        let t = RigidTransform2D { tx, ty, theta: 0.0 };
        image = apply_rigid(&image, &t);
        mask = mask.map(|m| apply_rigid_mask(&m, &t));
    }
    if let Some(factor) = rec.scale {
        image = scale_image(&image, factor);
        mask = mask.map(|m| scale_mask(&m, factor));
    }
    Ok((image, mask))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_image() -> Image2 {
        Image2::from_fn(32, 32, |x, y| {
            let dx = x as f64 - 12.0;
            let dy = y as f64 - 18.0;
            (-(dx * dx + dy * dy) / 40.0).exp()
        })
    }

    fn test_mask() -> Mask2 {
        Mask2::from_fn(32, 32, |x, y| {
            let dx = x as f64 - 12.0;
            let dy = y as f64 - 18.0;
            dx * dx + dy * dy <= 16.0
        })
    }

    #[test]
    fn apply_prob_zero_yields_empty_record() {
        let mut cfg = AugmentConfig::lesion(1);
        cfg.apply_prob = 0.0;
        let mut rng = sample_rng(1, 0);
        let rec = sample_augmentation(&cfg, &mut rng).unwrap();
        assert_eq!(rec, AugmentRecord::default());
    }

    #[test]
    fn apply_prob_one_applies_everything() {
        let mut cfg = AugmentConfig::lesion(7);
        cfg.apply_prob = 1.0;
        let mut rng = sample_rng(7, 0);
        let rec = sample_augmentation(&cfg, &mut rng).unwrap();
        assert!(rec.flip_lr && rec.flip_ud);
        assert!(rec.noise_sigma.is_some());
        assert!(rec.blur_sigma.is_some());
        assert!(rec.rotation_deg.is_some());
        assert!(rec.translation.is_some());
        assert!(rec.scale.is_some());
        let s = rec.noise_sigma.unwrap();
        assert!((0.05..=0.1).contains(&s));
        let r = rec.rotation_deg.unwrap();
        assert!((-80.0..=80.0).contains(&r));
        // same seed + index reproduces the record
        let mut rng2 = sample_rng(7, 0);
        assert_eq!(sample_augmentation(&cfg, &mut rng2).unwrap(), rec);
    }

    #[test]
    fn prostate_mode_never_flips_ud() {
        let mut cfg = AugmentConfig::prostate(3);
        cfg.apply_prob = 1.0;
        let mut rng = sample_rng(3, 0);
        let rec = sample_augmentation(&cfg, &mut rng).unwrap();
        assert!(!rec.flip_ud);
    }

    #[test]
    fn empty_record_is_identity() {
        let img = test_image();
        let m = test_mask();
        let (out_img, out_mask) =
            apply_augmentation(&img, Some(&m), &AugmentRecord::default()).unwrap();
        assert_eq!(out_img, img);
        assert_eq!(out_mask.unwrap(), m);
    }

    #[test]
    fn flip_lr_is_involution() {
        let img = test_image();
        let rec = AugmentRecord {
            flip_lr: true,
            ..Default::default()
        };
        let (once, _) = apply_augmentation(&img, None, &rec).unwrap();
        let (twice, _) = apply_augmentation(&once, None, &rec).unwrap();
        assert_eq!(twice, img);
    }

    #[test]
    fn rotation_keeps_mask_binary_and_tracks_image() {
        let img = test_image();
        let m = test_mask();
        let rec = AugmentRecord {
            rotation_deg: Some(20.0),
            ..Default::default()
        };
        let (out_img, out_mask) = apply_augmentation(&img, Some(&m), &rec).unwrap();
        let out_mask = out_mask.unwrap();
        assert!(out_mask.data.iter().all(|&v| v <= 1));
        assert!(out_mask.foreground_count() > 0);
        // mask centroid should sit where the image peak moved
        let (mut cx, mut cy, mut n) = (0.0, 0.0, 0.0);
        for y in 0..32 {
            for x in 0..32 {
                if out_mask.get(x, y) == 1 {
                    cx += x as f64;
                    cy += y as f64;
                    n += 1.0;
                }
            }
        }
        let (cx, cy) = (cx / n, cy / n);
        let peak = out_img
            .data
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, _)| ((i % 32) as f64, (i / 32) as f64))
            .unwrap();
        assert!((cx - peak.0).abs() <= 1.0 && (cy - peak.1).abs() <= 1.0);
    }

    #[test]
    fn rotation_matches_inverse_map_oracle() {
        let m = test_mask();
        let rec = AugmentRecord {
            rotation_deg: Some(20.0),
            ..Default::default()
        };
        let (_, out_mask) = apply_augmentation(
            &Image2::zeros(32, 32),
            Some(&m),
            &rec,
        )
        .unwrap();
        let out_mask = out_mask.unwrap();
        // direct per-pixel inverse mapping
        let theta = 20.0_f64.to_radians();
        let c = (15.5, 15.5);
        for y in 0..32usize {
            for x in 0..32usize {
                let (s, co) = (-theta).sin_cos();
                let dx = x as f64 - c.0;
                let dy = y as f64 - c.1;
                let sx = (co * dx - s * dy + c.0).round() as isize;
                let sy = (s * dx + co * dy + c.1).round() as isize;
                let expect = if sx >= 0 && sy >= 0 && sx < 32 && sy < 32 {
                    m.get(sx as usize, sy as usize)
                } else {
                    0
                };
                assert_eq!(out_mask.get(x, y), expect, "at ({x},{y})");
            }
        }
    }

    #[test]
    fn noise_sigma_matches_sample_sd() {
        let img = Image2 {
            width: 384,
            height: 384,
            data: vec![0.5; 384 * 384],
        };
        let rec = AugmentRecord {
            noise_sigma: Some(0.08),
            noise_seed: Some(42),
            ..Default::default()
        };
        let (out, _) = apply_augmentation(&img, None, &rec).unwrap();
        let n = out.data.len() as f64;
        let mean: f64 = out.data.iter().map(|v| v - 0.5).sum::<f64>() / n;
        let var: f64 = out
            .data
            .iter()
            .map(|v| (v - 0.5 - mean).powi(2))
            .sum::<f64>()
            / n;
        let sd = var.sqrt();
        assert!((sd - 0.08).abs() < 0.008, "sample sd {sd}");
    }

    #[test]
    fn blur_preserves_mean_of_constant() {
        let img = Image2 {
            width: 16,
            height: 16,
            data: vec![0.7; 256],
        };
        let rec = AugmentRecord {
            blur_sigma: Some(1.3),
            ..Default::default()
        };
        let (out, _) = apply_augmentation(&img, None, &rec).unwrap();
        for &v in &out.data {
            assert!((v - 0.7).abs() < 1e-12);
        }
    }

    #[test]
    fn replay_is_bit_identical() {
        let cfg = AugmentConfig::lesion(99);
        let img = test_image();
        let m = test_mask();
        let mut rng = sample_rng(cfg.seed, 5);
        let rec = sample_augmentation(&cfg, &mut rng).unwrap();
        let (a_img, a_mask) = apply_augmentation(&img, Some(&m), &rec).unwrap();
        let (b_img, b_mask) = apply_augmentation(&img, Some(&m), &rec).unwrap();
        assert_eq!(a_img, b_img);
        assert_eq!(a_mask, b_mask);
    }
}
