//! Synthetic test phantoms: a T2-like volume, prostate and lesion ground
//! truth, and simulated per-slice detections with configurable jitter.
//! Deterministic given the seed.

use crate::error::{Error, Result};
use crate::volume::{Detection, Mask, Mask2, Volume};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ellipsoid {
    /// Center in voxel coordinates.
    pub center: [f64; 3],
    /// Radii in voxels.
    pub radii: [f64; 3],
}

impl Ellipsoid {
    pub fn contains(&self, i: f64, j: f64, k: f64) -> bool {
        let dx = (i - self.center[0]) / self.radii[0];
        let dy = (j - self.center[1]) / self.radii[1];
        let dz = (k - self.center[2]) / self.radii[2];
        dx * dx + dy * dy + dz * dz <= 1.0
    }
}

/// One planted lesion: an elliptic cylinder, constant cross-section over a
/// contiguous slice range, so adjacent detection slices overlap perfectly
/// when jitter is zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LesionSpec {
    pub center: [f64; 3],
    /// In-plane radii (voxels) and half-extent along z (slices).
    pub radii: [f64; 3],
    pub peak_score: f64,
    /// Uniform downward jitter on per-slice scores, as a fraction of peak.
    pub score_jitter: f64,
    /// Probability of flipping a boundary pixel of each detection mask.
    pub mask_jitter: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhantomSpec {
    pub dims: (usize, usize, usize),
    pub spacing: (f64, f64, f64),
    pub prostate: Ellipsoid,
    pub lesions: Vec<LesionSpec>,
    /// Gaussian intensity noise on the T2-like volume.
    pub noise: f64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct Phantom {
    pub t2: Volume,
    pub prostate: Mask,
    pub lesions: Vec<Mask>,
    pub detections: Vec<Detection>,
}

impl PhantomSpec {
    /// Desk-scale phantom with `n_lesions` (up to 7) disjoint stacks at
    /// distinct in-plane positions, peak scores strictly decreasing from
    /// 0.98, all above the 0.7 linking cutoff.
    pub fn example(seed: u64, n_lesions: usize) -> Result<Self> {
        if n_lesions > 7 {
            return Err(Error::Contract("example phantom supports up to 7 lesions".into()));
        }
        let dims = (64, 64, 20);
        let prostate = Ellipsoid {
            center: [32.0, 32.0, 10.0],
            radii: [24.0, 22.0, 8.5],
        };
        // distinct in-plane offsets so stacks never overlap or touch
        let sites: [(f64, f64, f64); 7] = [
            (32.0, 32.0, 10.0),
            (22.0, 26.0, 7.0),
            (42.0, 26.0, 13.0),
            (22.0, 39.0, 12.0),
            (42.0, 39.0, 8.0),
            (32.0, 22.0, 14.0),
            (32.0, 42.0, 6.0),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lesions = (0..n_lesions)
            .map(|i| {
                let (cx, cy, cz) = sites[i];
                let half_z = 1.0 + (rng.gen::<f64>() * 2.0).floor(); // 1..=2
                LesionSpec {
                    center: [cx, cy, cz],
                    radii: [3.0, 2.5, half_z],
                    peak_score: 0.98 - 0.03 * i as f64,
                    score_jitter: 0.0,
                    mask_jitter: 0.0,
                }
            })
            .collect();
        Ok(PhantomSpec {
            dims,
            spacing: (0.5, 0.5, 3.6),
            prostate,
            lesions,
            noise: 0.02,
            seed,
        })
    }

    pub fn validate(&self) -> Result<()> {
        for (i, l) in self.lesions.iter().enumerate() {
            if !(0.0..=1.0).contains(&l.peak_score) {
                return Err(Error::Contract(format!(
                    "lesion {i}: peak score {} outside [0, 1]",
                    l.peak_score
                )));
            }
        }
        Ok(())
    }
}

fn lesion_slice_range(l: &LesionSpec, nz: usize) -> (usize, usize) {
    let lo = (l.center[2] - l.radii[2]).ceil().max(0.0) as usize;
    let hi = ((l.center[2] + l.radii[2]).floor() as usize).min(nz - 1);
    (lo, hi)
}

fn lesion_cross_section(l: &LesionSpec, nx: usize, ny: usize) -> Mask2 {
    Mask2::from_fn(nx, ny, |x, y| {
        let dx = (x as f64 - l.center[0]) / l.radii[0];
        let dy = (y as f64 - l.center[1]) / l.radii[1];
        dx * dx + dy * dy <= 1.0
    })
}

fn jitter_mask(mask: &Mask2, prob: f64, rng: &mut impl Rng) -> Mask2 {
    if prob <= 0.0 {
        return mask.clone();
    }
    let mut out = mask.clone();
    for y in 0..mask.height {
        for x in 0..mask.width {
            let v = mask.get(x, y);
            // boundary pixels: foreground with a 4-neighbor background, or
            // background with a 4-neighbor foreground
            let mut boundary = false;
            for (dx, dy) in [(-1isize, 0isize), (1, 0), (0, -1), (0, 1)] {
                let nxp = x as isize + dx;
                let nyp = y as isize + dy;
                if nxp < 0 || nyp < 0 || nxp >= mask.width as isize || nyp >= mask.height as isize {
                    continue;
                }
                if mask.get(nxp as usize, nyp as usize) != v {
                    boundary = true;
                    break;
                }
            }
            if boundary && rng.gen::<f64>() < prob {
                out.set(x, y, 1 - v);
            }
        }
    }
    if out.is_empty_mask() {
        mask.clone()
    } else {
        out
    }
}

pub fn generate(spec: &PhantomSpec) -> Result<Phantom> {
    spec.validate()?;
    let (nx, ny, nz) = spec.dims;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    let mut prostate = Mask::zeros(spec.dims, spec.spacing);
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                if spec.prostate.contains(i as f64, j as f64, k as f64) {
                    prostate.set(i, j, k, 1);
                }
            }
        }
    }

    let mut lesions = Vec::with_capacity(spec.lesions.len());
    for (li, l) in spec.lesions.iter().enumerate() {
        let (lo, hi) = lesion_slice_range(l, nz);
        let section = lesion_cross_section(l, nx, ny);
        if section.is_empty_mask() {
            return Err(Error::Contract(format!("lesion {li} has empty cross-section")));
        }
        let mut m = Mask::zeros(spec.dims, spec.spacing);
        for z in lo..=hi {
            for y in 0..ny {
                for x in 0..nx {
                    if section.get(x, y) == 1 {
                        if prostate.get(x, y, z) == 0 {
                            return Err(Error::Contract(format!(
                                "lesion {li} extends outside the prostate at ({x},{y},{z})"
                            )));
                        }
                        m.set(x, y, z, 1);
                    }
                }
            }
        }
        lesions.push(m);
    }

    // T2-like appearance: smooth gradient background, bright gland,
    // hypointense lesions, Gaussian noise
    let mut t2 = Volume::zeros(spec.dims, spec.spacing);
    t2.spacing = spec.spacing;
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                let mut v = 0.2 + 0.001 * (i + j) as f64;
                if prostate.get(i, j, k) == 1 {
                    v += 0.4;
                }
                for l in &lesions {
                    if l.get(i, j, k) == 1 {
                        v -= 0.25;
                    }
                }
                v += spec.noise * gauss(&mut rng);
                t2.set(i, j, k, v);
            }
        }
    }

    // simulated detections: prostate per slice, then lesions in spec order
    let mut detections = Vec::new();
    for z in 0..nz {
        let section = prostate.extract_slice(z)?;
        if section.is_empty_mask() {
            continue;
        }
        let score = 0.8 + 0.15 * rng.gen::<f64>();
        detections.push(Detection::new(z, section, score, "prostate")?);
    }
    for (l, mask3) in spec.lesions.iter().zip(&lesions) {
        let (lo, hi) = lesion_slice_range(l, nz);
        for z in lo..=hi {
            let section = mask3.extract_slice(z)?;
            let jittered = jitter_mask(&section, l.mask_jitter, &mut rng);
            let score =
                (l.peak_score * (1.0 - l.score_jitter * rng.gen::<f64>())).clamp(0.0, 1.0);
            detections.push(Detection::new(z, jittered, score, "lesion")?);
        }
    }

    Ok(Phantom {
        t2,
        prostate,
        lesions,
        detections,
    })
}

fn gauss(rng: &mut impl Rng) -> f64 {
    // Box-Muller
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}
