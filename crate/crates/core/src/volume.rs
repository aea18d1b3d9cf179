//! Volumes, binary masks, per-slice detections.
//!
//! Grids are axis aligned: voxel (i, j, k) sits at `origin + (i*sx, j*sy, k*sz)`
//! in mm. Data is row major with x fastest.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Tolerance for comparing spacing/origin between two grids (mm).
pub const GRID_TOL_MM: f64 = 1e-6;

/// 3D scalar image with physical voxel spacing.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    pub dims: (usize, usize, usize),
    pub spacing: (f64, f64, f64),
    pub origin: (f64, f64, f64),
    pub data: Vec<f64>,
}

impl Volume {
    pub fn new(
        dims: (usize, usize, usize),
        spacing: (f64, f64, f64),
        origin: (f64, f64, f64),
        data: Vec<f64>,
    ) -> Result<Self> {
        validate_grid(dims, spacing)?;
        if data.len() != dims.0 * dims.1 * dims.2 {
            return Err(Error::Integrity(format!(
                "data length {} does not match dims {}x{}x{}",
                data.len(),
                dims.0,
                dims.1,
                dims.2
            )));
        }
        Ok(Volume {
            dims,
            spacing,
            origin,
            data,
        })
    }

    pub fn zeros(dims: (usize, usize, usize), spacing: (f64, f64, f64)) -> Self {
        Volume {
            dims,
            spacing,
            origin: (0.0, 0.0, 0.0),
            data: vec![0.0; dims.0 * dims.1 * dims.2],
        }
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims.0 * (j + self.dims.1 * k)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[self.index(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: f64) {
        let idx = self.index(i, j, k);
        self.data[idx] = v;
    }

    /// x-y plane at `z`, returned as a copy.
    pub fn extract_slice(&self, z: usize) -> Result<Image2> {
        if z >= self.dims.2 {
            return Err(Error::SliceOutOfRange {
                index: z,
                len: self.dims.2,
            });
        }
        let (nx, ny, _) = self.dims;
        let start = nx * ny * z;
        Ok(Image2 {
            width: nx,
            height: ny,
            data: self.data[start..start + nx * ny].to_vec(),
        })
    }

    pub fn from_slices(
        slices: &[Image2],
        spacing: (f64, f64, f64),
        origin: (f64, f64, f64),
    ) -> Result<Self> {
        let first = slices
            .first()
            .ok_or_else(|| Error::Contract("no slices given".into()))?;
        let (nx, ny) = (first.width, first.height);
        let mut data = Vec::with_capacity(nx * ny * slices.len());
        for s in slices {
            if s.width != nx || s.height != ny {
                return Err(Error::Contract("slice shapes differ".into()));
            }
            data.extend_from_slice(&s.data);
        }
        Volume::new((nx, ny, slices.len()), spacing, origin, data)
    }
}

/// Binary volume; same grid semantics as [`Volume`], values in {0, 1}.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    pub dims: (usize, usize, usize),
    pub spacing: (f64, f64, f64),
    pub origin: (f64, f64, f64),
    pub data: Vec<u8>,
}

impl Mask {
    pub fn new(
        dims: (usize, usize, usize),
        spacing: (f64, f64, f64),
        origin: (f64, f64, f64),
        data: Vec<u8>,
    ) -> Result<Self> {
        validate_grid(dims, spacing)?;
        if data.len() != dims.0 * dims.1 * dims.2 {
            return Err(Error::Integrity(format!(
                "mask data length {} does not match dims",
                data.len()
            )));
        }
        if data.iter().any(|&v| v > 1) {
            return Err(Error::Integrity("mask values must be 0 or 1".into()));
        }
        Ok(Mask {
            dims,
            spacing,
            origin,
            data,
        })
    }

    pub fn zeros(dims: (usize, usize, usize), spacing: (f64, f64, f64)) -> Self {
        Mask {
            dims,
            spacing,
            origin: (0.0, 0.0, 0.0),
            data: vec![0; dims.0 * dims.1 * dims.2],
        }
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims.0 * (j + self.dims.1 * k)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> u8 {
        self.data[self.index(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: u8) {
        let idx = self.index(i, j, k);
        self.data[idx] = v;
    }

    pub fn foreground_count(&self) -> usize {
        self.data.iter().filter(|&&v| v == 1).count()
    }

    pub fn is_empty_mask(&self) -> bool {
        !self.data.contains(&1)
    }

    pub fn extract_slice(&self, z: usize) -> Result<Mask2> {
        if z >= self.dims.2 {
            return Err(Error::SliceOutOfRange {
                index: z,
                len: self.dims.2,
            });
        }
        let (nx, ny, _) = self.dims;
        let start = nx * ny * z;
        Ok(Mask2 {
            width: nx,
            height: ny,
            data: self.data[start..start + nx * ny].to_vec(),
        })
    }

    pub fn to_volume(&self) -> Volume {
        Volume {
            dims: self.dims,
            spacing: self.spacing,
            origin: self.origin,
            data: self.data.iter().map(|&v| v as f64).collect(),
        }
    }

    pub fn from_volume(v: &Volume) -> Result<Self> {
        let data: Vec<u8> = v
            .data
            .iter()
            .map(|&x| {
                if x == 0.0 {
                    Ok(0u8)
                } else if x == 1.0 {
                    Ok(1u8)
                } else {
                    Err(Error::Integrity(format!("non-binary voxel value {x}")))
                }
            })
            .collect::<Result<_>>()?;
        Mask::new(v.dims, v.spacing, v.origin, data)
    }
}

fn validate_grid(dims: (usize, usize, usize), spacing: (f64, f64, f64)) -> Result<()> {
    if dims.0 < 1 || dims.1 < 1 || dims.2 < 1 {
        return Err(Error::Contract("dims components must be >= 1".into()));
    }
    if spacing.0 <= 0.0 || spacing.1 <= 0.0 || spacing.2 <= 0.0 {
        return Err(Error::Contract("spacing components must be > 0".into()));
    }
    Ok(())
}

/// (dims, spacing, origin) triple describing a voxel grid.
pub type Grid = ((usize, usize, usize), (f64, f64, f64), (f64, f64, f64));

/// Grid descriptor used for compatibility checks between paired images.
pub trait Gridded {
    fn grid(&self) -> Grid;
}

impl Gridded for Volume {
    fn grid(&self) -> Grid {
        (self.dims, self.spacing, self.origin)
    }
}

impl Gridded for Mask {
    fn grid(&self) -> Grid {
        (self.dims, self.spacing, self.origin)
    }
}

/// Rejects pairs whose dims differ or whose spacing/origin differ by more
/// than [`GRID_TOL_MM`].
pub fn check_grid_compatible(a: &impl Gridded, b: &impl Gridded) -> Result<()> {
    let (da, sa, oa) = a.grid();
    let (db, sb, ob) = b.grid();
    if da != db {
        return Err(Error::GridMismatch(format!("dims {da:?} vs {db:?}")));
    }
    let close = |x: f64, y: f64| (x - y).abs() <= GRID_TOL_MM;
    if !(close(sa.0, sb.0) && close(sa.1, sb.1) && close(sa.2, sb.2)) {
        return Err(Error::GridMismatch(format!("spacing {sa:?} vs {sb:?}")));
    }
    if !(close(oa.0, ob.0) && close(oa.1, ob.1) && close(oa.2, ob.2)) {
        return Err(Error::GridMismatch(format!("origin {oa:?} vs {ob:?}")));
    }
    Ok(())
}

/// 2D scalar image, row major, x fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Image2 {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Image2 {
    pub fn zeros(width: usize, height: usize) -> Self {
        Image2 {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Image2 {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }
}

/// 2D binary mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mask2 {
    pub width: usize,
    pub height: usize,
    pub data: Vec<u8>,
}

impl Mask2 {
    pub fn zeros(width: usize, height: usize) -> Self {
        Mask2 {
            width,
            height,
            data: vec![0; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y) as u8);
            }
        }
        Mask2 {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.data[y * self.width + x] = v;
    }

    pub fn foreground_count(&self) -> usize {
        self.data.iter().filter(|&&v| v == 1).count()
    }

    pub fn is_empty_mask(&self) -> bool {
        !self.data.contains(&1)
    }

    /// Tight axis-aligned box of the foreground, inclusive-exclusive.
    pub fn tight_bbox(&self) -> Option<BBox> {
        let (mut x0, mut y0) = (usize::MAX, usize::MAX);
        let (mut x1, mut y1) = (0usize, 0usize);
        let mut any = false;
        for y in 0..self.height {
            for x in 0..self.width {
                if self.get(x, y) == 1 {
                    any = true;
                    x0 = x0.min(x);
                    y0 = y0.min(y);
                    x1 = x1.max(x + 1);
                    y1 = y1.max(y + 1);
                }
            }
        }
        any.then_some(BBox { x0, y0, x1, y1 })
    }

    pub fn union(&self, other: &Mask2) -> Mask2 {
        debug_assert_eq!((self.width, self.height), (other.width, other.height));
        Mask2 {
            width: self.width,
            height: self.height,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a | b)
                .collect(),
        }
    }

    pub fn intersection_count(&self, other: &Mask2) -> usize {
        self.data
            .iter()
            .zip(&other.data)
            .filter(|(&a, &b)| a == 1 && b == 1)
            .count()
    }
}

/// Overlap coefficient between two binary masks on the same pixel grid.
/// Returns `None` when both masks are empty.
pub fn mask2_dsc(a: &Mask2, b: &Mask2) -> Option<f64> {
    let na = a.foreground_count();
    let nb = b.foreground_count();
    if na + nb == 0 {
        return None;
    }
    let inter = a.intersection_count(b);
    Some(2.0 * inter as f64 / (na + nb) as f64)
}

/// Axis-aligned pixel box, inclusive-exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BBox {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl BBox {
    pub fn width(&self) -> usize {
        self.x1 - self.x0
    }

    pub fn height(&self) -> usize {
        self.y1 - self.y0
    }

    pub fn center(&self) -> (f64, f64) {
        (
            self.x0 as f64 + self.width() as f64 / 2.0,
            self.y0 as f64 + self.height() as f64 / 2.0,
        )
    }
}

/// One per-slice detector output.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub slice: usize,
    pub bbox: BBox,
    pub mask: Mask2,
    pub score: f64,
    pub label: String,
}

impl Detection {
    /// The bbox is always recomputed from the mask foreground.
    pub fn new(slice: usize, mask: Mask2, score: f64, label: impl Into<String>) -> Result<Self> {
        if !(0.0..=1.0).contains(&score) {
            return Err(Error::Contract(format!("score {score} outside [0, 1]")));
        }
        let bbox = mask
            .tight_bbox()
            .ok_or_else(|| Error::Contract("detection mask has no foreground".into()))?;
        Ok(Detection {
            slice,
            bbox,
            mask,
            score,
            label: label.into(),
        })
    }
}

/// Per-case detection / truth tallies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CaseCounts {
    pub dtp: u64,
    pub dtn: u64,
    pub tp: u64,
    pub tn: u64,
}

impl CaseCounts {
    pub fn new(dtp: u64, dtn: u64, tp: u64, tn: u64) -> Result<Self> {
        if dtp > tp || dtn > tn {
            return Err(Error::Contract(format!(
                "counts out of range: dtp={dtp} tp={tp} dtn={dtn} tn={tn}"
            )));
        }
        Ok(CaseCounts { dtp, dtn, tp, tn })
    }
}
