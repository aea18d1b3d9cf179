//! Segmentation evaluation: overlap coefficient, percentile surface
//! distance, slice- and pixel-level sensitivity/specificity, and the
//! lesion agreement rate.

use crate::error::{Error, Result};
use crate::volume::{check_grid_compatible, CaseCounts, Mask};
use serde::{Deserialize, Serialize};

/// Boundary voxel centers of a mask, in physical mm.
#[derive(Debug, Clone, PartialEq)]
pub struct SurfacePointSet {
    pub points: Vec<[f64; 3]>,
}

/// Dice similarity coefficient, `2|T∩P| / (|T| + |P|)`.
///
/// Errors when both masks are empty; that case is a pipeline bug, not a
/// score.
pub fn dsc(y_true: &Mask, y_pred: &Mask) -> Result<f64> {
    check_grid_compatible(y_true, y_pred)?;
    let nt = y_true.foreground_count();
    let np = y_pred.foreground_count();
    if nt + np == 0 {
        return Err(Error::UndefinedMetric("DSC of two empty masks".into()));
    }
    let inter = y_true
        .data
        .iter()
        .zip(&y_pred.data)
        .filter(|(&a, &b)| a == 1 && b == 1)
        .count();
    Ok(2.0 * inter as f64 / (nt + np) as f64)
}

/// Foreground voxels with at least one face-adjacent (6-connectivity)
/// background or out-of-bounds neighbor, as physical voxel centers.
pub fn surface_points(m: &Mask) -> Result<SurfacePointSet> {
    if m.is_empty_mask() {
        return Err(Error::UndefinedMetric("surface of an empty mask".into()));
    }
    let (nx, ny, nz) = m.dims;
    let (sx, sy, sz) = m.spacing;
    let (ox, oy, oz) = m.origin;
    let mut points = Vec::new();
    for k in 0..nz {
        for j in 0..ny {
            for i in 0..nx {
                if m.get(i, j, k) != 1 {
                    continue;
                }
                let boundary = (i == 0 || m.get(i - 1, j, k) == 0)
                    || (i + 1 == nx || m.get(i + 1, j, k) == 0)
                    || (j == 0 || m.get(i, j - 1, k) == 0)
                    || (j + 1 == ny || m.get(i, j + 1, k) == 0)
                    || (k == 0 || m.get(i, j, k - 1) == 0)
                    || (k + 1 == nz || m.get(i, j, k + 1) == 0);
                if boundary {
                    points.push([
                        ox + i as f64 * sx,
                        oy + j as f64 * sy,
                        oz + k as f64 * sz,
                    ]);
                }
            }
        }
    }
    Ok(SurfacePointSet { points })
}

#[inline]
fn dist2(a: [f64; 3], b: [f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    dx * dx + dy * dy + dz * dz
}

/// Uniform bucket grid over a point set for exact nearest-distance
/// queries. Output is bit-equivalent to a linear scan: both paths take
/// the min over the same squared distances.
struct BucketGrid {
    min: [f64; 3],
    cell: f64,
    dims: [usize; 3],
    buckets: Vec<Vec<[f64; 3]>>,
}

impl BucketGrid {
    fn build(points: &[[f64; 3]]) -> Self {
        let mut min = [f64::INFINITY; 3];
        let mut max = [f64::NEG_INFINITY; 3];
        for p in points {
            for a in 0..3 {
                min[a] = min[a].min(p[a]);
                max[a] = max[a].max(p[a]);
            }
        }
        let extent: f64 = (0..3).map(|a| max[a] - min[a]).fold(0.0, f64::max);
        let target_cells = (points.len() as f64).cbrt().ceil().max(1.0);
        let cell = (extent / target_cells).max(1e-9);
        let dims = std::array::from_fn(|a| {
            (((max[a] - min[a]) / cell).floor() as usize + 1).max(1)
        });
        let mut buckets = vec![Vec::new(); dims[0] * dims[1] * dims[2]];
        let grid = BucketGrid {
            min,
            cell,
            dims,
            buckets: Vec::new(),
        };
        for &p in points {
            let idx = grid.bucket_index(grid.cell_of(p));
            buckets[idx].push(p);
        }
        BucketGrid { buckets, ..grid }
    }

    fn cell_of(&self, p: [f64; 3]) -> [isize; 3] {
        std::array::from_fn(|a| {
            (((p[a] - self.min[a]) / self.cell).floor() as isize)
                .clamp(0, self.dims[a] as isize - 1)
        })
    }

    fn bucket_index(&self, c: [isize; 3]) -> usize {
        c[0] as usize + self.dims[0] * (c[1] as usize + self.dims[1] * c[2] as usize)
    }

    /// Exact min squared distance from `q` to the stored set.
    fn nearest_dist2(&self, q: [f64; 3]) -> f64 {
        let home = self.cell_of(q);
        let mut best = f64::INFINITY;
        let max_ring = self.dims.iter().max().unwrap() + 1;
        for ring in 0..=max_ring {
            // all points in cells at Chebyshev ring `ring` are at least
            // (ring - 1) * cell away from q
            if ring >= 2 {
                let lower = (ring - 1) as f64 * self.cell;
                if lower * lower > best {
                    break;
                }
            }
            let r = ring as isize;
            for dz in -r..=r {
                for dy in -r..=r {
                    for dx in -r..=r {
                        if dx.abs().max(dy.abs()).max(dz.abs()) != r {
                            continue;
                        }
                        let c = [home[0] + dx, home[1] + dy, home[2] + dz];
                        if c.iter()
                            .zip(&self.dims)
                            .any(|(&ci, &di)| ci < 0 || ci >= di as isize)
                        {
                            continue;
                        }
                        for &p in &self.buckets[self.bucket_index(c)] {
                            let d = dist2(q, p);
                            if d < best {
                                best = d;
                            }
                        }
                    }
                }
            }
        }
        best
    }
}

/// Nearest-rank percentile of `min_{b in B} d(a, b)` over all `a` in A.
/// `pct = 100` reproduces the directed Hausdorff maximum.
pub fn directed_hd_percentile(a: &SurfacePointSet, b: &SurfacePointSet, pct: f64) -> Result<f64> {
    if a.points.is_empty() || b.points.is_empty() {
        return Err(Error::UndefinedMetric(
            "Hausdorff distance over an empty point set".into(),
        ));
    }
    if !(pct > 0.0 && pct <= 100.0) {
        return Err(Error::Contract(format!("percentile {pct} outside (0, 100]")));
    }
    let grid = BucketGrid::build(&b.points);
    let mut mins: Vec<f64> = a
        .points
        .iter()
        .map(|&p| grid.nearest_dist2(p).sqrt())
        .collect();
    mins.sort_by(|x, y| x.partial_cmp(y).unwrap());
    // nearest-rank: 1-based index ceil(pct/100 * n)
    let n = mins.len();
    let rank = ((pct / 100.0 * n as f64).ceil() as usize).clamp(1, n);
    Ok(mins[rank - 1])
}

/// 95th-percentile Hausdorff distance between mask surfaces, in mm.
///
/// `symmetric = false` is the directed form with A = truth surface;
/// `symmetric = true` takes the max of the two directed values.
pub fn hd95(y_true: &Mask, y_pred: &Mask, symmetric: bool) -> Result<f64> {
    hd_percentile(y_true, y_pred, 95.0, symmetric)
}

pub fn hd_percentile(y_true: &Mask, y_pred: &Mask, pct: f64, symmetric: bool) -> Result<f64> {
    check_grid_compatible(y_true, y_pred)?;
    let a = surface_points(y_true)?;
    let b = surface_points(y_pred)?;
    let forward = directed_hd_percentile(&a, &b, pct)?;
    if !symmetric {
        return Ok(forward);
    }
    let backward = directed_hd_percentile(&b, &a, pct)?;
    Ok(forward.max(backward))
}

/// Slice-level sensitivity/specificity for prostate detection.
///
/// A slice is a true positive when the truth mask has foreground there;
/// `per_slice_detected[z]` says whether the detector flagged slice z.
pub fn slice_sens_spec(
    truth: &Mask,
    per_slice_detected: &[bool],
) -> Result<(Option<f64>, Option<f64>, CaseCounts)> {
    let nz = truth.dims.2;
    if per_slice_detected.len() != nz {
        return Err(Error::Contract(format!(
            "expected {} per-slice flags, got {}",
            nz,
            per_slice_detected.len()
        )));
    }
    let mut tp = 0u64;
    let mut tn = 0u64;
    let mut dtp = 0u64;
    let mut dtn = 0u64;
    for (z, &detected) in per_slice_detected.iter().enumerate() {
        let truly_present = !truth.extract_slice(z).unwrap().is_empty_mask();
        if truly_present {
            tp += 1;
            if detected {
                dtp += 1;
            }
        } else {
            tn += 1;
            if !detected {
                dtn += 1;
            }
        }
    }
    let counts = CaseCounts { dtp, dtn, tp, tn };
    let sens = (tp > 0).then(|| dtp as f64 / tp as f64);
    let spec = (tn > 0).then(|| dtn as f64 / tn as f64);
    Ok((sens, spec, counts))
}

/// Pixel-level sensitivity/specificity, counted inside the prostate only.
pub fn pixel_sens_spec(
    truth: &Mask,
    pred: &Mask,
    prostate: &Mask,
) -> Result<(Option<f64>, Option<f64>, CaseCounts)> {
    check_grid_compatible(truth, pred)?;
    check_grid_compatible(truth, prostate)?;
    if prostate.is_empty_mask() {
        return Err(Error::Contract("prostate mask is empty".into()));
    }
    let mut tp = 0u64;
    let mut tn = 0u64;
    let mut dtp = 0u64;
    let mut dtn = 0u64;
    for idx in 0..truth.data.len() {
        if prostate.data[idx] != 1 {
            continue;
        }
        let t = truth.data[idx] == 1;
        let p = pred.data[idx] == 1;
        if t {
            tp += 1;
            if p {
                dtp += 1;
            }
        } else {
            tn += 1;
            if !p {
                dtn += 1;
            }
        }
    }
    let counts = CaseCounts { dtp, dtn, tp, tn };
    let sens = (tp > 0).then(|| dtp as f64 / tp as f64);
    let spec = (tn > 0).then(|| dtn as f64 / tn as f64);
    Ok((sens, spec, counts))
}

/// Fraction of clinician lesions matched one-to-one by a prediction with
/// DSC above `min_dsc` (0.2 for the reported agreement rate).
pub const AGREEMENT_DSC_THRESHOLD: f64 = 0.2;

pub fn agreement_rate(
    gt_lesions: &[Mask],
    pred_lesions: &[Mask],
) -> Result<(f64, Vec<(usize, usize)>)> {
    agreement_rate_with_threshold(gt_lesions, pred_lesions, AGREEMENT_DSC_THRESHOLD)
}

pub fn agreement_rate_with_threshold(
    gt_lesions: &[Mask],
    pred_lesions: &[Mask],
    min_dsc: f64,
) -> Result<(f64, Vec<(usize, usize)>)> {
    if gt_lesions.is_empty() {
        return Err(Error::UndefinedMetric(
            "agreement over an empty ground-truth lesion list".into(),
        ));
    }
    for g in gt_lesions.iter().chain(pred_lesions) {
        check_grid_compatible(&gt_lesions[0], g)?;
    }
    // all candidate pairs, best DSC first; ties broken by (gt, pred) index
    let mut pairs: Vec<(f64, usize, usize)> = Vec::new();
    for (gi, g) in gt_lesions.iter().enumerate() {
        for (pi, p) in pred_lesions.iter().enumerate() {
            if g.foreground_count() + p.foreground_count() == 0 {
                continue;
            }
            let inter = g
                .data
                .iter()
                .zip(&p.data)
                .filter(|(&a, &b)| a == 1 && b == 1)
                .count();
            let d = 2.0 * inter as f64 / (g.foreground_count() + p.foreground_count()) as f64;
            pairs.push((d, gi, pi));
        }
    }
    pairs.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap()
            .then(a.1.cmp(&b.1))
            .then(a.2.cmp(&b.2))
    });
    let mut gt_used = vec![false; gt_lesions.len()];
    let mut pred_used = vec![false; pred_lesions.len()];
    let mut matched = Vec::new();
    for (d, gi, pi) in pairs {
        if d <= min_dsc {
            break;
        }
        if gt_used[gi] || pred_used[pi] {
            continue;
        }
        gt_used[gi] = true;
        pred_used[pi] = true;
        matched.push((gi, pi));
    }
    let agreement = matched.len() as f64 / gt_lesions.len() as f64;
    Ok((agreement, matched))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReportMode {
    ProstateSlice,
    LesionPixel,
}

/// All computed metrics for one case.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    #[serde(serialize_with = "ser_sig6")]
    pub dsc: f64,
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        serialize_with = "ser_opt_sig6"
    )]
    pub hd95_mm: Option<f64>,
    pub hd95_symmetric: bool,
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        serialize_with = "ser_opt_sig6"
    )]
    pub sensitivity: Option<f64>,
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        serialize_with = "ser_opt_sig6"
    )]
    pub specificity: Option<f64>,
    #[serde(
        default,
        skip_serializing_if = "Option::is_none",
        serialize_with = "ser_opt_sig6"
    )]
    pub agreement: Option<f64>,
    pub counts: CaseCounts,
    pub mode: ReportMode,
}

/// Rounds to 6 significant digits for serialization.
pub fn round_sig6(v: f64) -> f64 {
    if v == 0.0 || !v.is_finite() {
        return v;
    }
    let exp = v.abs().log10().floor() as i32;
    let factor = 10f64.powi(5 - exp);
    (v * factor).round() / factor
}

fn ser_sig6<S: serde::Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_f64(round_sig6(*v))
}

fn ser_opt_sig6<S: serde::Serializer>(
    v: &Option<f64>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(x) => s.serialize_some(&round_sig6(*x)),
        None => s.serialize_none(),
    }
}
