//! Turns per-slice scored detections into ranked 3D lesion candidates.
//!
//! Pipeline: per-slice DSC-driven suppression first, then seeds are taken
//! in global score order and grown across adjacent slices while the
//! neighbor clears both the score and the overlap threshold.

use crate::error::{Error, Result};
use crate::volume::{mask2_dsc, Detection, Mask, Mask2};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AssemblyConfig {
    /// Pairwise mask-DSC above which two same-slice detections are unified.
    pub nms_dsc_threshold: f64,
    /// Minimum prediction score for an adjacent-slice detection to join a lesion.
    pub score_threshold: f64,
    /// Minimum in-plane DSC with the chain end for an adjacent detection to join.
    pub link_dsc_threshold: f64,
    /// Number of ranked lesions to extract.
    pub max_lesions: usize,
}

impl Default for AssemblyConfig {
    fn default() -> Self {
        AssemblyConfig {
            nms_dsc_threshold: 0.5,
            score_threshold: 0.7,
            link_dsc_threshold: 0.41,
            max_lesions: 5,
        }
    }
}

impl AssemblyConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("nms_dsc_threshold", self.nms_dsc_threshold),
            ("score_threshold", self.score_threshold),
            ("link_dsc_threshold", self.link_dsc_threshold),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Contract(format!("{name} = {v} outside [0, 1]")));
            }
        }
        if self.max_lesions < 1 {
            return Err(Error::Contract("max_lesions must be >= 1".into()));
        }
        Ok(())
    }
}

/// One assembled 3D lesion candidate: a gap-free stack of per-slice masks.
#[derive(Debug, Clone, PartialEq)]
pub struct Lesion3D {
    pub slices: BTreeMap<usize, Mask2>,
    pub score: f64,
    pub rank: usize,
    pub constituent_scores: Vec<f64>,
}

impl Lesion3D {
    pub fn slice_range(&self) -> (usize, usize) {
        let lo = *self.slices.keys().next().unwrap();
        let hi = *self.slices.keys().next_back().unwrap();
        (lo, hi)
    }

    /// Stacks the per-slice masks into a 3D mask on the given grid.
    pub fn to_mask(
        &self,
        dims: (usize, usize, usize),
        spacing: (f64, f64, f64),
        origin: (f64, f64, f64),
    ) -> Result<Mask> {
        let mut m = Mask::zeros(dims, spacing);
        m.origin = origin;
        for (&z, slice) in &self.slices {
            if z >= dims.2 || slice.width != dims.0 || slice.height != dims.1 {
                return Err(Error::Contract(
                    "lesion slice does not fit the target grid".into(),
                ));
            }
            for y in 0..slice.height {
                for x in 0..slice.width {
                    if slice.get(x, y) == 1 {
                        m.set(x, y, z, 1);
                    }
                }
            }
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProstateSliceDecision {
    pub slice: usize,
    pub present: bool,
    pub chosen: Option<Detection>,
}

/// Per-slice detection lists with consumption tracking for assembly.
#[derive(Debug, Clone)]
pub struct DetectionPool {
    slices: BTreeMap<usize, Vec<PoolEntry>>,
}

#[derive(Debug, Clone)]
struct PoolEntry {
    det: Detection,
    order: usize,
    consumed: bool,
}

/// Identifies one detection inside a pool.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DetectionId {
    pub slice: usize,
    index: usize,
}

impl DetectionPool {
    /// Groups detections by slice, preserving input order.
    pub fn from_detections(dets: Vec<Detection>) -> Self {
        let mut slices: BTreeMap<usize, Vec<PoolEntry>> = BTreeMap::new();
        for (order, det) in dets.into_iter().enumerate() {
            slices.entry(det.slice).or_default().push(PoolEntry {
                det,
                order,
                consumed: false,
            });
        }
        DetectionPool { slices }
    }

    /// Applies [`dsc_nms_slice`] to every slice.
    pub fn nms(&self, cfg: &AssemblyConfig) -> Result<DetectionPool> {
        let mut slices = BTreeMap::new();
        let mut order = 0usize;
        for (&z, entries) in &self.slices {
            let dets: Vec<Detection> = entries.iter().map(|e| e.det.clone()).collect();
            let merged = dsc_nms_slice(&dets, cfg)?;
            let entries: Vec<PoolEntry> = merged
                .into_iter()
                .map(|det| {
                    let e = PoolEntry {
                        det,
                        order,
                        consumed: false,
                    };
                    order += 1;
                    e
                })
                .collect();
            slices.insert(z, entries);
        }
        Ok(DetectionPool { slices })
    }

    pub fn get(&self, id: DetectionId) -> Option<&Detection> {
        self.slices
            .get(&id.slice)
            .and_then(|v| v.get(id.index))
            .map(|e| &e.det)
    }

    pub fn detections(&self) -> impl Iterator<Item = &Detection> {
        self.slices.values().flatten().map(|e| &e.det)
    }

    pub fn is_empty(&self) -> bool {
        self.slices.values().all(|v| v.is_empty())
    }

    fn unconsumed_on_slice(&self, z: usize) -> Vec<DetectionId> {
        self.slices
            .get(&z)
            .map(|v| {
                v.iter()
                    .enumerate()
                    .filter(|(_, e)| !e.consumed)
                    .map(|(index, _)| DetectionId { slice: z, index })
                    .collect()
            })
            .unwrap_or_default()
    }

    /// Globally best unconsumed detection: highest score, ties broken by
    /// lower slice index then lower input order.
    fn best_unconsumed(&self) -> Option<DetectionId> {
        let mut best: Option<(f64, usize, usize, DetectionId)> = None;
        for (&z, entries) in &self.slices {
            for (index, e) in entries.iter().enumerate() {
                if e.consumed {
                    continue;
                }
                let key = (e.det.score, z, e.order);
                let better = match &best {
                    None => true,
                    Some((s, bz, bo, _)) => {
                        key.0 > *s || (key.0 == *s && (z, e.order) < (*bz, *bo))
                    }
                };
                if better {
                    best = Some((key.0, z, e.order, DetectionId { slice: z, index }));
                }
            }
        }
        best.map(|(_, _, _, id)| id)
    }

    fn mark_consumed(&mut self, id: DetectionId) {
        self.slices.get_mut(&id.slice).unwrap()[id.index].consumed = true;
    }
}

/// Unifies same-slice detections whose mask DSC exceeds the threshold.
///
/// Greedy fixed point: the highest-DSC pair above threshold is replaced by
/// its union (score = max of the two) until no pair qualifies. Ties on DSC
/// go to the higher combined score, then to the earlier input positions.
pub fn dsc_nms_slice(dets: &[Detection], cfg: &AssemblyConfig) -> Result<Vec<Detection>> {
    cfg.validate()?;
    if dets.is_empty() {
        return Ok(Vec::new());
    }
    let slice = dets[0].slice;
    let extent = (dets[0].mask.width, dets[0].mask.height);
    for d in dets {
        if d.slice != slice {
            return Err(Error::Contract(
                "dsc_nms_slice got detections from mixed slices".into(),
            ));
        }
        if (d.mask.width, d.mask.height) != extent {
            return Err(Error::Contract(
                "dsc_nms_slice got detections with mixed image extents".into(),
            ));
        }
    }

    struct Work {
        det: Detection,
        order: usize,
    }
    let mut work: Vec<Work> = dets
        .iter()
        .enumerate()
        .map(|(order, det)| Work {
            det: det.clone(),
            order,
        })
        .collect();

    loop {
        // best pair: highest DSC, then higher combined score, then earlier positions
        // key: (dsc, combined score, input orders, index a, index b)
        type PairKey = (f64, f64, (usize, usize), usize, usize);
        let mut best: Option<PairKey> = None;
        for a in 0..work.len() {
            for b in a + 1..work.len() {
                let d = mask2_dsc(&work[a].det.mask, &work[b].det.mask).unwrap_or(0.0);
                if d <= cfg.nms_dsc_threshold {
                    continue;
                }
                let combined = work[a].det.score + work[b].det.score;
                let orders = {
                    let (oa, ob) = (work[a].order, work[b].order);
                    (oa.min(ob), oa.max(ob))
                };
                let better = match &best {
                    None => true,
                    Some((bd, bc, bo, _, _)) => {
                        d > *bd || (d == *bd && (combined > *bc || (combined == *bc && orders < *bo)))
                    }
                };
                if better {
                    best = Some((d, combined, orders, a, b));
                }
            }
        }
        let Some((_, _, _, a, b)) = best else {
            break;
        };
        let merged_mask = work[a].det.mask.union(&work[b].det.mask);
        let merged = Detection::new(
            slice,
            merged_mask,
            work[a].det.score.max(work[b].det.score),
            work[a].det.label.clone(),
        )?;
        let order = work[a].order.min(work[b].order);
        work.remove(b);
        work[a] = Work { det: merged, order };
    }
    Ok(work.into_iter().map(|w| w.det).collect())
}

/// Picks the adjacent-slice detection correlated with `reference`: score at
/// least `score_threshold` and in-plane DSC at least `link_dsc_threshold`,
/// best DSC winning (ties: higher score, then earlier input order).
pub fn find_correlated<'a>(
    reference: &Detection,
    candidates: impl IntoIterator<Item = (usize, &'a Detection)>,
    cfg: &AssemblyConfig,
) -> Option<usize> {
    let mut best: Option<(f64, f64, usize)> = None;
    for (idx, cand) in candidates {
        debug_assert!(cand.slice + 1 == reference.slice || cand.slice == reference.slice + 1);
        if cand.score < cfg.score_threshold {
            continue;
        }
        let d = mask2_dsc(&reference.mask, &cand.mask).unwrap_or(0.0);
        if d < cfg.link_dsc_threshold {
            continue;
        }
        let better = match &best {
            None => true,
            Some((bd, bs, _)) => d > *bd || (d == *bd && cand.score > *bs),
        };
        if better {
            best = Some((d, cand.score, idx));
        }
    }
    best.map(|(_, _, idx)| idx)
}

/// Grows one lesion from `seed`: walks to higher slices then to lower
/// slices, each step re-anchoring on the detection just matched. Matched
/// detections (and the seed) are marked consumed in the pool.
pub fn assemble_lesion(
    pool: &mut DetectionPool,
    seed: DetectionId,
    cfg: &AssemblyConfig,
) -> Result<Lesion3D> {
    cfg.validate()?;
    let seed_det = pool
        .get(seed)
        .ok_or_else(|| Error::Contract("seed detection not found in pool".into()))?
        .clone();
    pool.mark_consumed(seed);

    let mut slices = BTreeMap::new();
    let mut scores = BTreeMap::new();
    slices.insert(seed.slice, seed_det.mask.clone());
    scores.insert(seed.slice, seed_det.score);

    for step in [1isize, -1] {
        let mut reference = seed_det.clone();
        let mut z = seed.slice as isize;
        loop {
            z += step;
            if z < 0 {
                break;
            }
            let candidates = pool.unconsumed_on_slice(z as usize);
            let found = find_correlated(
                &reference,
                candidates.iter().map(|&id| (id.index, pool.get(id).unwrap())),
                cfg,
            );
            let Some(index) = found else {
                break;
            };
            let id = DetectionId {
                slice: z as usize,
                index,
            };
            let det = pool.get(id).unwrap().clone();
            pool.mark_consumed(id);
            slices.insert(id.slice, det.mask.clone());
            scores.insert(id.slice, det.score);
            reference = det;
        }
    }

    let constituent_scores: Vec<f64> = scores.values().copied().collect();
    let score = constituent_scores.iter().copied().fold(f64::MIN, f64::max);
    Ok(Lesion3D {
        slices,
        score,
        rank: 0,
        constituent_scores,
    })
}

/// Extracts up to `max_lesions` ranked lesions, strongest seed first.
pub fn extract_top_lesions(pool: &mut DetectionPool, cfg: &AssemblyConfig) -> Result<Vec<Lesion3D>> {
    cfg.validate()?;
    let mut lesions = Vec::new();
    for rank in 1..=cfg.max_lesions {
        let Some(seed) = pool.best_unconsumed() else {
            break;
        };
        let mut lesion = assemble_lesion(pool, seed, cfg)?;
        lesion.rank = rank;
        lesions.push(lesion);
    }
    Ok(lesions)
}

/// Per slice, keeps only the highest-score prostate detection.
pub fn select_prostate_slices(
    per_slice_dets: &[Vec<Detection>],
) -> Vec<ProstateSliceDecision> {
    per_slice_dets
        .iter()
        .enumerate()
        .map(|(z, dets)| {
            let chosen = dets
                .iter()
                .enumerate()
                .max_by(|(ia, a), (ib, b)| {
                    a.score
                        .partial_cmp(&b.score)
                        .unwrap()
                        .then(ib.cmp(ia)) // earlier input wins ties
                })
                .map(|(_, d)| d.clone());
            ProstateSliceDecision {
                slice: z,
                present: chosen.is_some(),
                chosen,
            }
        })
        .collect()
}

/// Mean enclosing-square side (px) and mean box center over every
/// prostate-containing slice of the given masks.
pub fn estimate_mean_prostate_box(masks: &[Mask]) -> Result<(f64, (f64, f64))> {
    let mut sides = 0.0;
    let mut cx = 0.0;
    let mut cy = 0.0;
    let mut n = 0usize;
    for m in masks {
        for z in 0..m.dims.2 {
            let slice = m.extract_slice(z)?;
            if let Some(bbox) = slice.tight_bbox() {
                sides += bbox.width().max(bbox.height()) as f64;
                let (x, y) = bbox.center();
                cx += x;
                cy += y;
                n += 1;
            }
        }
    }
    if n == 0 {
        return Err(Error::UndefinedMetric(
            "no prostate-containing slice in any mask".into(),
        ));
    }
    let nf = n as f64;
    Ok((sides / nf, (cx / nf, cy / nf)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det(slice: usize, pixels: &[(usize, usize)], score: f64) -> Detection {
        let mut m = Mask2::zeros(16, 16);
        for &(x, y) in pixels {
            m.set(x, y, 1);
        }
        Detection::new(slice, m, score, "lesion").unwrap()
    }

    fn blob(x0: usize, y0: usize, w: usize, h: usize) -> Vec<(usize, usize)> {
        let mut v = Vec::new();
        for y in y0..y0 + h {
            for x in x0..x0 + w {
                v.push((x, y));
            }
        }
        v
    }

    #[test]
    fn nms_merges_identical_contours() {
        let cfg = AssemblyConfig::default();
        let a = det(3, &blob(2, 2, 4, 4), 0.6);
        let b = det(3, &blob(2, 2, 4, 4), 0.9);
        let out = dsc_nms_slice(&[a.clone(), b], &cfg).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].mask, a.mask);
        assert_eq!(out[0].score, 0.9);
    }

    #[test]
    fn nms_keeps_disjoint_contours() {
        let cfg = AssemblyConfig::default();
        let a = det(0, &blob(0, 0, 3, 3), 0.5);
        let b = det(0, &blob(10, 10, 3, 3), 0.7);
        let out = dsc_nms_slice(&[a.clone(), b.clone()], &cfg).unwrap();
        assert_eq!(out, vec![a, b]);
    }

    #[test]
    fn nms_chain_merge_matches_fixed_point() {
        // A and B overlap heavily; their union then overlaps C above 0.5
        let cfg = AssemblyConfig::default();
        let a = det(0, &blob(0, 0, 6, 4), 0.8);
        let b = det(0, &blob(1, 0, 6, 4), 0.7);
        let c = det(0, &blob(3, 0, 6, 4), 0.6);
        let out = dsc_nms_slice(&[a.clone(), b.clone(), c.clone()], &cfg).unwrap();
        assert_eq!(out.len(), 1);
        let expect = a.mask.union(&b.mask).union(&c.mask);
        assert_eq!(out[0].mask, expect);
        assert_eq!(out[0].score, 0.8);
        // output pairs all at or below the threshold
        for i in 0..out.len() {
            for j in i + 1..out.len() {
                assert!(mask2_dsc(&out[i].mask, &out[j].mask).unwrap() <= cfg.nms_dsc_threshold);
            }
        }
    }

    #[test]
    fn nms_rejects_mixed_slices() {
        let cfg = AssemblyConfig::default();
        let a = det(0, &blob(0, 0, 3, 3), 0.5);
        let b = det(1, &blob(0, 0, 3, 3), 0.5);
        assert!(dsc_nms_slice(&[a, b], &cfg).is_err());
    }

    #[test]
    fn find_correlated_selects_qualifier() {
        let cfg = AssemblyConfig::default();
        let reference = det(5, &blob(2, 2, 5, 5), 0.95);
        let good = det(6, &blob(2, 2, 5, 4), 0.9); // high DSC, high score
        let idx = find_correlated(&reference, [(0usize, &good)], &cfg);
        assert_eq!(idx, Some(0));
    }

    #[test]
    fn find_correlated_rejects_low_score() {
        let cfg = AssemblyConfig::default();
        let reference = det(5, &blob(2, 2, 5, 5), 0.95);
        let cand = det(6, &blob(2, 2, 5, 5), 0.6); // DSC 1.0 but score < 0.7
        assert_eq!(find_correlated(&reference, [(0usize, &cand)], &cfg), None);
    }

    #[test]
    fn find_correlated_prefers_higher_dsc() {
        let cfg = AssemblyConfig::default();
        let reference = det(5, &blob(2, 2, 6, 6), 0.95);
        let lower = det(6, &blob(2, 2, 6, 3), 0.99); // DSC ~ 0.67
        let higher = det(6, &blob(2, 2, 6, 5), 0.8); // DSC ~ 0.9
        let idx = find_correlated(&reference, [(0usize, &lower), (1usize, &higher)], &cfg);
        assert_eq!(idx, Some(1));
    }

    #[test]
    fn assemble_three_slice_lesion() {
        let cfg = AssemblyConfig::default();
        let dets = vec![
            det(4, &blob(2, 2, 5, 5), 0.8),
            det(5, &blob(2, 2, 5, 5), 0.95),
            det(6, &blob(2, 2, 5, 5), 0.75),
            det(9, &blob(2, 2, 5, 5), 0.9), // not adjacent, different lesion
        ];
        let mut pool = DetectionPool::from_detections(dets);
        let seed = pool.best_unconsumed().unwrap();
        assert_eq!(seed.slice, 5);
        let lesion = assemble_lesion(&mut pool, seed, &cfg).unwrap();
        assert_eq!(lesion.slice_range(), (4, 6));
        assert_eq!(lesion.score, 0.95);
        assert_eq!(lesion.constituent_scores, vec![0.8, 0.95, 0.75]);
    }

    #[test]
    fn assemble_isolated_seed_is_single_slice() {
        let cfg = AssemblyConfig::default();
        let mut pool = DetectionPool::from_detections(vec![det(3, &blob(1, 1, 4, 4), 0.9)]);
        let seed = pool.best_unconsumed().unwrap();
        let lesion = assemble_lesion(&mut pool, seed, &cfg).unwrap();
        assert_eq!(lesion.slice_range(), (3, 3));
    }

    #[test]
    fn chain_stops_at_weak_link() {
        // slices 0..7; slice 5 -> 6 link has DSC 0.40 (< 0.41), chain must stop
        let cfg = AssemblyConfig::default();
        let body = blob(2, 2, 5, 4); // 20 px
        // 5 px fully inside the body: DSC = 2*5 / (20+5) = 0.40, just under 0.41
        let weak_mask = blob(2, 2, 5, 1);
        let dets = vec![
            det(3, &body, 0.8),
            det(4, &body, 0.9),
            det(5, &body, 0.85),
            det(6, &weak_mask, 0.95),
        ];
        let d56 = mask2_dsc(&dets[2].mask, &dets[3].mask).unwrap();
        assert!((d56 - 0.4).abs() < 1e-12, "link DSC is {d56}");
        let mut pool = DetectionPool::from_detections(dets);
        let mut lesions = extract_top_lesions(&mut pool, &cfg).unwrap();
        lesions.sort_by_key(|l| l.rank);
        // seed is the 0.95 on slice 6, which cannot link down; next is 0.9 chain
        assert_eq!(lesions[0].slice_range(), (6, 6));
        assert_eq!(lesions[1].slice_range(), (3, 5));
    }

    #[test]
    fn extract_ranks_by_peak_score() {
        let cfg = AssemblyConfig::default();
        let dets = vec![
            det(2, &blob(1, 1, 4, 4), 0.85),
            det(3, &blob(1, 1, 4, 4), 0.85),
            det(8, &blob(10, 10, 4, 4), 0.95),
            det(9, &blob(10, 10, 4, 4), 0.95),
        ];
        let mut pool = DetectionPool::from_detections(dets);
        let lesions = extract_top_lesions(&mut pool, &cfg).unwrap();
        assert_eq!(lesions.len(), 2);
        assert_eq!(lesions[0].rank, 1);
        assert_eq!(lesions[0].slice_range(), (8, 9));
        assert_eq!(lesions[1].rank, 2);
        assert_eq!(lesions[1].slice_range(), (2, 3));
    }

    #[test]
    fn extract_empty_pool_is_empty_list() {
        let cfg = AssemblyConfig::default();
        let mut pool = DetectionPool::from_detections(Vec::new());
        assert!(extract_top_lesions(&mut pool, &cfg).unwrap().is_empty());
    }

    #[test]
    fn prostate_selection_takes_argmax() {
        let slices = vec![
            vec![],
            vec![det(1, &blob(0, 0, 3, 3), 0.4), det(1, &blob(5, 5, 3, 3), 0.8)],
        ];
        let decisions = select_prostate_slices(&slices);
        assert!(!decisions[0].present);
        assert!(decisions[1].present);
        assert_eq!(decisions[1].chosen.as_ref().unwrap().score, 0.8);
    }

    #[test]
    fn mean_prostate_box_averages_sides_and_centers() {
        // two slices: square boxes of side 100 and 200, same center
        let mut m = Mask::zeros((256, 256, 2), (1.0, 1.0, 1.0));
        for y in 78..178 {
            for x in 78..178 {
                m.set(x, y, 0, 1);
            }
        }
        for y in 28..228 {
            for x in 28..228 {
                m.set(x, y, 1, 1);
            }
        }
        let (side, center) = estimate_mean_prostate_box(&[m]).unwrap();
        assert_eq!(side, 150.0);
        assert_eq!(center, (128.0, 128.0));
    }

    #[test]
    fn mean_prostate_box_single_rect() {
        let mut m = Mask::zeros((100, 100, 1), (1.0, 1.0, 1.0));
        for y in 10..70 {
            for x in 20..60 {
                m.set(x, y, 0, 1);
            }
        }
        let (side, _) = estimate_mean_prostate_box(&[m]).unwrap();
        assert_eq!(side, 60.0); // max(40, 60)
    }
}
