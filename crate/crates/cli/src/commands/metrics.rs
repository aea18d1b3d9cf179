//! Cohort evaluation: one JSON report per case plus an aggregate summary.

use crate::manifest::{load_cohort, CaseManifest};
use crate::summary::{mean_sd, MetricSummary};
use crate::{Cli, MetricsMode};
use anyhow::{bail, Context};
use proseg_core::metrics::{
    agreement_rate, dsc, hd95, pixel_sens_spec, slice_sens_spec, MetricsReport,
};
use proseg_core::volume::check_grid_compatible;
use proseg_core::{load_mask, Mask};
use rayon::prelude::*;
use serde::Serialize;
use std::path::Path;

#[derive(Serialize)]
struct CohortSummary {
    mode: &'static str,
    hd95_symmetric: bool,
    sd_convention: &'static str,
    cases: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    dsc: Option<MetricSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    hd95_mm: Option<MetricSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sensitivity: Option<MetricSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    specificity: Option<MetricSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    agreement: Option<MetricSummary>,
    failures: Vec<CaseFailure>,
}

#[derive(Serialize)]
struct CaseFailure {
    case_id: String,
    error: String,
}

fn load_case_mask(path: &Path, spacing: Option<[f64; 3]>) -> anyhow::Result<Mask> {
    let mut m = load_mask(path).with_context(|| format!("loading {}", path.display()))?;
    if let Some([sx, sy, sz]) = spacing {
        m.spacing = (sx, sy, sz);
    }
    Ok(m)
}

fn union_masks(paths: &[std::path::PathBuf], spacing: Option<[f64; 3]>) -> anyhow::Result<Vec<Mask>> {
    paths.iter().map(|p| load_case_mask(p, spacing)).collect()
}

fn merge(masks: &[Mask]) -> anyhow::Result<Mask> {
    let Some(first) = masks.first() else {
        bail!("no masks to merge");
    };
    let mut out = first.clone();
    for m in &masks[1..] {
        check_grid_compatible(&out, m)?;
        for (o, &v) in out.data.iter_mut().zip(&m.data) {
            *o |= v;
        }
    }
    Ok(out)
}

fn evaluate_case(
    case: &CaseManifest,
    mode: MetricsMode,
    symmetric: bool,
) -> anyhow::Result<MetricsReport> {
    match mode {
        MetricsMode::ProstateSlice => {
            let truth_path = case
                .prostate
                .as_ref()
                .with_context(|| format!("case {}: missing prostate mask", case.case_id))?;
            let pred_path = case
                .prostate_pred
                .as_ref()
                .with_context(|| format!("case {}: missing prostate_pred mask", case.case_id))?;
            let truth = load_case_mask(truth_path, case.spacing)?;
            let pred = load_case_mask(pred_path, case.spacing)?;
            let detected: Vec<bool> = (0..pred.dims.2)
                .map(|z| !pred.extract_slice(z).unwrap().is_empty_mask())
                .collect();
            let (sens, spec, counts) = slice_sens_spec(&truth, &detected)?;
            Ok(MetricsReport {
                dsc: dsc(&truth, &pred)?,
                hd95_mm: Some(hd95(&truth, &pred, symmetric)?),
                hd95_symmetric: symmetric,
                sensitivity: sens,
                specificity: spec,
                agreement: None,
                counts,
                mode: MetricsMode::ProstateSlice.into(),
            })
        }
        MetricsMode::LesionPixel => {
            let prostate_path = case
                .prostate
                .as_ref()
                .with_context(|| format!("case {}: missing prostate mask", case.case_id))?;
            let prostate = load_case_mask(prostate_path, case.spacing)?;
            let gt = union_masks(&case.lesions, case.spacing)?;
            let pred = union_masks(&case.lesions_pred, case.spacing)?;
            if gt.is_empty() {
                bail!("case {}: no ground-truth lesions", case.case_id);
            }
            let truth_union = merge(&gt)?;
            let pred_union = if pred.is_empty() {
                Mask::zeros(truth_union.dims, truth_union.spacing)
            } else {
                merge(&pred)?
            };
            let (sens, spec, counts) = pixel_sens_spec(&truth_union, &pred_union, &prostate)?;
            let (agreement, _) = agreement_rate(&gt, &pred)?;
            let hd = if pred_union.is_empty_mask() {
                None
            } else {
                Some(hd95(&truth_union, &pred_union, symmetric)?)
            };
            Ok(MetricsReport {
                dsc: dsc(&truth_union, &pred_union)?,
                hd95_mm: hd,
                hd95_symmetric: symmetric,
                sensitivity: sens,
                specificity: spec,
                agreement: Some(agreement),
                counts,
                mode: MetricsMode::LesionPixel.into(),
            })
        }
    }
}

pub fn run(cli: &Cli, manifest: &Path, mode: MetricsMode, directed: bool) -> anyhow::Result<()> {
    let cases = load_cohort(manifest)?;
    let symmetric = !directed;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.jobs.unwrap_or(0))
        .build()?;
    // per-case failures are collected, not propagated: one bad case must not
    // abort the cohort
    let results: Vec<(String, Result<MetricsReport, String>)> = pool.install(|| {
        cases
            .par_iter()
            .map(|case| {
                let r = evaluate_case(case, mode, symmetric).map_err(|e| format!("{e:#}"));
                (case.case_id.clone(), r)
            })
            .collect()
    });

    let mut reports = Vec::new();
    let mut failures = Vec::new();
    for (case_id, result) in results {
        match result {
            Ok(report) => {
                let path = cli.out_dir.join(format!("{case_id}.metrics.json"));
                super::write_json(&path, &report)?;
                reports.push(report);
            }
            Err(error) => {
                eprintln!("case {case_id}: {error}");
                failures.push(CaseFailure { case_id, error });
            }
        }
    }

    let collect = |f: &dyn Fn(&MetricsReport) -> Option<f64>| -> Vec<f64> {
        reports.iter().filter_map(f).collect()
    };
    let summary = CohortSummary {
        mode: match mode {
            MetricsMode::ProstateSlice => "prostate-slice",
            MetricsMode::LesionPixel => "lesion-pixel",
        },
        hd95_symmetric: symmetric,
        sd_convention: "population",
        cases: reports.len(),
        dsc: mean_sd(&collect(&|r| Some(r.dsc))),
        hd95_mm: mean_sd(&collect(&|r| r.hd95_mm)),
        sensitivity: mean_sd(&collect(&|r| r.sensitivity)),
        specificity: mean_sd(&collect(&|r| r.specificity)),
        agreement: mean_sd(&collect(&|r| r.agreement)),
        failures,
    };
    let n_failures = summary.failures.len();
    super::write_json(&cli.out_dir.join("summary.json"), &summary)?;
    if n_failures > 0 {
        bail!("{n_failures} case(s) failed; see summary.json");
    }
    Ok(())
}
