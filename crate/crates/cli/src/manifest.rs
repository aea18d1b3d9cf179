//! Cohort manifest: a JSON array of per-case file references, with relative
//! paths resolved against the manifest's directory.

use anyhow::{bail, Context};
use serde::Deserialize;
use std::collections::HashSet;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Deserialize)]
pub struct CaseManifest {
    pub case_id: String,
    #[serde(default)]
    pub t2: Option<PathBuf>,
    #[serde(default)]
    pub adc: Option<PathBuf>,
    /// Ground-truth prostate mask
    #[serde(default)]
    pub prostate: Option<PathBuf>,
    /// Predicted prostate mask
    #[serde(default)]
    pub prostate_pred: Option<PathBuf>,
    /// Ground-truth lesion masks, one file per lesion
    #[serde(default)]
    pub lesions: Vec<PathBuf>,
    /// Predicted lesion masks, one file per lesion
    #[serde(default)]
    pub lesions_pred: Vec<PathBuf>,
    #[serde(default)]
    pub detections: Option<PathBuf>,
    /// Optional (x, y, z) spacing override in mm
    #[serde(default)]
    pub spacing: Option<[f64; 3]>,
}

impl CaseManifest {
    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&p);
            }
        };
        for p in [
            &mut self.t2,
            &mut self.adc,
            &mut self.prostate,
            &mut self.prostate_pred,
            &mut self.detections,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
        for p in self.lesions.iter_mut().chain(self.lesions_pred.iter_mut()) {
            fix(p);
        }
    }
}

pub fn load_cohort(path: &Path) -> anyhow::Result<Vec<CaseManifest>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading manifest {}", path.display()))?;
    let mut cases: Vec<CaseManifest> =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let mut seen = HashSet::new();
    for case in &mut cases {
        if !seen.insert(case.case_id.clone()) {
            bail!("duplicate case_id {:?} in {}", case.case_id, path.display());
        }
        case.resolve(&base);
    }
    // deterministic processing and summary order
    cases.sort_by(|a, b| a.case_id.cmp(&b.case_id));
    Ok(cases)
}
