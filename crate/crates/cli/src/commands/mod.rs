pub mod assemble;
pub mod augment;
pub mod metrics;
pub mod overlay_cmd;
pub mod phantom;
pub mod preprocess;
pub mod prostate_select;

use anyhow::Context;
use serde::Serialize;
use std::path::Path;

pub fn write_json(path: &Path, value: &impl Serialize) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}
