//! Detection JSON-lines serialization: one detection per line, mask
//! stored run-length encoded.
//!
//! Line schema:
//! `{"slice": int, "score": float, "label": str, "bbox": [x0,y0,x1,y1], "mask": {"width", "height", "runs"}}`

use crate::error::{Error, Result};
use crate::rle::{rle_decode, rle_encode, RleMask};
use crate::volume::Detection;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};
use std::path::Path;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct DetectionLine {
    slice: usize,
    score: f64,
    label: String,
    bbox: [usize; 4],
    mask: RleMask,
}

pub fn write_detections(dets: &[Detection], mut w: impl Write) -> Result<()> {
    for d in dets {
        let line = DetectionLine {
            slice: d.slice,
            score: d.score,
            label: d.label.clone(),
            bbox: [d.bbox.x0, d.bbox.y0, d.bbox.x1, d.bbox.y1],
            mask: rle_encode(&d.mask),
        };
        let json = serde_json::to_string(&line)
            .map_err(|e| Error::Integrity(format!("serializing detection: {e}")))?;
        writeln!(w, "{json}").map_err(|e| Error::io("<writer>", e))?;
    }
    Ok(())
}

pub fn save_detections(dets: &[Detection], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_detections(dets, std::io::BufWriter::new(f))
}

pub fn read_detections(r: impl BufRead) -> Result<Vec<Detection>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::DetectionLine {
            line: lineno,
            message: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: DetectionLine =
            serde_json::from_str(&line).map_err(|e| Error::DetectionLine {
                line: lineno,
                message: e.to_string(),
            })?;
        let mask = rle_decode(&parsed.mask).map_err(|e| Error::DetectionLine {
            line: lineno,
            message: e.to_string(),
        })?;
        // bbox is recomputed from the mask, never trusted from the file
        let det = Detection::new(parsed.slice, mask, parsed.score, parsed.label).map_err(|e| {
            Error::DetectionLine {
                line: lineno,
                message: e.to_string(),
            }
        })?;
        out.push(det);
    }
    Ok(out)
}

pub fn load_detections(path: impl AsRef<Path>) -> Result<Vec<Detection>> {
    let path = path.as_ref();
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_detections(std::io::BufReader::new(f))
}
