//! MetaImage (.mha / .mhd + .raw) reader and writer.
//!
//! Plain-text header, one `Key = Value` per line, little-endian raw
//! payload. `.mha` keeps the payload in the same file
//! (`ElementDataFile = LOCAL`); `.mhd` points at a sibling raw file.
//! Only uncompressed 3D scalar images are supported.

use crate::error::{Error, Result};
use crate::volume::{Mask, Volume};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementType {
    Uchar,
    Ushort,
    Float,
    Double,
}

impl ElementType {
    pub fn met_name(self) -> &'static str {
        match self {
            ElementType::Uchar => "MET_UCHAR",
            ElementType::Ushort => "MET_USHORT",
            ElementType::Float => "MET_FLOAT",
            ElementType::Double => "MET_DOUBLE",
        }
    }

    pub fn byte_size(self) -> usize {
        match self {
            ElementType::Uchar => 1,
            ElementType::Ushort => 2,
            ElementType::Float => 4,
            ElementType::Double => 8,
        }
    }

    fn from_met_name(name: &str) -> Result<Self> {
        match name {
            "MET_UCHAR" => Ok(ElementType::Uchar),
            "MET_USHORT" => Ok(ElementType::Ushort),
            "MET_FLOAT" => Ok(ElementType::Float),
            "MET_DOUBLE" => Ok(ElementType::Double),
            other => Err(Error::Parse(format!(
                "ElementType: unsupported value {other:?}"
            ))),
        }
    }
}

struct Header {
    dims: (usize, usize, usize),
    spacing: (f64, f64, f64),
    origin: (f64, f64, f64),
    etype: ElementType,
    data_file: String,
    header_len: usize,
}

fn parse_triplet<T: std::str::FromStr>(key: &str, value: &str) -> Result<(T, T, T)> {
    let mut parts = value.split_whitespace();
    let mut next = || -> Result<T> {
        parts
            .next()
            .ok_or_else(|| Error::Parse(format!("{key}: expected 3 values, got {value:?}")))?
            .parse::<T>()
            .map_err(|_| Error::Parse(format!("{key}: cannot parse {value:?}")))
    };
    let t = (next()?, next()?, next()?);
    if parts.next().is_some() {
        return Err(Error::Parse(format!("{key}: expected 3 values, got {value:?}")));
    }
    Ok(t)
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    let mut dims = None;
    let mut spacing = (1.0, 1.0, 1.0);
    let mut origin = (0.0, 0.0, 0.0);
    let mut etype = None;
    let mut ndims_seen = false;

    let mut pos = 0usize;
    while pos < bytes.len() {
        let line_end = bytes[pos..]
            .iter()
            .position(|&b| b == b'\n')
            .map(|p| pos + p)
            .unwrap_or(bytes.len());
        let line = std::str::from_utf8(&bytes[pos..line_end])
            .map_err(|_| Error::Parse("header is not valid UTF-8".into()))?
            .trim_end_matches('\r');
        let next_pos = line_end + 1;

        if line.trim().is_empty() {
            pos = next_pos;
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse(format!("missing '=' in line {line:?}")))?;
        let key = key.trim();
        let value = value.trim();
        match key {
            "NDims" => {
                let n: usize = value
                    .parse()
                    .map_err(|_| Error::Parse(format!("NDims: cannot parse {value:?}")))?;
                if n != 3 {
                    return Err(Error::UnsupportedRank(n));
                }
                ndims_seen = true;
            }
            "DimSize" => {
                let (a, b, c): (usize, usize, usize) = parse_triplet(key, value)?;
                dims = Some((a, b, c));
            }
            "ElementSpacing" => spacing = parse_triplet(key, value)?,
            "Offset" | "Position" => origin = parse_triplet(key, value)?,
            "ElementType" => etype = Some(ElementType::from_met_name(value)?),
            "ElementDataFile" => {
                // data file is the last header key; payload follows for LOCAL
                return finish_header(
                    dims,
                    spacing,
                    origin,
                    etype,
                    Some(value.to_string()),
                    ndims_seen,
                    next_pos,
                );
            }
            "CompressedData" => {
                if value.eq_ignore_ascii_case("true") {
                    return Err(Error::Parse("CompressedData: compression not supported".into()));
                }
            }
            "BinaryDataByteOrderMSB" | "ElementByteOrderMSB" => {
                if value.eq_ignore_ascii_case("true") {
                    return Err(Error::Parse(format!("{key}: big-endian data not supported")));
                }
            }
            "TransformMatrix" => {
                let nums: Vec<f64> = value
                    .split_whitespace()
                    .map(|s| {
                        s.parse()
                            .map_err(|_| Error::Parse(format!("TransformMatrix: cannot parse {value:?}")))
                    })
                    .collect::<Result<_>>()?;
                let identity = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
                if nums.as_slice() != identity {
                    return Err(Error::Parse(
                        "TransformMatrix: only identity orientation supported".into(),
                    ));
                }
            }
            // ObjectType, BinaryData, CenterOfRotation, AnatomicalOrientation, ...
            _ => {}
        }
        pos = next_pos;
    }
    Err(Error::Parse("ElementDataFile: key missing".into()))
}

#[allow(clippy::too_many_arguments)]
fn finish_header(
    dims: Option<(usize, usize, usize)>,
    spacing: (f64, f64, f64),
    origin: (f64, f64, f64),
    etype: Option<ElementType>,
    data_file: Option<String>,
    ndims_seen: bool,
    header_len: usize,
) -> Result<Header> {
    if !ndims_seen {
        return Err(Error::Parse("NDims: key missing".into()));
    }
    Ok(Header {
        dims: dims.ok_or_else(|| Error::Parse("DimSize: key missing".into()))?,
        spacing,
        origin,
        etype: etype.ok_or_else(|| Error::Parse("ElementType: key missing".into()))?,
        data_file: data_file.ok_or_else(|| Error::Parse("ElementDataFile: key missing".into()))?,
        header_len,
    })
}

fn decode_payload(raw: &[u8], etype: ElementType, n: usize) -> Result<Vec<f64>> {
    let expected = n * etype.byte_size();
    if raw.len() != expected {
        return Err(Error::Integrity(format!(
            "payload is {} bytes, header implies {} ({} voxels of {})",
            raw.len(),
            expected,
            n,
            etype.met_name()
        )));
    }
    let data = match etype {
        ElementType::Uchar => raw.iter().map(|&b| b as f64).collect(),
        ElementType::Ushort => raw
            .chunks_exact(2)
            .map(|c| u16::from_le_bytes([c[0], c[1]]) as f64)
            .collect(),
        ElementType::Float => raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect(),
        ElementType::Double => raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect(),
    };
    Ok(data)
}

fn encode_payload(data: &[f64], etype: ElementType) -> Vec<u8> {
    let mut out = Vec::with_capacity(data.len() * etype.byte_size());
    match etype {
        ElementType::Uchar => {
            for &v in data {
                out.push(v.round() as u8);
            }
        }
        ElementType::Ushort => {
            for &v in data {
                out.extend_from_slice(&(v.round() as u16).to_le_bytes());
            }
        }
        ElementType::Float => {
            for &v in data {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        ElementType::Double => {
            for &v in data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    out
}

pub fn load_volume(path: impl AsRef<Path>) -> Result<Volume> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let header = parse_header(&bytes)?;
    let n = header.dims.0 * header.dims.1 * header.dims.2;
    let raw: Vec<u8> = if header.data_file == "LOCAL" {
        bytes[header.header_len..].to_vec()
    } else {
        let raw_path = resolve_sibling(path, &header.data_file);
        fs::read(&raw_path).map_err(|e| Error::io(raw_path, e))?
    };
    let data = decode_payload(&raw, header.etype, n)?;
    Volume::new(header.dims, header.spacing, header.origin, data)
}

pub fn load_mask(path: impl AsRef<Path>) -> Result<Mask> {
    Mask::from_volume(&load_volume(path)?)
}

fn resolve_sibling(header_path: &Path, data_file: &str) -> PathBuf {
    let df = Path::new(data_file);
    if df.is_absolute() {
        df.to_path_buf()
    } else {
        header_path
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .join(df)
    }
}

fn format_f64(v: f64) -> String {
    // shortest representation that round-trips through f64
    let s = format!("{v}");
    s
}

/// Writes `.mha` (payload inline) or `.mhd` (sibling `.raw`), chosen by
/// the path extension.
pub fn save_volume(v: &Volume, path: impl AsRef<Path>, etype: ElementType) -> Result<()> {
    let path = path.as_ref();
    let local = !matches!(path.extension().and_then(|e| e.to_str()), Some("mhd"));
    let data_file = if local {
        "LOCAL".to_string()
    } else {
        let stem = path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| Error::Contract(format!("bad output path {path:?}")))?;
        format!("{stem}.raw")
    };

    let mut header = String::new();
    header.push_str("ObjectType = Image\n");
    header.push_str("NDims = 3\n");
    header.push_str("BinaryData = True\n");
    header.push_str("BinaryDataByteOrderMSB = False\n");
    header.push_str("CompressedData = False\n");
    header.push_str(&format!(
        "DimSize = {} {} {}\n",
        v.dims.0, v.dims.1, v.dims.2
    ));
    header.push_str(&format!(
        "ElementSpacing = {} {} {}\n",
        format_f64(v.spacing.0),
        format_f64(v.spacing.1),
        format_f64(v.spacing.2)
    ));
    header.push_str(&format!(
        "Offset = {} {} {}\n",
        format_f64(v.origin.0),
        format_f64(v.origin.1),
        format_f64(v.origin.2)
    ));
    header.push_str(&format!("ElementType = {}\n", etype.met_name()));
    header.push_str(&format!("ElementDataFile = {data_file}\n"));

    let payload = encode_payload(&v.data, etype);
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(header.as_bytes())
        .map_err(|e| Error::io(path, e))?;
    if local {
        f.write_all(&payload).map_err(|e| Error::io(path, e))?;
    } else {
        let raw_path = resolve_sibling(path, &data_file);
        fs::write(&raw_path, &payload).map_err(|e| Error::io(raw_path, e))?;
    }
    Ok(())
}

pub fn save_mask(m: &Mask, path: impl AsRef<Path>) -> Result<()> {
    save_volume(&m.to_volume(), path, ElementType::Uchar)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(name: &str) -> (tempfile::TempDir, PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(name);
        (dir, path)
    }

    #[test]
    fn zero_volume_roundtrip() {
        let v = Volume::zeros((4, 4, 2), (1.0, 1.0, 1.0));
        let (_dir, path) = tmp("z.mha");
        save_volume(&v, &path, ElementType::Double).unwrap();
        assert_eq!(load_volume(&path).unwrap(), v);
    }

    #[test]
    fn single_voxel_value_seven() {
        let v = Volume::new((1, 1, 1), (1.0, 1.0, 1.0), (0.0, 0.0, 0.0), vec![7.0]).unwrap();
        let (_dir, path) = tmp("s.mha");
        save_volume(&v, &path, ElementType::Uchar).unwrap();
        assert_eq!(load_volume(&path).unwrap().data, vec![7.0]);
    }

    #[test]
    fn mask_as_uchar_preserves_binary() {
        let mut m = Mask::zeros((3, 3, 2), (0.5, 0.5, 3.6));
        m.set(1, 1, 0, 1);
        m.set(2, 2, 1, 1);
        let (_dir, path) = tmp("m.mha");
        save_mask(&m, &path).unwrap();
        assert_eq!(load_mask(&path).unwrap(), m);
    }

    #[test]
    fn mhd_sibling_raw_roundtrip() {
        let data: Vec<f64> = (0..8).map(|x| x as f64 * 0.25).collect();
        let v = Volume::new((2, 2, 2), (2.0, 2.0, 3.6), (-1.0, 5.0, 0.0), data).unwrap();
        let (_dir, path) = tmp("v.mhd");
        save_volume(&v, &path, ElementType::Double).unwrap();
        assert!(path.with_extension("raw").exists());
        assert_eq!(load_volume(&path).unwrap(), v);
    }

    #[test]
    fn payload_size_mismatch_is_integrity_error() {
        let (_dir, path) = tmp("bad.mha");
        let mut content = String::new();
        content.push_str("NDims = 3\nDimSize = 4 4 2\nElementType = MET_UCHAR\n");
        content.push_str("ElementDataFile = LOCAL\n");
        let mut bytes = content.into_bytes();
        bytes.extend(vec![0u8; 31]); // header implies 32
        fs::write(&path, bytes).unwrap();
        assert!(matches!(load_volume(&path), Err(Error::Integrity(_))));
    }

    #[test]
    fn parse_error_names_offending_key() {
        let (_dir, path) = tmp("bad2.mha");
        fs::write(
            &path,
            "NDims = 3\nDimSize = 4 nope 2\nElementType = MET_UCHAR\nElementDataFile = LOCAL\n",
        )
        .unwrap();
        match load_volume(&path) {
            Err(Error::Parse(msg)) => assert!(msg.contains("DimSize"), "{msg}"),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn ndims_2_is_unsupported_rank() {
        let (_dir, path) = tmp("bad3.mha");
        fs::write(
            &path,
            "NDims = 2\nDimSize = 4 4\nElementType = MET_UCHAR\nElementDataFile = LOCAL\n",
        )
        .unwrap();
        assert!(matches!(load_volume(&path), Err(Error::UnsupportedRank(2))));
    }

    #[test]
    fn float_roundtrip_is_bit_exact() {
        let data: Vec<f64> = (0..12)
            .map(|x| (x as f32 * 0.1f32).sin() as f64)
            .collect();
        // values already representable as f32
        let data: Vec<f64> = data.iter().map(|&d| d as f32 as f64).collect();
        let v = Volume::new((3, 2, 2), (1.0, 1.0, 1.0), (0.0, 0.0, 0.0), data).unwrap();
        let (_dir, path) = tmp("f.mha");
        save_volume(&v, &path, ElementType::Float).unwrap();
        let back = load_volume(&path).unwrap();
        for (a, b) in v.data.iter().zip(&back.data) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
