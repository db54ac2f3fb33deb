//! Feature-batch persistence.
//!
//! * CSV: one sample per row, `.` as decimal separator, no header unless
//!   requested.
//! * FBV: the bytes `FBV1`, then `n` and `d` as little-endian `u32`, then
//!   `n·d` little-endian `f64` values in row-major order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::FeatureBatch;

pub const FBV_MAGIC: &[u8; 4] = b"FBV1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum FeatureFormat {
    Csv,
    Fbv,
}

impl FeatureFormat {
    /// `.fbv` files are binary, everything else is read as CSV.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("fbv") => FeatureFormat::Fbv,
            _ => FeatureFormat::Csv,
        }
    }
}

fn parse_err(path: &Path, location: String, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        location,
        message: message.into(),
    }
}

pub fn encode_fbv(b: &FeatureBatch) -> Result<Vec<u8>> {
    let n = u32::try_from(b.n()).map_err(|_| Error::Shape("too many rows for FBV".into()))?;
    let d = u32::try_from(b.d()).map_err(|_| Error::Shape("too many columns for FBV".into()))?;
    let mut out = Vec::with_capacity(12 + 8 * b.as_slice().len());
    out.extend_from_slice(FBV_MAGIC);
    out.extend_from_slice(&n.to_le_bytes());
    out.extend_from_slice(&d.to_le_bytes());
    for v in b.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_fbv(bytes: &[u8], path: &Path) -> Result<FeatureBatch> {
    if bytes.is_empty() {
        return Err(parse_err(path, "byte 0".into(), "empty file"));
    }
    if bytes.len() < 12 {
        return Err(parse_err(path, format!("byte {}", bytes.len()), "truncated header"));
    }
    if &bytes[..4] != FBV_MAGIC {
        return Err(parse_err(path, "byte 0".into(), "bad magic, expected FBV1"));
    }
    let n = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let d = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let expected = n
        .checked_mul(d)
        .and_then(|c| c.checked_mul(8))
        .and_then(|c| c.checked_add(12))
        .ok_or_else(|| parse_err(path, "byte 4".into(), "dimensions overflow"))?;
    if bytes.len() != expected {
        return Err(parse_err(
            path,
            format!("byte {}", bytes.len().min(expected)),
            format!("expected {expected} bytes for {n}x{d}, found {}", bytes.len()),
        ));
    }
    let data = bytes[12..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    FeatureBatch::new(n, d, data).map_err(|e| parse_err(path, "payload".into(), e.to_string()))
}

pub fn encode_csv(b: &FeatureBatch) -> String {
    let mut s = String::new();
    for i in 0..b.n() {
        let row: Vec<String> = b.row(i).iter().map(|v| format!("{v:?}")).collect();
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

pub fn decode_csv(text: &str, header: bool, path: &Path) -> Result<FeatureBatch> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (lineno, line) in text.lines().enumerate() {
        if header && lineno == 0 {
            continue;
        }
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut row = Vec::new();
        for (col, cell) in line.split(',').enumerate() {
            let cell = cell.trim();
            let v: f64 = cell.parse().map_err(|_| {
                parse_err(
                    path,
                    format!("line {}, column {}", lineno + 1, col + 1),
                    format!("not a number: {cell:?}"),
                )
            })?;
            if !v.is_finite() {
                return Err(parse_err(
                    path,
                    format!("line {}, column {}", lineno + 1, col + 1),
                    "non-finite value",
                ));
            }
            row.push(v);
        }
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(parse_err(
                    path,
                    format!("line {}", lineno + 1),
                    format!("expected {w} columns, found {}", row.len()),
                ))
            }
            _ => {}
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(parse_err(path, "line 1".into(), "no data rows"));
    }
    FeatureBatch::from_rows(&rows)
}

pub fn load_features(path: &Path, format: FeatureFormat, header: bool) -> Result<FeatureBatch> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    match format {
        FeatureFormat::Fbv => decode_fbv(&bytes, path),
        FeatureFormat::Csv => {
            let text = String::from_utf8(bytes)
                .map_err(|e| parse_err(path, format!("byte {}", e.utf8_error().valid_up_to()), "invalid UTF-8"))?;
            decode_csv(&text, header, path)
        }
    }
}

pub fn write_features(path: &Path, b: &FeatureBatch, format: FeatureFormat) -> Result<()> {
    let bytes = match format {
        FeatureFormat::Fbv => encode_fbv(b)?,
        FeatureFormat::Csv => encode_csv(b).into_bytes(),
    };
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::seeded_standard_normal;

    fn p() -> &'static Path {
        Path::new("mem")
    }

    #[test]
    fn fbv_layout() {
        let b = FeatureBatch::new(1, 2, vec![1.0, -2.5]).unwrap();
        let bytes = encode_fbv(&b).unwrap();
        assert_eq!(&bytes[..4], b"FBV1");
        assert_eq!(&bytes[4..8], &1u32.to_le_bytes());
        assert_eq!(&bytes[8..12], &2u32.to_le_bytes());
        assert_eq!(&bytes[12..20], &1.0f64.to_le_bytes());
        assert_eq!(decode_fbv(&bytes, p()).unwrap(), b);
    }

    #[test]
    fn fbv_errors() {
        assert!(decode_fbv(b"", p()).is_err());
        assert!(decode_fbv(b"FBV2\0\0\0\0\0\0\0\0", p()).is_err());
        let b = seeded_standard_normal(2, 2, 0).unwrap();
        let bytes = encode_fbv(&b).unwrap();
        let err = decode_fbv(&bytes[..bytes.len() - 1], p()).unwrap_err();
        assert!(err.to_string().contains("byte"), "{err}");
    }

    #[test]
    fn csv_cell_error_names_location() {
        let err = decode_csv("1,2\n3,x\n", false, p()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 2") && msg.contains("column 2"), "{msg}");
    }

    #[test]
    fn csv_header_and_ragged() {
        let b = decode_csv("a,b\n1,2\n3,4\n", true, p()).unwrap();
        assert_eq!(b.n(), 2);
        assert!(decode_csv("1,2\n3\n", false, p()).is_err());
        assert!(decode_csv("", false, p()).is_err());
        assert!(decode_csv("\n\n", false, p()).is_err());
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let b = seeded_standard_normal(16, 4, 3).unwrap();
        assert_eq!(decode_csv(&encode_csv(&b), false, p()).unwrap(), b);
    }
}
