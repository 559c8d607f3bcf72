//! On-disk formats: CSV tables, ASCII PGM images, the `ROMB` basis file and
//! the plain-text offline manifest.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::Path;

use romdot_core::basis::ColumnKind;
use romdot_core::linalg::Mat;
use sha2::{Digest, Sha256};

use crate::AppError;

pub const ROMB_MAGIC: &[u8; 4] = b"ROMB";
pub const ROMB_VERSION: u32 = 1;

/// Six significant digits in scientific notation.
pub fn sci(x: f64) -> String {
    format!("{x:.5e}")
}

/// Writes a CSV file with a header row. Cells are written verbatim.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<(), AppError> {
    let io = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(e) => AppError::io(path, e),
        other => AppError::format(path, format!("{other:?}")),
    };
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(r).map_err(io)?;
    }
    w.flush().map_err(|e| AppError::io(path, e))
}

/// Reads a CSV written by [`write_csv`], returning header and rows.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<String>>), AppError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| AppError::format(path, e.to_string()))?;
    let header = r
        .headers()
        .map_err(|e| AppError::format(path, e.to_string()))?
        .iter()
        .map(String::from)
        .collect();
    let rows = r
        .records()
        .map(|rec| rec.map(|rec| rec.iter().map(String::from).collect()))
        .collect::<Result<_, _>>()
        .map_err(|e| AppError::format(path, e.to_string()))?;
    Ok((header, rows))
}

/// Gray levels `0..=255` for values linearly mapped from `[lo, hi]`.
pub fn gray_levels(values: &[f64], lo: f64, hi: f64) -> Vec<u8> {
    values
        .iter()
        .map(|v| {
            let t = if hi > lo { (v - lo) / (hi - lo) } else { 0.0 };
            (t.clamp(0.0, 1.0) * 255.0).round() as u8
        })
        .collect()
}

/// ASCII PGM (P2). `values` are row-major with row 0 at the top.
pub fn write_pgm(path: &Path, width: usize, height: usize, values: &[f64], lo: f64, hi: f64) -> Result<(), AppError> {
    assert_eq!(values.len(), width * height, "image size mismatch");
    let levels = gray_levels(values, lo, hi);
    let mut out = format!("P2\n{width} {height}\n255\n");
    for row in levels.chunks(width) {
        for line in row.chunks(16) {
            let cells: Vec<String> = line.iter().map(u8::to_string).collect();
            out.push_str(&cells.join(" "));
            out.push('\n');
        }
    }
    fs::write(path, out).map_err(|e| AppError::io(path, e))
}

/// Parses a P2 image into `(width, height, levels)`.
pub fn read_pgm(path: &Path) -> Result<(usize, usize, Vec<u8>), AppError> {
    let text = fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    let mut tok = text.split_whitespace();
    if tok.next() != Some("P2") {
        return Err(AppError::format(path, "not an ASCII PGM"));
    }
    let mut num = || -> Result<usize, AppError> {
        tok.next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| AppError::format(path, "truncated PGM"))
    };
    let (w, h, max) = (num()?, num()?, num()?);
    if max != 255 {
        return Err(AppError::format(path, "expected maxval 255"));
    }
    let levels = (0..w * h).map(|_| num().map(|v| v as u8)).collect::<Result<Vec<_>, _>>()?;
    Ok((w, h, levels))
}

/// Columns of a basis plus their provenance tags.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisFile {
    pub v: Mat,
    pub kinds: Vec<ColumnKind>,
}

pub fn write_basis(path: &Path, v: &Mat, kinds: &[ColumnKind]) -> Result<(), AppError> {
    assert_eq!(v.ncols(), kinds.len(), "one tag per column");
    let mut buf = Vec::with_capacity(24 + 8 * v.as_slice().len() + kinds.len());
    buf.extend_from_slice(ROMB_MAGIC);
    buf.extend_from_slice(&ROMB_VERSION.to_le_bytes());
    buf.extend_from_slice(&(v.nrows() as u64).to_le_bytes());
    buf.extend_from_slice(&(v.ncols() as u64).to_le_bytes());
    for x in v.as_slice() {
        buf.extend_from_slice(&x.to_le_bytes());
    }
    buf.extend(kinds.iter().map(|k| k.tag()));
    let mut f = fs::File::create(path).map_err(|e| AppError::io(path, e))?;
    f.write_all(&buf).map_err(|e| AppError::io(path, e))
}

pub fn read_basis(path: &Path) -> Result<BasisFile, AppError> {
    let bytes = fs::read(path).map_err(|e| AppError::io(path, e))?;
    let bad = |r: &str| AppError::format(path, r);
    if bytes.len() < 24 || &bytes[..4] != ROMB_MAGIC {
        return Err(bad("missing ROMB header"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != ROMB_VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let n = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let r = u64::from_le_bytes(bytes[16..24].try_into().unwrap()) as usize;
    let payload = n.checked_mul(r).and_then(|m| m.checked_mul(8)).ok_or_else(|| bad("size overflow"))?;
    if bytes.len() != 24 + payload + r {
        return Err(bad("length does not match header"));
    }
    let data = bytes[24..24 + payload]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let kinds = bytes[24 + payload..]
        .iter()
        .map(|&t| ColumnKind::from_tag(t).ok_or_else(|| bad(&format!("unknown column tag {t}"))))
        .collect::<Result<_, _>>()?;
    let v = Mat::from_col_major(n, r, data).map_err(|e| bad(&e.to_string()))?;
    Ok(BasisFile { v, kinds })
}

pub fn sha256_hex(text: &str) -> String {
    Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// `key=value` lines in key order.
pub fn write_manifest(path: &Path, entries: &BTreeMap<String, String>) -> Result<(), AppError> {
    let text: String = entries.iter().map(|(k, v)| format!("{k}={v}\n")).collect();
    fs::write(path, text).map_err(|e| AppError::io(path, e))
}

pub fn read_manifest(path: &Path) -> Result<BTreeMap<String, String>, AppError> {
    let text = fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| AppError::format(path, format!("bad manifest line {l:?}")))
        })
        .collect()
}
