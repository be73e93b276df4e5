//! On-disk formats.
//!
//! A field `<stem>` is written as `<stem>.bin` (row-major `f64`, little
//! endian, no header) plus `<stem>.json` holding `{ "n", "L", "P" }` and any
//! extra metadata the caller attaches.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, TorusGrid};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldHeader {
    pub n: usize,
    #[serde(rename = "L")]
    pub length: f64,
    #[serde(rename = "P")]
    pub points: usize,
}

impl FieldHeader {
    pub fn of(grid: &TorusGrid) -> Self {
        FieldHeader { n: grid.dim(), length: grid.length(), points: grid.points() }
    }
}

pub fn field_to_bytes(field: &Field) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 * field.len());
    for v in field.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn field_from_bytes(header: &FieldHeader, bytes: &[u8]) -> Result<Field> {
    let grid = TorusGrid::new(header.n, header.length, header.points)?;
    if bytes.len() != 8 * grid.len() {
        return Err(Error::Format(format!("expected {} bytes, found {}", 8 * grid.len(), bytes.len())));
    }
    let values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Field::new(grid, values)
}

fn with_ext(stem: &Path, ext: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

/// Writes `<stem>.bin` and `<stem>.json`; `extra` is merged into the header
/// object. Returns both paths.
pub fn write_field(stem: &Path, field: &Field, extra: Option<serde_json::Value>) -> Result<[PathBuf; 2]> {
    let bin = with_ext(stem, "bin");
    let meta = with_ext(stem, "json");
    fs::write(&bin, field_to_bytes(field))?;
    let mut header = serde_json::to_value(FieldHeader::of(field.grid()))?;
    if let (Some(serde_json::Value::Object(extra)), serde_json::Value::Object(obj)) = (extra, &mut header) {
        for (k, v) in extra {
            obj.insert(k, v);
        }
    }
    let mut text = serde_json::to_string_pretty(&header)?;
    text.push('\n');
    fs::write(&meta, text)?;
    Ok([bin, meta])
}

/// Reads a field written by [`write_field`], returning it with the raw header.
pub fn read_field(stem: &Path) -> Result<(Field, serde_json::Value)> {
    let meta_text = fs::read_to_string(with_ext(stem, "json"))?;
    let meta: serde_json::Value = serde_json::from_str(&meta_text)?;
    let header: FieldHeader = serde_json::from_value(meta.clone())?;
    let bytes = fs::read(with_ext(stem, "bin"))?;
    Ok((field_from_bytes(&header, &bytes)?, meta))
}

/// CSV of a 1-D field (`x,u`), a 2-D field (`x,y,u`), or the middle
/// `z`-slice of a 3-D field (`x,y,u`).
pub fn write_csv_slice<W: Write>(field: &Field, mut out: W) -> Result<()> {
    let grid = field.grid();
    let h = grid.spacing();
    let p = grid.points();
    let v = field.values();
    match grid.dim() {
        1 => {
            writeln!(out, "x,u")?;
            for (i, val) in v.iter().enumerate() {
                writeln!(out, "{},{}", i as f64 * h, val)?;
            }
        }
        dim => {
            writeln!(out, "x,y,u")?;
            let k = p / 2;
            for i in 0..p {
                for j in 0..p {
                    let flat = if dim == 2 { grid.flat_index(&[i, j]) } else { grid.flat_index(&[i, j, k]) };
                    writeln!(out, "{},{},{}", i as f64 * h, j as f64 * h, v[flat])?;
                }
            }
        }
    }
    Ok(())
}
