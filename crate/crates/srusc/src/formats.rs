//! On-disk formats.
//!
//! A cube named `stem` is stored as `stem.json`, a header of the form
//!
//! ```json
//! {"rows": 40, "cols": 50, "bands": 200, "dtype": "f32",
//!  "order": "bip-rowmajor", "byte_order": "little"}
//! ```
//!
//! and `stem.raw`, exactly `rows * cols * bands` little-endian `f32` values
//! with all bands of a pixel contiguous and pixels in row-major order.
//!
//! Label rasters are plain-text CSV: `rows` lines of `cols` comma-separated
//! non-negative integers, `0` meaning unlabeled.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use srusc_core::{HsiCube, LabelRaster};

use crate::Error;

pub const DTYPE: &str = "f32";
pub const ORDER: &str = "bip-rowmajor";
pub const BYTE_ORDER: &str = "little";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CubeHeader {
    pub rows: usize,
    pub cols: usize,
    pub bands: usize,
    pub dtype: String,
    pub order: String,
    pub byte_order: String,
}

impl CubeHeader {
    pub fn for_cube(cube: &HsiCube) -> Self {
        Self {
            rows: cube.rows(),
            cols: cube.cols(),
            bands: cube.bands(),
            dtype: DTYPE.into(),
            order: ORDER.into(),
            byte_order: BYTE_ORDER.into(),
        }
    }

    fn check(&self) -> Result<usize, Error> {
        if self.dtype != DTYPE || self.order != ORDER || self.byte_order != BYTE_ORDER {
            return Err(Error::Format(format!(
                "unsupported layout {}/{}/{}; expected {DTYPE}/{ORDER}/{BYTE_ORDER}",
                self.dtype, self.order, self.byte_order
            )));
        }
        self.rows
            .checked_mul(self.cols)
            .and_then(|p| p.checked_mul(self.bands))
            .and_then(|v| v.checked_mul(4))
            .ok_or_else(|| Error::Format("header dimensions overflow".into()))
    }
}

/// `stem.json` and `stem.raw`. A trailing `.json` or `.raw` on `stem` is
/// ignored, so either file can be named.
pub fn cube_paths(stem: &Path) -> (PathBuf, PathBuf) {
    let base = match stem.extension().and_then(|e| e.to_str()) {
        Some("json" | "raw") => stem.with_extension(""),
        _ => stem.to_path_buf(),
    };
    let with = |ext: &str| {
        let mut s = base.clone().into_os_string();
        s.push(".");
        s.push(ext);
        PathBuf::from(s)
    };
    (with("json"), with("raw"))
}

fn read(path: &Path) -> Result<Vec<u8>, Error> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), Error> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn save_cube(stem: &Path, cube: &HsiCube) -> Result<(), Error> {
    let (json, raw) = cube_paths(stem);
    let header = serde_json::to_vec_pretty(&CubeHeader::for_cube(cube))?;
    write(&json, &header)?;
    let bytes: Vec<u8> = cube.data().iter().flat_map(|v| v.to_le_bytes()).collect();
    write(&raw, &bytes)
}

pub fn load_cube(stem: &Path) -> Result<HsiCube, Error> {
    let (json, raw) = cube_paths(stem);
    let header: CubeHeader = serde_json::from_slice(&read(&json)?)?;
    let expected = header.check()?;
    let bytes = read(&raw)?;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "{} holds {} bytes, header {}x{}x{} needs {expected}",
            raw.display(),
            bytes.len(),
            header.rows,
            header.cols,
            header.bands
        )));
    }
    let data = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    HsiCube::new(header.rows, header.cols, header.bands, data).map_err(|e| Error::Format(e.to_string()))
}

pub fn labels_to_csv(labels: &LabelRaster) -> String {
    let mut out = String::with_capacity(labels.labels().len() * 3);
    for row in labels.labels().chunks(labels.cols()) {
        let line: Vec<String> = row.iter().map(u32::to_string).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn labels_from_csv(text: &str) -> Result<LabelRaster, Error> {
    let mut cols = None;
    let mut values = Vec::new();
    let mut rows = 0;
    for (ln, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let before = values.len();
        for field in line.split(',') {
            let v = field
                .trim()
                .parse::<u32>()
                .map_err(|_| Error::Format(format!("line {}: {field:?} is not a non-negative integer", ln + 1)))?;
            values.push(v);
        }
        let width = values.len() - before;
        match cols {
            None => cols = Some(width),
            Some(c) if c != width => {
                return Err(Error::Format(format!("line {} has {width} values, expected {c}", ln + 1)));
            }
            _ => {}
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| Error::Format("label file is empty".into()))?;
    LabelRaster::new(rows, cols, values).map_err(|e| Error::Format(e.to_string()))
}

pub fn save_labels(path: &Path, labels: &LabelRaster) -> Result<(), Error> {
    write(path, labels_to_csv(labels).as_bytes())
}

pub fn load_labels(path: &Path) -> Result<LabelRaster, Error> {
    let text = String::from_utf8(read(path)?).map_err(|_| Error::Format(format!("{} is not UTF-8", path.display())))?;
    labels_from_csv(&text)
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), Error> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write(path, text.as_bytes())
}

pub fn write_text(path: &Path, text: &str) -> Result<(), Error> {
    write(path, text.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paths_accept_either_extension() {
        let (j, r) = cube_paths(Path::new("d/cube"));
        assert_eq!((j.to_str().unwrap(), r.to_str().unwrap()), ("d/cube.json", "d/cube.raw"));
        assert_eq!(cube_paths(Path::new("d/cube.json")), (j.clone(), r.clone()));
        assert_eq!(cube_paths(Path::new("d/cube.raw")), (j, r));
    }

    #[test]
    fn csv_round_trip() {
        let l = LabelRaster::new(2, 3, vec![0, 1, 2, 3, 0, 10]).unwrap();
        let text = labels_to_csv(&l);
        assert_eq!(text, "0,1,2\n3,0,10\n");
        assert_eq!(labels_from_csv(&text).unwrap(), l);
    }

    #[test]
    fn csv_rejects_bad_input() {
        assert!(labels_from_csv("").is_err());
        assert!(labels_from_csv("1,2\n3\n").is_err());
        assert!(labels_from_csv("1,-2\n").is_err());
        assert!(labels_from_csv("1,x\n").is_err());
    }

    #[test]
    fn header_layout_checked() {
        let mut h = CubeHeader {
            rows: 2,
            cols: 2,
            bands: 3,
            dtype: "f32".into(),
            order: ORDER.into(),
            byte_order: BYTE_ORDER.into(),
        };
        assert_eq!(h.check().unwrap(), 48);
        h.dtype = "f64".into();
        assert!(h.check().is_err());
    }
}
