//! Hyperspectral cubes, label rasters and pixel geometry.
//!
//! Pixels are ordered row-major everywhere. A cube stores its spectra
//! band-interleaved-by-pixel, so the spectrum of pixel `p` is the contiguous
//! slice `data[p * bands..(p + 1) * bands]`.

use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};

/// Spatial position of a pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PixelCoord {
    pub row: usize,
    pub col: usize,
}

impl PixelCoord {
    pub const fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }
}

/// Row-major linear index of `coord` in a raster with `cols` columns.
///
/// Only the column can be bounds-checked without the row count; use
/// [`RasterDims::pixel_index`] for a full check.
pub fn pixel_index(coord: PixelCoord, cols: usize) -> Result<usize> {
    if coord.col >= cols {
        return Err(Error::OutOfBounds {
            row: coord.row,
            col: coord.col,
            rows: usize::MAX,
            cols,
        });
    }
    coord
        .row
        .checked_mul(cols)
        .and_then(|v| v.checked_add(coord.col))
        .ok_or_else(|| invalid!("pixel index overflows"))
}

/// Spatial extent of a raster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct RasterDims {
    pub rows: usize,
    pub cols: usize,
}

impl RasterDims {
    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(invalid!("raster must be non-empty, got {rows}x{cols}"));
        }
        rows.checked_mul(cols)
            .ok_or_else(|| invalid!("raster {rows}x{cols} is too large"))?;
        Ok(Self { rows, cols })
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, coord: PixelCoord) -> bool {
        coord.row < self.rows && coord.col < self.cols
    }

    pub fn pixel_index(&self, coord: PixelCoord) -> Result<usize> {
        if !self.contains(coord) {
            return Err(Error::OutOfBounds {
                row: coord.row,
                col: coord.col,
                rows: self.rows,
                cols: self.cols,
            });
        }
        Ok(coord.row * self.cols + coord.col)
    }

    pub fn index_to_coord(&self, index: usize) -> Result<PixelCoord> {
        if index >= self.len() {
            return Err(Error::IndexOutOfRange {
                index,
                n: self.len(),
            });
        }
        Ok(PixelCoord::new(index / self.cols, index % self.cols))
    }
}

/// A `rows x cols x bands` hyperspectral image.
#[derive(Debug, Clone, PartialEq)]
pub struct HsiCube {
    dims: RasterDims,
    bands: usize,
    data: Vec<f32>,
}

impl HsiCube {
    /// Wraps pixel-major data, rejecting wrong lengths and non-finite values.
    pub fn new(rows: usize, cols: usize, bands: usize, data: Vec<f32>) -> Result<Self> {
        let dims = RasterDims::new(rows, cols)?;
        if bands == 0 {
            return Err(invalid!("cube must have at least one band"));
        }
        let expected = dims
            .len()
            .checked_mul(bands)
            .ok_or_else(|| invalid!("cube {rows}x{cols}x{bands} is too large"))?;
        if data.len() != expected {
            return Err(Error::DimensionMismatch(alloc::format!(
                "{rows}x{cols}x{bands} cube needs {expected} values, got {}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(pos));
        }
        Ok(Self { dims, bands, data })
    }

    pub fn rows(&self) -> usize {
        self.dims.rows
    }

    pub fn cols(&self) -> usize {
        self.dims.cols
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn dims(&self) -> RasterDims {
        self.dims
    }

    pub fn n_pixels(&self) -> usize {
        self.dims.len()
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn spectrum(&self, pixel: usize) -> &[f32] {
        &self.data[pixel * self.bands..(pixel + 1) * self.bands]
    }
}

/// Per-pixel class labels. `0` marks an unlabeled pixel; classes are `1..=K`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelRaster {
    dims: RasterDims,
    labels: Vec<u32>,
}

impl LabelRaster {
    pub fn new(rows: usize, cols: usize, labels: Vec<u32>) -> Result<Self> {
        let dims = RasterDims::new(rows, cols)?;
        if labels.len() != dims.len() {
            return Err(Error::DimensionMismatch(alloc::format!(
                "{rows}x{cols} raster needs {} labels, got {}",
                dims.len(),
                labels.len()
            )));
        }
        Ok(Self { dims, labels })
    }

    pub fn rows(&self) -> usize {
        self.dims.rows
    }

    pub fn cols(&self) -> usize {
        self.dims.cols
    }

    pub fn dims(&self) -> RasterDims {
        self.dims
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn into_labels(self) -> Vec<u32> {
        self.labels
    }

    /// Largest label present (0 for an entirely unlabeled raster).
    pub fn max_label(&self) -> u32 {
        self.labels.iter().copied().max().unwrap_or(0)
    }

    pub fn labeled_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l != 0).count()
    }

    /// Checks the raster against a declared class count.
    pub fn check_classes(&self, k: u32) -> Result<()> {
        match self.max_label() {
            m if m > k => Err(invalid!("label {m} exceeds declared class count {k}")),
            _ => Ok(()),
        }
    }
}
