//! Spatially regularized affinity, normalized Laplacian, eigenpairs and the
//! row-normalized spectral embedding.

mod eigen;
mod sparse;

use alloc::vec::Vec;

pub use eigen::{
    block_lanczos, dense_smallest, smallest_eigenpairs, smallest_eigenpairs_from, EigenMethod, EigenPairs,
    EigenParams,
};
pub use sparse::{DenseSymMatrix, SparseSymMatrix, SymOperator};

use crate::error::{invalid, Error, Result};
use crate::linalg::RowMatrix;
use crate::raster::{PixelCoord, RasterDims};
use crate::ultrametric::BottleneckIndex;

/// Scale and spatial window of the affinity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffinityParams {
    pub sigma: f64,
    /// Side length of the square spatial window, in pixels.
    pub radius: usize,
}

impl AffinityParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(invalid!("sigma must be positive and finite, got {}", self.sigma));
        }
        if self.radius == 0 {
            return Err(invalid!("window side length must be at least 1"));
        }
        Ok(())
    }
}

/// Chebyshev half-width of a window with side length `radius`: the largest
/// centered square that fits inside `radius x radius`.
pub fn half_width(radius: usize) -> usize {
    radius.saturating_sub(1) / 2
}

fn window_bounds(p: PixelCoord, radius: usize, dims: RasterDims) -> (usize, usize, usize, usize) {
    let h = half_width(radius);
    (
        p.row.saturating_sub(h),
        (p.row + h).min(dims.rows - 1),
        p.col.saturating_sub(h),
        (p.col + h).min(dims.cols - 1),
    )
}

/// All pixels within Chebyshev distance [`half_width`] of `p`, clipped to the
/// raster, in row-major order.
pub fn spatial_window(p: PixelCoord, radius: usize, dims: RasterDims) -> Vec<PixelCoord> {
    if !dims.contains(p) {
        return Vec::new();
    }
    let (r0, r1, c0, c1) = window_bounds(p, radius, dims);
    (r0..=r1)
        .flat_map(|r| (c0..=c1).map(move |c| PixelCoord::new(r, c)))
        .collect()
}

/// Finite ultrametric distances for every in-window pixel pair, stored with
/// the affinity's sparsity pattern (diagonal included).
///
/// Built once per image and re-used for every `sigma`.
#[derive(Debug, Clone)]
pub struct WindowDistances {
    dims: RasterDims,
    radius: usize,
    distances: SparseSymMatrix,
}

impl WindowDistances {
    pub fn build(dims: RasterDims, index: &BottleneckIndex, radius: usize) -> Result<Self> {
        if index.n() != dims.len() {
            return Err(Error::DimensionMismatch(alloc::format!(
                "index covers {} nodes but the raster has {} pixels",
                index.n(),
                dims.len()
            )));
        }
        if radius == 0 {
            return Err(invalid!("window side length must be at least 1"));
        }
        let side = 2 * half_width(radius) + 1;
        let distances = SparseSymMatrix::build(dims.len(), side * side, |i, out| {
            let p = PixelCoord::new(i / dims.cols, i % dims.cols);
            let (r0, r1, c0, c1) = window_bounds(p, radius, dims);
            for r in r0..=r1 {
                for c in c0..=c1 {
                    let j = r * dims.cols + c;
                    let d = index.query_unchecked(i, j);
                    if d.is_finite() {
                        out.push(j as u32, d);
                    }
                }
            }
        })?;
        Ok(Self {
            dims,
            radius,
            distances,
        })
    }

    pub fn dims(&self) -> RasterDims {
        self.dims
    }

    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn matrix(&self) -> &SparseSymMatrix {
        &self.distances
    }

    /// Off-diagonal finite distances that are strictly positive.
    pub fn positive_distances(&self) -> Vec<f64> {
        self.distances.values().iter().copied().filter(|&d| d > 0.0).collect()
    }

    /// `W_ij = exp(-rho_ij^2 / sigma^2)` over the window; zero entries
    /// (underflow or infinite distance) are not stored.
    pub fn affinity(&self, sigma: f64) -> Result<SparseSymMatrix> {
        AffinityParams { sigma, radius: self.radius }.validate()?;
        let s2 = sigma * sigma;
        let d = &self.distances;
        let same = d.map_values(|_, _, rho| libm::exp(-(rho * rho) / s2));
        if same.values().iter().all(|&w| w > 0.0) {
            return Ok(same);
        }
        SparseSymMatrix::build(d.n(), d.nnz() / d.n().max(1) + 1, |i, out| {
            let (cols, vals) = d.row(i);
            for (&j, &rho) in cols.iter().zip(vals) {
                let w = libm::exp(-(rho * rho) / s2);
                if w > 0.0 {
                    out.push(j, w);
                }
            }
        })
    }
}

/// Spatially regularized ultrametric affinity for an image of size `dims`.
pub fn build_affinity(dims: RasterDims, index: &BottleneckIndex, params: AffinityParams) -> Result<SparseSymMatrix> {
    params.validate()?;
    WindowDistances::build(dims, index, params.radius)?.affinity(params.sigma)
}

/// Symmetric normalized Laplacian `I - D^{-1/2} W D^{-1/2}`.
///
/// The result has the sparsity pattern of `w` plus the diagonal.
pub fn build_laplacian(w: &SparseSymMatrix) -> Result<SparseSymMatrix> {
    let n = w.n();
    let degrees = w.row_sums();
    if let Some(i) = degrees.iter().position(|&d| !(d > 0.0)) {
        return Err(Error::Internal(alloc::format!("row {i} of the affinity has zero degree")));
    }
    let inv_sqrt: Vec<f64> = degrees.iter().map(|&d| 1.0 / libm::sqrt(d)).collect();
    if (0..n).all(|i| w.row(i).0.binary_search(&(i as u32)).is_ok()) {
        return Ok(w.map_values(|i, j, v| {
            let scaled = v * (inv_sqrt[i] * inv_sqrt[j as usize]);
            if j as usize == i {
                1.0 - scaled
            } else {
                -scaled
            }
        }));
    }
    SparseSymMatrix::build(n, w.nnz() / n.max(1) + 1, |i, out| {
        let (cols, vals) = w.row(i);
        let mut has_diag = false;
        for (&j, &v) in cols.iter().zip(vals) {
            let ju = j as usize;
            // product of the two scale factors first, so (i, j) and (j, i)
            // round identically
            let scaled = v * (inv_sqrt[i] * inv_sqrt[ju]);
            if ju == i {
                has_diag = true;
                out.push(j, 1.0 - scaled);
            } else {
                if !has_diag && ju > i {
                    out.push(i as u32, 1.0);
                    has_diag = true;
                }
                out.push(j, -scaled);
            }
        }
        if !has_diag {
            out.push(i as u32, 1.0);
        }
    })
}

/// Eigenvalues, eigenvectors and row-normalized features.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralEmbedding {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<Vec<f64>>,
    pub features: RowMatrix,
    /// Pixels whose leading eigenvector entries were all (numerically) zero.
    pub zero_rows: usize,
}

/// Rows with norm below this are left as zero vectors.
pub const ZERO_ROW_NORM: f64 = 1e-12;

/// Stacks the first `k` eigenvectors as columns and scales each row to unit
/// Euclidean norm. Returns the features and the number of zero rows.
pub fn embed_rows(vectors: &[Vec<f64>], k: usize) -> Result<(RowMatrix, usize)> {
    if k == 0 || k > vectors.len() {
        return Err(invalid!("cannot embed {k} coordinates from {} eigenvectors", vectors.len()));
    }
    let mut features = RowMatrix::from_columns(&vectors[..k])?;
    let mut zero_rows = 0;
    for i in 0..features.rows() {
        let row = features.row_mut(i);
        let nrm = crate::linalg::norm(row);
        if nrm < ZERO_ROW_NORM {
            row.iter_mut().for_each(|x| *x = 0.0);
            zero_rows += 1;
        } else {
            row.iter_mut().for_each(|x| *x /= nrm);
        }
    }
    Ok((features, zero_rows))
}

/// Eigenpairs of a Laplacian turned into a [`SpectralEmbedding`].
pub fn spectral_embedding(pairs: EigenPairs, k: usize) -> Result<SpectralEmbedding> {
    let (features, zero_rows) = embed_rows(&pairs.vectors, k)?;
    Ok(SpectralEmbedding {
        eigenvalues: pairs.values,
        eigenvectors: pairs.vectors,
        features,
        zero_rows,
    })
}
