use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::par;

const ROW_CHUNK: usize = 64;
const BUILD_BLOCK: usize = 256;

/// Consecutive rows of a matrix under construction, stored flat.
#[derive(Debug, Default)]
pub(crate) struct RowBlock {
    ends: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<f64>,
}

impl RowBlock {
    fn with_capacity(rows: usize, nnz: usize) -> Self {
        Self {
            ends: Vec::with_capacity(rows),
            cols: Vec::with_capacity(nnz),
            vals: Vec::with_capacity(nnz),
        }
    }

    #[inline]
    pub(crate) fn push(&mut self, col: u32, val: f64) {
        self.cols.push(col);
        self.vals.push(val);
    }

    fn end_row(&mut self) {
        self.ends.push(self.cols.len());
    }
}

/// A symmetric linear operator `y = A x`.
pub trait SymOperator: Sync {
    fn dim(&self) -> usize;

    fn apply(&self, x: &[f64], y: &mut [f64]);

    /// Materializes the operator as a dense row-major matrix.
    fn to_dense(&self) -> Vec<f64> {
        let n = self.dim();
        let mut out = vec![0.0; n * n];
        let mut e = vec![0.0; n];
        let mut col = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            self.apply(&e, &mut col);
            e[j] = 0.0;
            for i in 0..n {
                out[i * n + j] = col[i];
            }
        }
        out
    }
}

/// Symmetric sparse matrix in compressed sparse row form.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    values: Vec<f64>,
}

impl SparseSymMatrix {
    /// Assembles a matrix from per-row `(column, value)` lists sorted by
    /// column. Symmetry is the caller's responsibility; see
    /// [`is_symmetric`](Self::is_symmetric).
    pub fn from_rows(n: usize, rows: Vec<Vec<(u32, f64)>>) -> Result<Self> {
        if rows.len() != n {
            return Err(Error::DimensionMismatch(alloc::format!(
                "expected {n} rows, got {}",
                rows.len()
            )));
        }
        if n > u32::MAX as usize {
            return Err(crate::error::invalid!("matrix order {n} exceeds u32 indices"));
        }
        let nnz = rows.iter().map(Vec::len).sum();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        row_ptr.push(0);
        for (i, row) in rows.into_iter().enumerate() {
            let mut prev: Option<u32> = None;
            for (c, v) in row {
                if c as usize >= n || prev.is_some_and(|p| p >= c) {
                    return Err(crate::error::invalid!(
                        "row {i} has unsorted or out-of-range column {c}"
                    ));
                }
                prev = Some(c);
                col_idx.push(c);
                values.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self {
            n,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Builds the matrix in parallel blocks of rows. `fill(i, block)` pushes
    /// the entries of row `i` in increasing column order; `row_hint` is the
    /// expected row length.
    pub(crate) fn build<F>(n: usize, row_hint: usize, fill: F) -> Result<Self>
    where
        F: Fn(usize, &mut RowBlock) + Sync + Send,
    {
        if n > u32::MAX as usize {
            return Err(crate::error::invalid!("matrix order {n} exceeds u32 indices"));
        }
        let blocks = par::map_range(n.div_ceil(BUILD_BLOCK), |b| {
            let rows = b * BUILD_BLOCK..((b + 1) * BUILD_BLOCK).min(n);
            let mut block = RowBlock::with_capacity(rows.len(), rows.len() * row_hint);
            for i in rows {
                fill(i, &mut block);
                block.end_row();
            }
            block
        });
        let nnz = blocks.iter().map(|b| b.cols.len()).sum();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        row_ptr.push(0);
        for block in blocks {
            let base = col_idx.len();
            let mut start = 0;
            for &end in &block.ends {
                let i = row_ptr.len() - 1;
                let cols = &block.cols[start..end];
                if cols.iter().any(|&c| c as usize >= n) || cols.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(crate::error::invalid!("row {i} has unsorted or out-of-range columns"));
                }
                row_ptr.push(base + end);
                start = end;
            }
            col_idx.extend_from_slice(&block.cols);
            values.extend_from_slice(&block.vals);
        }
        Ok(Self {
            n,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Same sparsity pattern with values `f(i, j, a_ij)`.
    pub(crate) fn map_values<F>(&self, f: F) -> Self
    where
        F: Fn(usize, u32, f64) -> f64 + Sync + Send,
    {
        let mut values = vec![0.0; self.values.len()];
        let mut pieces: Vec<(usize, &mut [f64])> = Vec::with_capacity(self.n.div_ceil(BUILD_BLOCK));
        let mut rest: &mut [f64] = &mut values;
        for r0 in (0..self.n).step_by(BUILD_BLOCK) {
            let r1 = (r0 + BUILD_BLOCK).min(self.n);
            let (head, tail) = core::mem::take(&mut rest).split_at_mut(self.row_ptr[r1] - self.row_ptr[r0]);
            pieces.push((r0, head));
            rest = tail;
        }
        par::for_each_mut(&mut pieces, |_, (r0, out)| {
            let r1 = (*r0 + BUILD_BLOCK).min(self.n);
            let base = self.row_ptr[*r0];
            for i in *r0..r1 {
                for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                    out[k - base] = f(i, self.col_idx[k], self.values[k]);
                }
            }
        });
        Self {
            n: self.n,
            row_ptr: self.row_ptr.clone(),
            col_idx: self.col_idx.clone(),
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n as u32).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of stored entries.
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[u32], &[f64]) {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.col_idx[a..b], &self.values[a..b])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&(j as u32)).map_or(0.0, |p| vals[p])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.row(i).1.iter().sum()).collect()
    }

    /// Exact structural and numeric symmetry.
    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| {
            let (cols, vals) = self.row(i);
            cols.iter()
                .zip(vals)
                .all(|(&j, &v)| self.get(j as usize, i) == v && self.row(j as usize).0.binary_search(&(i as u32)).is_ok())
        })
    }
}

impl SymOperator for SparseSymMatrix {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        par::for_each_chunk_mut(y, ROW_CHUNK, |ci, chunk| {
            for (t, out) in chunk.iter_mut().enumerate() {
                let (cols, vals) = self.row(ci * ROW_CHUNK + t);
                let mut acc = 0.0;
                for (&c, &v) in cols.iter().zip(vals) {
                    acc += v * x[c as usize];
                }
                *out = acc;
            }
        });
    }
}

/// Dense symmetric matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSymMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DenseSymMatrix {
    pub fn new(n: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::DimensionMismatch(alloc::format!(
                "dense {n}x{n} matrix needs {} values",
                n * n
            )));
        }
        Ok(Self { n, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

impl SymOperator for DenseSymMatrix {
    fn dim(&self) -> usize {
        self.n
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.n;
        par::for_each_mut(y, |i, out| {
            *out = crate::linalg::dot(&self.data[i * n..(i + 1) * n], x);
        });
    }

    fn to_dense(&self) -> Vec<f64> {
        self.data.clone()
    }
}
