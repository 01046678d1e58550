//! Smallest eigenpairs of symmetric operators.
//!
//! The iterative solver is a restarted block Lanczos method: each cycle grows
//! an orthonormal block Krylov basis from the current block, solves the
//! projected problem with Jacobi rotations, and restarts from the best Ritz
//! vectors. Using a block at least as wide as the number of wanted pairs
//! lets it resolve repeated eigenvalues (one zero per connected component of
//! a graph), which single-vector Lanczos cannot.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::sparse::SymOperator;
use crate::error::{invalid, Error, Result};
use crate::linalg::{dense_symmetric_eigen, dot, fix_sign, jacobi_eigen, norm};
use crate::par;

const ELEM_CHUNK: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenParams {
    /// Required residual `||A v - lambda v||_2` for every returned pair.
    pub tol: f64,
    /// Maximum number of restart cycles.
    pub max_iter: usize,
    /// Seed for the random starting block.
    pub seed: u64,
    /// Largest order for which a dense solve is attempted when the iterative
    /// solver fails to converge.
    pub dense_fallback_max_n: usize,
}

impl Default for EigenParams {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 5000,
            seed: 0x5eed_1a9c,
            dense_fallback_max_n: 3000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EigenMethod {
    BlockLanczos,
    Dense,
}

/// Ascending eigenvalues with unit eigenvectors.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPairs {
    pub values: Vec<f64>,
    /// One vector of length `n` per eigenvalue.
    pub vectors: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub method: EigenMethod,
}

impl EigenPairs {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }
}

fn validate(n: usize, m: usize, params: &EigenParams) -> Result<()> {
    if m == 0 || m > n {
        return Err(invalid!("requested {m} eigenpairs of an order-{n} operator"));
    }
    if !(params.tol > 0.0) {
        return Err(invalid!("tolerance must be positive, got {}", params.tol));
    }
    Ok(())
}

/// The `m` algebraically smallest eigenpairs of `op`.
///
/// Runs [`block_lanczos`]; when that fails to converge and the operator is
/// small enough, falls back to a dense solve.
pub fn smallest_eigenpairs<A: SymOperator>(op: &A, m: usize, params: &EigenParams) -> Result<EigenPairs> {
    smallest_eigenpairs_from(op, m, params, None)
}

/// Like [`smallest_eigenpairs`], seeding the start block with `start`
/// vectors (for example, the solution at a nearby parameter value).
pub fn smallest_eigenpairs_from<A: SymOperator>(
    op: &A,
    m: usize,
    params: &EigenParams,
    start: Option<&[Vec<f64>]>,
) -> Result<EigenPairs> {
    match block_lanczos(op, m, params, start) {
        Err(Error::NoConvergence { .. }) if op.dim() <= params.dense_fallback_max_n => {
            dense_smallest(op, m)
        }
        other => other,
    }
}

/// Dense reference: materializes the operator and diagonalizes it fully.
pub fn dense_smallest<A: SymOperator>(op: &A, m: usize) -> Result<EigenPairs> {
    let n = op.dim();
    validate(n, m, &EigenParams::default())?;
    let a = op.to_dense();
    let (values, vecs) = dense_symmetric_eigen(&a, n)?;
    let mut vectors: Vec<Vec<f64>> = (0..m).map(|k| vecs.column(k)).collect();
    vectors.iter_mut().for_each(|v| fix_sign(v));
    let values: Vec<f64> = values[..m].to_vec();
    let residuals = residuals(op, &values, &vectors);
    Ok(EigenPairs {
        values,
        vectors,
        residuals,
        iterations: 0,
        method: EigenMethod::Dense,
    })
}

fn residuals<A: SymOperator>(op: &A, values: &[f64], vectors: &[Vec<f64>]) -> Vec<f64> {
    let n = op.dim();
    let mut av = vec![0.0; n];
    values
        .iter()
        .zip(vectors)
        .map(|(&l, v)| {
            op.apply(v, &mut av);
            let r: f64 = av.iter().zip(v).map(|(a, x)| (a - l * x) * (a - l * x)).sum();
            libm::sqrt(r)
        })
        .collect()
}

fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// Removes the components of `w` along the orthonormal `basis` (two passes
/// of classical Gram-Schmidt) and returns the remaining norm.
fn orthogonalize(w: &mut [f64], basis: &[Vec<f64>]) -> f64 {
    if basis.is_empty() {
        return norm(w);
    }
    for _ in 0..2 {
        let coeffs = par::map_range(basis.len(), |j| dot(&basis[j], w));
        par::for_each_chunk_mut(w, ELEM_CHUNK, |ci, chunk| {
            let off = ci * ELEM_CHUNK;
            for (j, &c) in coeffs.iter().enumerate() {
                let b = &basis[j][off..off + chunk.len()];
                for (x, &y) in chunk.iter_mut().zip(b) {
                    *x -= c * y;
                }
            }
        });
    }
    norm(w)
}

/// Appends `w` to `basis` after orthonormalizing it. Returns false when `w`
/// lies (numerically) in the span of `basis`.
fn push_orthonormal(mut w: Vec<f64>, basis: &mut Vec<Vec<f64>>) -> bool {
    let before = norm(&w);
    if before == 0.0 {
        return false;
    }
    let after = orthogonalize(&mut w, basis);
    if !(after > 1e-10 * before) {
        return false;
    }
    w.iter_mut().for_each(|x| *x /= after);
    basis.push(w);
    true
}

/// Appends a fresh random direction orthogonal to `basis`.
fn push_random(rng: &mut ChaCha8Rng, n: usize, basis: &mut Vec<Vec<f64>>) {
    while !push_orthonormal(random_vector(rng, n), basis) {}
}

fn combine(columns: &[Vec<f64>], coeffs: &[f64], dim: usize, k: usize, n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    par::for_each_chunk_mut(&mut out, ELEM_CHUNK, |ci, chunk| {
        let off = ci * ELEM_CHUNK;
        for (j, col) in columns.iter().enumerate() {
            let s = coeffs[j * dim + k];
            if s == 0.0 {
                continue;
            }
            let len = chunk.len();
            for (x, &y) in chunk.iter_mut().zip(&col[off..off + len]) {
                *x += s * y;
            }
        }
    });
    out
}

/// Restarted block Lanczos for the `m` smallest eigenpairs.
///
/// Each of at most `params.max_iter` cycles expands a block Krylov basis and
/// performs a Rayleigh-Ritz projection. Converged when every wanted Ritz pair
/// has residual at most `params.tol`; otherwise returns
/// [`Error::NoConvergence`] with the worst residual reached.
pub fn block_lanczos<A: SymOperator>(
    op: &A,
    m: usize,
    params: &EigenParams,
    start: Option<&[Vec<f64>]>,
) -> Result<EigenPairs> {
    let n = op.dim();
    validate(n, m, params)?;
    let block = n.min(m + (m / 2).max(6));
    let max_dim = n.min((4 * block).max(block + 40));
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);

    let mut x: Vec<Vec<f64>> = Vec::with_capacity(block);
    for v in start.unwrap_or(&[]).iter().take(block) {
        if v.len() == n {
            push_orthonormal(v.clone(), &mut x);
        }
    }
    while x.len() < block {
        push_random(&mut rng, n, &mut x);
    }

    let mut worst = f64::INFINITY;
    for cycle in 1..=params.max_iter {
        let mut basis = x;
        let mut images: Vec<Vec<f64>> = basis
            .iter()
            .map(|v| {
                let mut av = vec![0.0; n];
                op.apply(v, &mut av);
                av
            })
            .collect();

        let mut frontier = 0..basis.len();
        while basis.len() < max_dim {
            let start_len = basis.len();
            for c in frontier.clone() {
                if basis.len() >= max_dim {
                    break;
                }
                if !push_orthonormal(images[c].clone(), &mut basis) {
                    push_random(&mut rng, n, &mut basis);
                }
                let mut av = vec![0.0; n];
                op.apply(basis.last().expect("just pushed"), &mut av);
                images.push(av);
            }
            frontier = start_len..basis.len();
        }

        let dim = basis.len();
        let pairs: Vec<(usize, usize)> = (0..dim).flat_map(|i| (i..dim).map(move |j| (i, j))).collect();
        let entries = par::map_range(pairs.len(), |p| {
            let (i, j) = pairs[p];
            0.5 * (dot(&basis[i], &images[j]) + dot(&basis[j], &images[i]))
        });
        let mut h = vec![0.0; dim * dim];
        for (&(i, j), &v) in pairs.iter().zip(&entries) {
            h[i * dim + j] = v;
            h[j * dim + i] = v;
        }
        let (theta, s) = jacobi_eigen(&mut h, dim);

        let keep = block.min(dim);
        let ritz: Vec<Vec<f64>> = (0..keep).map(|k| combine(&basis, &s, dim, k, n)).collect();
        let ritz_images: Vec<Vec<f64>> = (0..m).map(|k| combine(&images, &s, dim, k, n)).collect();
        let res: Vec<f64> = (0..m)
            .map(|k| {
                let r: f64 = ritz_images[k]
                    .iter()
                    .zip(&ritz[k])
                    .map(|(a, y)| (a - theta[k] * y) * (a - theta[k] * y))
                    .sum();
                libm::sqrt(r)
            })
            .collect();
        worst = res.iter().copied().fold(0.0, f64::max);

        if worst <= params.tol || dim == n {
            let mut vectors: Vec<Vec<f64>> = ritz[..m].to_vec();
            for v in &mut vectors {
                let nv = norm(v);
                v.iter_mut().for_each(|x| *x /= nv);
                fix_sign(v);
            }
            let values = theta[..m].to_vec();
            let residuals = residuals(op, &values, &vectors);
            let achieved = residuals.iter().copied().fold(0.0, f64::max);
            if achieved <= params.tol {
                return Ok(EigenPairs {
                    values,
                    vectors,
                    residuals,
                    iterations: cycle,
                    method: EigenMethod::BlockLanczos,
                });
            }
            worst = achieved;
            if dim == n {
                break;
            }
        }

        x = Vec::with_capacity(block);
        for v in ritz {
            if !push_orthonormal(v, &mut x) {
                push_random(&mut rng, n, &mut x);
            }
        }
    }
    Err(Error::NoConvergence {
        iterations: params.max_iter,
        residual: worst,
    })
}
