//! End-to-end clustering: SRUSC, multiscale eigengap model selection, and
//! the baseline methods.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::kmeans::{kmeans, KMeansParams};
use crate::knn::{build_knn_graph, default_k, sq_dist};
use crate::linalg::{fix_sign, RowMatrix};
use crate::par;
use crate::raster::{HsiCube, LabelRaster};
use crate::spectral::{
    build_laplacian, embed_rows, smallest_eigenpairs_from, DenseSymMatrix, EigenMethod, EigenPairs, EigenParams,
    SymOperator, WindowDistances,
};
use crate::ultrametric::bottleneck_index_for;

pub const DEFAULT_GRID_SIZE: usize = 20;
pub const DEFAULT_K_MAX: usize = 10;
/// Largest image the dense Euclidean baseline accepts.
pub const EUCLIDEAN_SC_MAX_N: usize = 10_000;

pub const DEGENERATE_WINDOW: &str = "degenerate window: every pixel is its own neighborhood";

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SigmaChoice {
    Fixed(f64),
    /// Picked by the eigengap sweep over the grid.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClusterCount {
    Fixed(usize),
    /// Estimated by the multiscale eigengap, up to `k_max`.
    Estimate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SruscConfig {
    /// Neighbors per pixel in the spectral graph; `None` uses [`default_k`].
    pub knn_k: Option<usize>,
    /// Side length of the spatial window.
    pub radius: usize,
    pub sigma: SigmaChoice,
    pub clusters: ClusterCount,
    /// Scales for the sweep; `None` derives them from the data with
    /// [`default_sigma_grid`].
    pub sigma_grid: Option<Vec<f64>>,
    pub k_max: usize,
    pub eigen: EigenParams,
    pub seed: u64,
}

impl SruscConfig {
    pub fn new(radius: usize, clusters: ClusterCount, seed: u64) -> Self {
        Self {
            knn_k: None,
            radius,
            sigma: SigmaChoice::Auto,
            clusters,
            sigma_grid: None,
            k_max: DEFAULT_K_MAX,
            eigen: EigenParams::default(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.radius == 0 {
            return Err(invalid!("window side length must be at least 1"));
        }
        validate_selection(self.sigma, self.clusters, self.sigma_grid.as_deref(), self.k_max)
    }
}

fn validate_selection(sigma: SigmaChoice, clusters: ClusterCount, grid: Option<&[f64]>, k_max: usize) -> Result<()> {
    if let SigmaChoice::Fixed(s) = sigma {
        if !(s > 0.0 && s.is_finite()) {
            return Err(invalid!("sigma must be positive and finite, got {s}"));
        }
    }
    if let Some(g) = grid {
        validate_grid(g)?;
    }
    match clusters {
        ClusterCount::Fixed(0) => Err(invalid!("cluster count must be at least 1")),
        ClusterCount::Estimate if k_max < 2 => Err(invalid!("k_max must be at least 2, got {k_max}")),
        _ => Ok(()),
    }
}

/// A sigma grid must be nonempty, positive, finite and strictly increasing.
pub fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(invalid!("sigma grid is empty"));
    }
    if grid.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
        return Err(invalid!("sigma grid values must be positive and finite"));
    }
    if grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(invalid!("sigma grid must be strictly increasing"));
    }
    Ok(())
}

/// Source of wall-clock time, in seconds from an arbitrary origin.
pub trait Clock {
    fn now(&self) -> f64;
}

/// A clock that always reads zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn now(&self) -> f64 {
        0.0
    }
}

#[cfg(feature = "std")]
#[derive(Debug, Clone, Copy)]
pub struct StdClock(std::time::Instant);

#[cfg(feature = "std")]
impl Default for StdClock {
    fn default() -> Self {
        Self(std::time::Instant::now())
    }
}

#[cfg(feature = "std")]
impl Clock for StdClock {
    fn now(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenCurve {
    pub sigma: f64,
    /// Smallest Laplacian eigenvalues at this scale, ascending.
    pub eigenvalues: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Srusc,
    Km,
    PcaKm,
    EuclideanSc,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Srusc => "srusc",
            Method::Km => "km",
            Method::PcaKm => "pca_km",
            Method::EuclideanSc => "euclidean_sc",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub method: Method,
    pub labels: LabelRaster,
    pub k_used: usize,
    pub sigma_used: Option<f64>,
    /// The scales that were swept (empty for methods without a scale).
    pub sigma_grid: Vec<f64>,
    pub eigencurves: Vec<EigenCurve>,
    /// Seconds spent per stage, in execution order.
    pub timings: Vec<(String, f64)>,
    pub knn_k: Option<usize>,
    pub radius: Option<usize>,
    pub k_max: Option<usize>,
    pub eigen_tol: Option<f64>,
    pub seed: u64,
    pub kmeans_objective: f64,
    pub eigen_method: Option<EigenMethod>,
    pub warnings: Vec<String>,
}

/// Nearest-rank percentile of sorted data, `q` in `[0, 100]`.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let rank = libm::ceil(q / 100.0 * n as f64) as usize;
    sorted[rank.clamp(1, n) - 1]
}

/// Relative width below which a percentile range counts as a single value.
const DEGENERATE_RANGE: f64 = 1e-6;

/// `count` log-spaced scales between the 1st and 99th percentiles of the
/// finite, positive entries of `distances`. A degenerate range `[p, p]`
/// (equal up to rounding) is widened to `[p / 2, 2 p]`.
pub fn default_sigma_grid(distances: &[f64], count: usize) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(invalid!("sigma grid needs at least one point"));
    }
    let mut d: Vec<f64> = distances.iter().copied().filter(|x| x.is_finite() && *x > 0.0).collect();
    if d.is_empty() {
        return Err(invalid!("no finite positive distances to derive a sigma grid from"));
    }
    d.sort_unstable_by(f64::total_cmp);
    let (mut lo, mut hi) = (percentile(&d, 1.0), percentile(&d, 99.0));
    if hi <= lo * (1.0 + DEGENERATE_RANGE) {
        lo /= 2.0;
        hi *= 2.0;
    }
    if count == 1 {
        return Ok(vec![libm::sqrt(lo * hi)]);
    }
    let (a, b) = (libm::log(lo), libm::log(hi));
    let mut grid: Vec<f64> = (0..count)
        .map(|i| libm::exp(a + (b - a) * i as f64 / (count - 1) as f64))
        .collect();
    grid[0] = lo;
    grid[count - 1] = hi;
    grid.dedup();
    Ok(grid)
}

/// Joint eigengap maximization over scales and indices.
///
/// For every curve and every `1 <= k <= k_hi`, the gap is
/// `lambda_{k+1} - lambda_k` (1-based). `k_hi` is `k_max` when every curve
/// carries at least `k_max + 1` eigenvalues and `k_max - 1` otherwise.
/// Returns `(k, sigma)` of the largest gap; ties go to the smaller `k`, then
/// the smaller `sigma`.
pub fn estimate_k_multiscale(curves: &[EigenCurve], k_max: usize) -> Result<(usize, f64)> {
    if curves.is_empty() {
        return Err(invalid!("no eigenvalue curves to select from"));
    }
    if k_max < 2 {
        return Err(invalid!("k_max must be at least 2, got {k_max}"));
    }
    let shortest = curves.iter().map(|c| c.eigenvalues.len()).min().unwrap_or(0);
    if shortest < k_max {
        return Err(invalid!("every curve needs at least {k_max} eigenvalues, one has {shortest}"));
    }
    let k_hi = if shortest > k_max { k_max } else { k_max - 1 };
    let mut best: Option<(f64, usize, f64)> = None;
    for c in curves {
        for k in 1..=k_hi {
            let gap = c.eigenvalues[k] - c.eigenvalues[k - 1];
            if better(gap, k, c.sigma, best) {
                best = Some((gap, k, c.sigma));
            }
        }
    }
    let (_, k, sigma) = best.expect("at least one candidate");
    Ok((k, sigma))
}

fn better(gap: f64, k: usize, sigma: f64, best: Option<(f64, usize, f64)>) -> bool {
    match best {
        None => true,
        Some((g, bk, bs)) => gap > g || (gap == g && (k < bk || (k == bk && sigma < bs))),
    }
}

/// How the sweep picks its scale and cluster count.
#[derive(Debug, Clone, Copy)]
enum Selection {
    /// Single scale, known `k`.
    Fixed(usize),
    /// Known `k`, scale maximizing the gap after `lambda_k`.
    GapAt(usize),
    /// Joint maximization up to `k_max`.
    Estimate(usize),
}

struct SweepOutcome {
    curves: Vec<EigenCurve>,
    sigma: f64,
    k: usize,
    pairs: EigenPairs,
    build_secs: f64,
    solve_secs: f64,
    dense_fallback: bool,
}

/// Solves the Laplacian at every scale and keeps the eigenpairs of the
/// winning one. Each solve is warm-started from the previous scale's
/// eigenvectors.
fn sweep<A, F>(
    grid: &[f64],
    n: usize,
    selection: Selection,
    eigen: &EigenParams,
    clock: &dyn Clock,
    build: F,
) -> Result<SweepOutcome>
where
    A: SymOperator,
    F: Fn(f64) -> Result<A>,
{
    let m = match selection {
        Selection::Fixed(k) => k,
        Selection::GapAt(k) => k + 1,
        Selection::Estimate(k_max) => k_max + 1,
    };
    if m > n {
        return Err(invalid!("{m} eigenpairs requested from an image of {n} pixels"));
    }
    let mut curves = Vec::with_capacity(grid.len());
    let mut best: Option<(f64, usize, f64, EigenPairs)> = None;
    let mut prev: Option<Vec<Vec<f64>>> = None;
    let (mut build_secs, mut solve_secs) = (0.0, 0.0);
    let mut dense_fallback = false;
    for &sigma in grid {
        let t0 = clock.now();
        let op = build(sigma)?;
        let t1 = clock.now();
        let pairs = smallest_eigenpairs_from(&op, m, eigen, prev.as_deref())?;
        let t2 = clock.now();
        build_secs += t1 - t0;
        solve_secs += t2 - t1;
        dense_fallback |= pairs.method == EigenMethod::Dense;
        curves.push(EigenCurve {
            sigma,
            eigenvalues: pairs.values.clone(),
        });
        let ev = &pairs.values;
        let candidate = match selection {
            Selection::Fixed(k) => Some((0.0, k)),
            Selection::GapAt(k) => Some((ev[k] - ev[k - 1], k)),
            Selection::Estimate(k_max) => {
                let mut local: Option<(f64, usize)> = None;
                for k in 1..=k_max {
                    let gap = ev[k] - ev[k - 1];
                    if local.is_none_or(|(g, _)| gap > g) {
                        local = Some((gap, k));
                    }
                }
                local
            }
        };
        prev = Some(pairs.vectors.clone());
        if let Some((gap, k)) = candidate {
            if better(gap, k, sigma, best.as_ref().map(|b| (b.0, b.1, b.2))) {
                best = Some((gap, k, sigma, pairs));
            }
        }
    }
    let (_, k, sigma, pairs) = best.ok_or_else(|| invalid!("sigma grid is empty"))?;
    Ok(SweepOutcome {
        curves,
        sigma,
        k,
        pairs,
        build_secs,
        solve_secs,
        dense_fallback,
    })
}

fn selection_for(sigma: SigmaChoice, clusters: ClusterCount, k_max: usize) -> Selection {
    match (sigma, clusters) {
        (_, ClusterCount::Estimate) => Selection::Estimate(k_max),
        (SigmaChoice::Fixed(_), ClusterCount::Fixed(k)) => Selection::Fixed(k),
        (SigmaChoice::Auto, ClusterCount::Fixed(k)) => Selection::GapAt(k),
    }
}

fn resolve_grid(sigma: SigmaChoice, explicit: Option<&[f64]>, distances: impl FnOnce() -> Vec<f64>) -> Result<Vec<f64>> {
    match (sigma, explicit) {
        (SigmaChoice::Fixed(s), _) => Ok(vec![s]),
        (SigmaChoice::Auto, Some(g)) => Ok(g.to_vec()),
        (SigmaChoice::Auto, None) => default_sigma_grid(&distances(), DEFAULT_GRID_SIZE),
    }
}

/// Embeds, clusters and assembles the common parts of a spectral report.
fn finish_spectral(
    method: Method,
    cube: &HsiCube,
    outcome: SweepOutcome,
    grid: Vec<f64>,
    seed: u64,
    clock: &dyn Clock,
    mut timings: Vec<(String, f64)>,
    mut warnings: Vec<String>,
) -> Result<RunReport> {
    timings.push(("affinity_laplacian".to_string(), outcome.build_secs));
    timings.push(("eigensolve".to_string(), outcome.solve_secs));
    let k = outcome.k;
    let t0 = clock.now();
    let (features, zero_rows) = embed_rows(&outcome.pairs.vectors, k)?;
    let t1 = clock.now();
    let km = kmeans(&features, &KMeansParams::new(k, seed))?;
    let t2 = clock.now();
    timings.push(("embedding".to_string(), t1 - t0));
    timings.push(("kmeans".to_string(), t2 - t1));
    if zero_rows > 0 {
        warnings.push(alloc::format!("{zero_rows} pixels have an all-zero spectral embedding"));
    }
    if km.duplicate_seeds {
        warnings.push("k-means seeding repeated a centroid".to_string());
    }
    if outcome.dense_fallback {
        warnings.push("iterative eigensolver did not converge; used the dense solver".to_string());
    }
    Ok(RunReport {
        method,
        labels: LabelRaster::new(cube.rows(), cube.cols(), km.assignments)?,
        k_used: k,
        sigma_used: Some(outcome.sigma),
        sigma_grid: grid,
        eigencurves: outcome.curves,
        timings,
        knn_k: None,
        radius: None,
        k_max: None,
        eigen_tol: None,
        seed,
        kmeans_objective: km.objective,
        eigen_method: Some(outcome.pairs.method),
        warnings,
    })
}

/// SRUSC on `cube`, timed with the standard clock when available.
pub fn run_srusc(cube: &HsiCube, config: &SruscConfig) -> Result<RunReport> {
    #[cfg(feature = "std")]
    {
        run_srusc_with_clock(cube, config, &StdClock::default())
    }
    #[cfg(not(feature = "std"))]
    {
        run_srusc_with_clock(cube, config, &NoClock)
    }
}

pub fn run_srusc_with_clock(cube: &HsiCube, config: &SruscConfig, clock: &dyn Clock) -> Result<RunReport> {
    config.validate()?;
    let n = cube.n_pixels();
    let knn_k = match config.knn_k {
        Some(k) => k,
        None => default_k(n)?,
    };
    let mut timings = Vec::new();
    let mut warnings = Vec::new();

    let t0 = clock.now();
    let graph = build_knn_graph(cube.data(), cube.bands(), knn_k)?;
    let t1 = clock.now();
    let index = bottleneck_index_for(&graph);
    drop(graph);
    let t2 = clock.now();
    let window = WindowDistances::build(cube.dims(), &index, config.radius)?;
    drop(index);
    let t3 = clock.now();
    timings.push(("knn_graph".to_string(), t1 - t0));
    timings.push(("ultrametric_index".to_string(), t2 - t1));
    timings.push(("window_distances".to_string(), t3 - t2));

    if crate::spectral::half_width(config.radius) == 0 {
        warnings.push(DEGENERATE_WINDOW.to_string());
    }

    let grid = resolve_grid(config.sigma, config.sigma_grid.as_deref(), || window.positive_distances())?;
    let selection = selection_for(config.sigma, config.clusters, config.k_max);
    let outcome = sweep(&grid, n, selection, &config.eigen, clock, |sigma| {
        build_laplacian(&window.affinity(sigma)?)
    })?;
    let mut report = finish_spectral(Method::Srusc, cube, outcome, grid, config.seed, clock, timings, warnings)?;
    report.knn_k = Some(knn_k);
    report.radius = Some(config.radius);
    report.k_max = matches!(config.clusters, ClusterCount::Estimate).then_some(config.k_max);
    report.eigen_tol = Some(config.eigen.tol);
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineParams {
    pub seed: u64,
    /// Scale selection for the Euclidean spectral baseline.
    pub sigma: SigmaChoice,
    pub sigma_grid: Option<Vec<f64>>,
    pub eigen: EigenParams,
}

impl BaselineParams {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            sigma: SigmaChoice::Auto,
            sigma_grid: None,
            eigen: EigenParams::default(),
        }
    }
}

/// Mean-centered spectra projected onto their top `k` principal directions.
pub fn pca_project(cube: &HsiCube, k: usize) -> Result<RowMatrix> {
    let (n, d) = (cube.n_pixels(), cube.bands());
    if k == 0 || k > d.min(n) {
        return Err(invalid!("cannot keep {k} principal components of {n} points in {d} bands"));
    }
    let mut mean = vec![0.0f64; d];
    for p in 0..n {
        for (m, &x) in mean.iter_mut().zip(cube.spectrum(p)) {
            *m += f64::from(x);
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    let centered = nalgebra::DMatrix::from_fn(n, d, |i, j| f64::from(cube.spectrum(i)[j]) - mean[j]);
    let svd = nalgebra::linalg::SVD::new(centered.clone(), false, true);
    let v_t = svd
        .v_t
        .ok_or_else(|| Error::Internal("SVD did not return right singular vectors".to_string()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]).then(a.cmp(&b)));
    let mut out = RowMatrix::zeros(n, k);
    for (c, &idx) in order.iter().take(k).enumerate() {
        let mut dir: Vec<f64> = v_t.row(idx).iter().copied().collect();
        fix_sign(&mut dir);
        for i in 0..n {
            let proj: f64 = centered.row(i).iter().zip(&dir).map(|(x, v)| x * v).sum();
            out.set(i, c, proj);
        }
    }
    Ok(out)
}

/// Dense operator `I - D^{-1/2} W D^{-1/2}` with `W_ij = exp(-d_ij / sigma^2)`
/// for squared distances `d_ij`.
fn dense_laplacian(sq: &[f64], n: usize, sigma: f64) -> Result<DenseSymMatrix> {
    let s2 = sigma * sigma;
    let mut w: Vec<f64> = sq.iter().map(|&d| libm::exp(-d / s2)).collect();
    let inv_sqrt: Vec<f64> = par::map_range(n, |i| 1.0 / libm::sqrt(w[i * n..(i + 1) * n].iter().sum::<f64>()));
    par::for_each_chunk_mut(&mut w, n, |i, row| {
        for (j, v) in row.iter_mut().enumerate() {
            let scaled = *v * (inv_sqrt[i] * inv_sqrt[j]);
            *v = if i == j { 1.0 - scaled } else { -scaled };
        }
    });
    DenseSymMatrix::new(n, w)
}

/// One of the baseline methods with `k` clusters.
pub fn run_baseline(cube: &HsiCube, method: Method, k: usize, params: &BaselineParams) -> Result<RunReport> {
    #[cfg(feature = "std")]
    {
        run_baseline_with_clock(cube, method, k, params, &StdClock::default())
    }
    #[cfg(not(feature = "std"))]
    {
        run_baseline_with_clock(cube, method, k, params, &NoClock)
    }
}

pub fn run_baseline_with_clock(
    cube: &HsiCube,
    method: Method,
    k: usize,
    params: &BaselineParams,
    clock: &dyn Clock,
) -> Result<RunReport> {
    validate_selection(params.sigma, ClusterCount::Fixed(k), params.sigma_grid.as_deref(), 2)?;
    let n = cube.n_pixels();
    let kmeans_report = |features: RowMatrix, mut timings: Vec<(String, f64)>| -> Result<RunReport> {
        let t0 = clock.now();
        let km = kmeans(&features, &KMeansParams::new(k, params.seed))?;
        timings.push(("kmeans".to_string(), clock.now() - t0));
        let mut warnings = Vec::new();
        if km.duplicate_seeds {
            warnings.push("k-means seeding repeated a centroid".to_string());
        }
        Ok(RunReport {
            method,
            labels: LabelRaster::new(cube.rows(), cube.cols(), km.assignments)?,
            k_used: k,
            sigma_used: None,
            sigma_grid: Vec::new(),
            eigencurves: Vec::new(),
            timings,
            knn_k: None,
            radius: None,
            k_max: None,
            eigen_tol: None,
            seed: params.seed,
            kmeans_objective: km.objective,
            eigen_method: None,
            warnings,
        })
    };
    match method {
        Method::Km => kmeans_report(RowMatrix::from_f32(n, cube.bands(), cube.data())?, Vec::new()),
        Method::PcaKm => {
            let t0 = clock.now();
            let features = pca_project(cube, k)?;
            kmeans_report(features, vec![("pca".to_string(), clock.now() - t0)])
        }
        Method::EuclideanSc => {
            if n > EUCLIDEAN_SC_MAX_N {
                return Err(invalid!(
                    "dense Euclidean spectral clustering is limited to {EUCLIDEAN_SC_MAX_N} pixels, got {n}"
                ));
            }
            let t0 = clock.now();
            let mut sq = vec![0.0f64; n * n];
            par::for_each_chunk_mut(&mut sq, n, |i, row| {
                for (j, v) in row.iter_mut().enumerate() {
                    *v = sq_dist(cube.spectrum(i), cube.spectrum(j));
                }
            });
            let timings = vec![("pairwise_distances".to_string(), clock.now() - t0)];
            let grid = resolve_grid(params.sigma, params.sigma_grid.as_deref(), || {
                sq.iter().map(|&d| libm::sqrt(d)).collect()
            })?;
            let selection = selection_for(params.sigma, ClusterCount::Fixed(k), 0);
            let outcome = sweep(&grid, n, selection, &params.eigen, clock, |sigma| {
                dense_laplacian(&sq, n, sigma)
            })?;
            drop(sq);
            let mut report = finish_spectral(method, cube, outcome, grid, params.seed, clock, timings, Vec::new())?;
            report.eigen_tol = Some(params.eigen.tol);
            Ok(report)
        }
        Method::Srusc => Err(invalid!("SRUSC is not a baseline; use run_srusc")),
    }
}
