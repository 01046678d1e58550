//! Scaling benchmark for graph construction, ultrametric indexing and the
//! Laplacian.

use std::time::Instant;

use srusc_core::knn::{build_knn_graph, default_k};
use srusc_core::spectral::{build_laplacian, WindowDistances};
use srusc_core::synth::gen_three_cubes_scaled;
use srusc_core::ultrametric::{build_bottleneck_index, build_mst};

use crate::Error;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchConfig {
    /// Pixel counts; each must be a multiple of `3 * cols`.
    pub sizes: Vec<usize>,
    pub cols: usize,
    pub radius: usize,
    /// Each phase reports its minimum over this many repetitions.
    pub reps: usize,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            sizes: vec![1500, 3000, 6000],
            cols: 50,
            radius: 15,
            reps: 5,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub n: usize,
    pub rows: usize,
    pub cols: usize,
    pub radius: usize,
    pub knn_k: usize,
    pub knn_secs: f64,
    /// Minimum spanning tree, bottleneck index and window distances.
    pub upd_secs: f64,
    /// Affinity at one scale plus the normalized Laplacian.
    pub laplacian_secs: f64,
    pub nnz_w: usize,
}

impl BenchRow {
    pub fn upd_laplacian_secs(&self) -> f64 {
        self.upd_secs + self.laplacian_secs
    }

    pub fn nnz_bound(&self) -> usize {
        self.radius * self.radius * self.n
    }
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_unstable_by(f64::total_cmp);
    Some(v[v.len() / 2])
}

fn timed<T>(f: impl FnOnce() -> Result<T, Error>) -> Result<(f64, T), Error> {
    let t = Instant::now();
    let out = f()?;
    Ok((t.elapsed().as_secs_f64(), out))
}

/// Repetitions cycle through all sizes so that slow periods on a busy
/// machine hit every size alike; each phase keeps its fastest time.
pub fn bench_scaling(cfg: &BenchConfig) -> Result<Vec<BenchRow>, Error> {
    if cfg.cols < 2 || cfg.radius == 0 {
        return Err(Error::Argument("bench needs cols >= 2 and radius >= 1".into()));
    }
    if let Some(&n) = cfg.sizes.iter().find(|&&n| n == 0 || n % (3 * cfg.cols) != 0) {
        return Err(Error::Argument(format!("size {n} is not a positive multiple of 3 * {}", cfg.cols)));
    }
    let mut rows = Vec::with_capacity(cfg.sizes.len());
    let mut inputs = Vec::with_capacity(cfg.sizes.len());
    for &n in &cfg.sizes {
        let cube = gen_three_cubes_scaled(cfg.seed, n / (3 * cfg.cols), cfg.cols, 0)?.cube;
        let k = default_k(n)?;
        let (knn_secs, graph) = timed(|| Ok(build_knn_graph(cube.data(), cube.bands(), k)?))?;
        rows.push(BenchRow {
            n,
            rows: cube.rows(),
            cols: cube.cols(),
            radius: cfg.radius,
            knn_k: k,
            knn_secs,
            upd_secs: f64::INFINITY,
            laplacian_secs: f64::INFINITY,
            nnz_w: 0,
        });
        inputs.push((cube, graph, None));
    }
    for _ in 0..cfg.reps.max(1) {
        for (row, (cube, graph, sigma)) in rows.iter_mut().zip(&mut inputs) {
            let (upd, window) = timed(|| {
                let index = build_bottleneck_index(&build_mst(graph));
                Ok(WindowDistances::build(cube.dims(), &index, cfg.radius)?)
            })?;
            let sigma = *sigma.get_or_insert_with(|| median(window.positive_distances()).unwrap_or(1.0));
            let (lap, nnz) = timed(|| {
                let w = window.affinity(sigma)?;
                let nnz = w.nnz();
                build_laplacian(&w)?;
                Ok(nnz)
            })?;
            row.upd_secs = row.upd_secs.min(upd);
            row.laplacian_secs = row.laplacian_secs.min(lap);
            row.nnz_w = nnz;
        }
    }
    Ok(rows)
}

/// `t(size i+1) / t(size i)` of the UPD plus Laplacian phase.
pub fn time_ratios(rows: &[BenchRow]) -> Vec<f64> {
    rows.windows(2)
        .map(|w| w[1].upd_laplacian_secs() / w[0].upd_laplacian_secs())
        .collect()
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut s = String::from("n,rows,cols,radius,knn_k,knn_secs,upd_secs,laplacian_secs,upd_laplacian_secs,nnz_w,r2n,ratio\n");
    let ratios = time_ratios(rows);
    for (i, r) in rows.iter().enumerate() {
        let ratio = if i == 0 { String::new() } else { format!("{:.4}", ratios[i - 1]) };
        s.push_str(&format!(
            "{},{},{},{},{},{:.6},{:.6},{:.6},{:.6},{},{},{}\n",
            r.n,
            r.rows,
            r.cols,
            r.radius,
            r.knn_k,
            r.knn_secs,
            r.upd_secs,
            r.laplacian_secs,
            r.upd_laplacian_secs(),
            r.nnz_w,
            r.nnz_bound(),
            ratio
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use srusc_core::ultrametric::bottleneck_index_for;
    use srusc_core::HsiCube;

    #[test]
    fn small_bench_respects_bound() {
        let cfg = BenchConfig {
            sizes: vec![300, 600],
            cols: 20,
            radius: 5,
            reps: 1,
            seed: 3,
        };
        let rows = bench_scaling(&cfg).unwrap();
        assert_eq!(rows.len(), 2);
        for r in &rows {
            assert!(r.nnz_w <= r.nnz_bound());
            assert_eq!(r.rows * r.cols, r.n);
        }
        assert_eq!(time_ratios(&rows).len(), 1);
        assert_eq!(bench_csv(&rows).lines().count(), 3);
    }

    #[test]
    fn bad_sizes_rejected() {
        let cfg = BenchConfig {
            sizes: vec![301],
            cols: 20,
            ..BenchConfig::default()
        };
        assert!(matches!(bench_scaling(&cfg), Err(Error::Argument(_))));
    }

    #[test]
    fn doubling_radius_quadruples_nonzeros() {
        // a constant image: every in-window pair has distance 0, so all of
        // them are stored
        let cube = HsiCube::new(120, 120, 1, vec![1.0; 14_400]).unwrap();
        let graph = build_knn_graph(cube.data(), 1, 10).unwrap();
        let index = bottleneck_index_for(&graph);
        let nnz = |r| {
            WindowDistances::build(cube.dims(), &index, r)
                .unwrap()
                .affinity(1.0)
                .unwrap()
                .nnz()
        };
        let (a, b) = (nnz(9), nnz(18));
        let ratio = b as f64 / a as f64;
        assert!((3.0..=4.5).contains(&ratio), "ratio {ratio}");
        assert!(b <= 18 * 18 * 14_400);
    }
}
