//! Seeded synthetic hyperspectral cubes with ground truth.
//!
//! * Four spheres: four circles of radius 1.7 in the plane, zero-padded to
//!   200 bands. The three circles centered on `x = 1` form class 1, the
//!   circle centered at `(5, 5)` is class 2. Each circle fills a 10x50 block.
//! * Three cubes: three copies of the 10x10x10 lattice on `[0, 1]^3`, each
//!   mapped into the first 199 bands by its own random orthonormal frame and
//!   offset by 0, 0.1 and 0.2 in band 200. Each cube fills a 20x50 block.
//!   Spectra of randomly chosen pixels in the middles of cubes 1 and 3 are
//!   then exchanged, while the labels stay in place.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{invalid, Result};
use crate::raster::{HsiCube, LabelRaster, PixelCoord};

pub const BANDS: usize = 200;
pub const SPHERE_RADIUS: f64 = 1.7;
pub const SPHERE_CENTERS: [(f64, f64); 4] = [(1.0, 3.0), (1.0, 5.0), (1.0, 7.0), (5.0, 5.0)];
pub const POINTS_PER_SPHERE: usize = 500;
pub const CUBE_GRID: usize = 10;
pub const CUBE_OFFSETS: [f64; 3] = [0.0, 0.1, 0.2];
pub const DEFAULT_SWAP_COUNT: usize = 30;

const BLOCK_COLS: usize = 50;
const SPHERE_BLOCK_ROWS: usize = 10;
const CUBE_BLOCK_ROWS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dataset {
    FourSpheres,
    ThreeCubes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SynthSpec {
    pub dataset: Dataset,
    pub seed: u64,
    /// Only used by [`Dataset::ThreeCubes`].
    pub swap_count: usize,
}

/// A generated cube with its ground truth and a record of the pixel swaps.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    pub spec: SynthSpec,
    pub cube: HsiCube,
    pub labels: LabelRaster,
    /// Exchanged pixel pairs (cube 1 position, cube 3 position), in draw order.
    pub swaps: Vec<(PixelCoord, PixelCoord)>,
}

pub fn generate(spec: SynthSpec) -> Result<SynthData> {
    match spec.dataset {
        Dataset::FourSpheres => gen_four_spheres(spec.seed),
        Dataset::ThreeCubes => gen_three_cubes(spec.seed, spec.swap_count),
    }
}

/// Four spheres, 40x50x200, two classes.
pub fn gen_four_spheres(seed: u64) -> Result<SynthData> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = SPHERE_CENTERS.len() * POINTS_PER_SPHERE;
    let mut data = vec![0.0f32; n * BANDS];
    let mut labels = Vec::with_capacity(n);
    for (s, &(cx, cy)) in SPHERE_CENTERS.iter().enumerate() {
        for t in 0..POINTS_PER_SPHERE {
            let angle = rng.random_range(0.0..core::f64::consts::TAU);
            let p = s * POINTS_PER_SPHERE + t;
            data[p * BANDS] = (cx + SPHERE_RADIUS * libm::cos(angle)) as f32;
            data[p * BANDS + 1] = (cy + SPHERE_RADIUS * libm::sin(angle)) as f32;
            labels.push(if s < 3 { 1 } else { 2 });
        }
    }
    let rows = SPHERE_CENTERS.len() * SPHERE_BLOCK_ROWS;
    Ok(SynthData {
        spec: SynthSpec {
            dataset: Dataset::FourSpheres,
            seed,
            swap_count: 0,
        },
        cube: HsiCube::new(rows, BLOCK_COLS, BANDS, data)?,
        labels: LabelRaster::new(rows, BLOCK_COLS, labels)?,
        swaps: Vec::new(),
    })
}

/// Orthonormal `dim x k` frame (row-major) from the QR factorization of a
/// Gaussian matrix, computed by modified Gram-Schmidt.
pub fn random_orthonormal_frame<R: Rng>(rng: &mut R, dim: usize, k: usize) -> Vec<f64> {
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(k);
    while cols.len() < k {
        let mut v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        for c in &cols {
            let d = crate::linalg::dot(&v, c);
            v.iter_mut().zip(c).for_each(|(x, y)| *x -= d * y);
        }
        let nv = crate::linalg::norm(&v);
        if nv > 1e-8 {
            v.iter_mut().for_each(|x| *x /= nv);
            cols.push(v);
        }
    }
    let mut frame = vec![0.0; dim * k];
    for (j, c) in cols.iter().enumerate() {
        for (i, &x) in c.iter().enumerate() {
            frame[i * k + j] = x;
        }
    }
    frame
}

/// The 10x10x10 lattice on `[0, 1]^3` (endpoints included), lexicographic.
pub fn unit_lattice() -> Vec<[f64; 3]> {
    let step = 1.0 / (CUBE_GRID - 1) as f64;
    let mut pts = Vec::with_capacity(CUBE_GRID.pow(3));
    for a in 0..CUBE_GRID {
        for b in 0..CUBE_GRID {
            for c in 0..CUBE_GRID {
                pts.push([a as f64 * step, b as f64 * step, c as f64 * step]);
            }
        }
    }
    pts
}

/// Maps 3-D points into `BANDS` dimensions: the first `BANDS - 1`
/// coordinates come from `frame` (row-major `(BANDS - 1) x 3`), the last is
/// `offset`.
pub fn embed_points(points: &[[f64; 3]], frame: &[f64], offset: f64) -> Vec<f64> {
    let d = BANDS - 1;
    let mut out = vec![0.0; points.len() * BANDS];
    for (p, x) in points.iter().enumerate() {
        let row = &mut out[p * BANDS..(p + 1) * BANDS];
        for i in 0..d {
            row[i] = frame[i * 3] * x[0] + frame[i * 3 + 1] * x[1] + frame[i * 3 + 2] * x[2];
        }
        row[d] = offset;
    }
    out
}

/// Central `rows/2 x cols/2` subwindow of a block, as (row range, col range).
fn middle(block_row0: usize, block_rows: usize, cols: usize) -> (usize, usize, usize, usize) {
    let (mr, mc) = (block_rows / 2, cols / 2);
    let r0 = block_row0 + (block_rows - mr) / 2;
    let c0 = (cols - mc) / 2;
    (r0, mr, c0, mc)
}

fn cubes_from_points(
    rng: &mut ChaCha8Rng,
    blocks: [Vec<[f64; 3]>; 3],
    block_rows: usize,
    cols: usize,
    swap_count: usize,
    seed: u64,
) -> Result<SynthData> {
    let per_block = block_rows * cols;
    let (_, mr, _, mc) = middle(0, block_rows, cols);
    if swap_count > mr * mc {
        return Err(invalid!(
            "swap count {swap_count} exceeds the {} pixels in a cube's middle",
            mr * mc
        ));
    }
    let n = 3 * per_block;
    let mut data = vec![0.0f32; n * BANDS];
    let mut labels = Vec::with_capacity(n);
    for (c, pts) in blocks.iter().enumerate() {
        debug_assert_eq!(pts.len(), per_block);
        let frame = random_orthonormal_frame(rng, BANDS - 1, 3);
        let embedded = embed_points(pts, &frame, CUBE_OFFSETS[c]);
        for (dst, &v) in data[c * per_block * BANDS..(c + 1) * per_block * BANDS]
            .iter_mut()
            .zip(&embedded)
        {
            *dst = v as f32;
        }
        labels.extend(core::iter::repeat_n(c as u32 + 1, per_block));
    }

    let pick = |rng: &mut ChaCha8Rng, block: usize| -> Vec<PixelCoord> {
        let (r0, mr, c0, mc) = middle(block * block_rows, block_rows, cols);
        sample(rng, mr * mc, swap_count)
            .into_iter()
            .map(|k| PixelCoord::new(r0 + k / mc, c0 + k % mc))
            .collect()
    };
    let first = pick(rng, 0);
    let third = pick(rng, 2);
    let swaps: Vec<(PixelCoord, PixelCoord)> = first.into_iter().zip(third).collect();
    for &(a, b) in &swaps {
        let (ia, ib) = (a.row * cols + a.col, b.row * cols + b.col);
        for band in 0..BANDS {
            data.swap(ia * BANDS + band, ib * BANDS + band);
        }
    }
    let rows = 3 * block_rows;
    Ok(SynthData {
        spec: SynthSpec {
            dataset: Dataset::ThreeCubes,
            seed,
            swap_count,
        },
        cube: HsiCube::new(rows, cols, BANDS, data)?,
        labels: LabelRaster::new(rows, cols, labels)?,
        swaps,
    })
}

/// Three cubes, 60x50x200, three classes, `swap_count` exchanged pixel pairs.
pub fn gen_three_cubes(seed: u64, swap_count: usize) -> Result<SynthData> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lattice = unit_lattice();
    cubes_from_points(
        &mut rng,
        [lattice.clone(), lattice.clone(), lattice],
        CUBE_BLOCK_ROWS,
        BLOCK_COLS,
        swap_count,
        seed,
    )
}

/// Size-scalable three-cubes variant for benchmarks: each cube is a
/// `block_rows x cols` block of points drawn uniformly from `[0, 1]^3`
/// (a lattice cannot hit arbitrary sizes).
pub fn gen_three_cubes_scaled(seed: u64, block_rows: usize, cols: usize, swap_count: usize) -> Result<SynthData> {
    if block_rows < 2 || cols < 2 {
        return Err(invalid!("blocks must be at least 2x2"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng| -> Vec<[f64; 3]> {
        (0..block_rows * cols)
            .map(|_| [rng.random(), rng.random(), rng.random()])
            .collect()
    };
    let blocks = [draw(&mut rng), draw(&mut rng), draw(&mut rng)];
    cubes_from_points(&mut rng, blocks, block_rows, cols, swap_count, seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_spheres_layout() {
        let d = gen_four_spheres(7).unwrap();
        assert_eq!((d.cube.rows(), d.cube.cols(), d.cube.bands()), (40, 50, 200));
        let ones = d.labels.labels().iter().filter(|&&l| l == 1).count();
        assert_eq!((ones, d.labels.labels().len() - ones), (1500, 500));
        for p in 0..2000 {
            let s = d.cube.spectrum(p);
            let (cx, cy) = SPHERE_CENTERS[p / 500];
            let r = ((f64::from(s[0]) - cx).powi(2) + (f64::from(s[1]) - cy).powi(2)).sqrt();
            assert!((r - SPHERE_RADIUS).abs() < 1e-5);
            assert!(s[2..].iter().all(|&v| v == 0.0));
            assert_eq!(d.labels.labels()[p], if p < 1500 { 1 } else { 2 });
        }
    }

    #[test]
    fn four_spheres_cluster_separation() {
        let d = gen_four_spheres(3).unwrap();
        let mut min = f64::INFINITY;
        for i in 0..1500 {
            for j in 1500..2000 {
                min = min.min(crate::knn::sq_dist(d.cube.spectrum(i), d.cube.spectrum(j)).sqrt());
            }
        }
        assert!(min >= 0.6 - 1e-5, "min inter-cluster distance {min}");
    }

    #[test]
    fn three_cubes_layout_and_offsets() {
        let d = gen_three_cubes(5, 0).unwrap();
        assert_eq!((d.cube.rows(), d.cube.cols(), d.cube.bands()), (60, 50, 200));
        for p in 0..3000 {
            assert_eq!(d.labels.labels()[p] as usize, p / 1000 + 1);
            let last = d.cube.spectrum(p)[199];
            assert_eq!(last, CUBE_OFFSETS[p / 1000] as f32);
        }
        assert!(d.swaps.is_empty());
    }

    #[test]
    fn rotation_preserves_lattice_distances() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let lattice = unit_lattice();
        let frame = random_orthonormal_frame(&mut rng, BANDS - 1, 3);
        let emb = embed_points(&lattice, &frame, 0.0);
        for i in (0..1000).step_by(7) {
            for j in (0..1000).step_by(13) {
                let d3: f64 = (0..3).map(|c| (lattice[i][c] - lattice[j][c]).powi(2)).sum();
                let dn: f64 = (0..BANDS)
                    .map(|c| (emb[i * BANDS + c] - emb[j * BANDS + c]).powi(2))
                    .sum();
                assert!((d3.sqrt() - dn.sqrt()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn swaps_stay_in_the_middles() {
        let d = gen_three_cubes(11, 30).unwrap();
        let plain = gen_three_cubes(11, 0).unwrap();
        assert_eq!(d.swaps.len(), 30);
        for &(a, b) in &d.swaps {
            assert!((5..15).contains(&a.row) && (12..37).contains(&a.col));
            assert!((45..55).contains(&b.row) && (12..37).contains(&b.col));
            // first cube's middle now carries a third-cube spectrum
            assert_eq!(d.cube.spectrum(a.row * 50 + a.col)[199], 0.2);
            assert_eq!(d.cube.spectrum(b.row * 50 + b.col)[199], 0.0);
        }
        let changed = (0..3000)
            .filter(|&p| d.cube.spectrum(p) != plain.cube.spectrum(p))
            .count();
        assert_eq!(changed, 60);
        assert!(gen_three_cubes(1, 251).is_err());
        assert!(gen_three_cubes(1, 250).is_ok());
    }

    #[test]
    fn seeds_control_output() {
        assert_eq!(gen_three_cubes(4, 30).unwrap(), gen_three_cubes(4, 30).unwrap());
        assert_ne!(gen_three_cubes(4, 30).unwrap().cube, gen_three_cubes(5, 30).unwrap().cube);
        assert_eq!(gen_four_spheres(4).unwrap(), gen_four_spheres(4).unwrap());
    }

    #[test]
    fn scaled_variant_dims() {
        let d = gen_three_cubes_scaled(1, 8, 25, 10).unwrap();
        assert_eq!((d.cube.rows(), d.cube.cols()), (24, 25));
        assert_eq!(d.swaps.len(), 10);
    }
}
