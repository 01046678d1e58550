//! K-means with k-means++ seeding, Lloyd iterations and seeded restarts.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{invalid, Error, Result};
use crate::linalg::{squared_distance, RowMatrix};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansParams {
    pub k: usize,
    pub restarts: usize,
    pub max_iter: usize,
    pub seed: u64,
    /// Stop once the relative objective decrease falls below this.
    pub rel_tol: f64,
}

impl KMeansParams {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            restarts: 10,
            max_iter: 300,
            seed,
            rel_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    /// Cluster of each point, numbered `1..=k`.
    pub assignments: Vec<u32>,
    pub centroids: RowMatrix,
    /// Sum of squared distances to the assigned centroids.
    pub objective: f64,
    pub iterations: usize,
    /// Objective after every Lloyd iteration of the winning restart.
    pub trace: Vec<f64>,
    /// Objective of every restart, in restart order.
    pub restart_objectives: Vec<f64>,
    /// Seeding had to repeat a centroid because the points ran out of
    /// distinct positions.
    pub duplicate_seeds: bool,
}

/// Outcome of k-means++ seeding.
#[derive(Debug, Clone, PartialEq)]
pub struct Seeding {
    pub centroids: RowMatrix,
    /// Index of the point chosen for each centroid.
    pub chosen: Vec<usize>,
    pub duplicates: bool,
}

/// Deterministic generator for restart `stream` of a run seeded with `seed`.
pub fn restart_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// k-means++ seeding: the first centroid is uniform, each later one is drawn
/// with probability proportional to its squared distance to the nearest
/// centroid chosen so far.
pub fn kmeans_pp_init<R: Rng>(points: &RowMatrix, k: usize, rng: &mut R) -> Result<Seeding> {
    let n = points.rows();
    if k == 0 || k > n {
        return Err(invalid!("cannot seed {k} centroids from {n} points"));
    }
    let mut chosen = Vec::with_capacity(k);
    let mut duplicates = false;
    chosen.push(rng.random_range(0..n));
    let mut nearest: Vec<f64> = (0..n)
        .map(|i| squared_distance(points.row(i), points.row(chosen[0])))
        .collect();
    while chosen.len() < k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &d) in nearest.iter().enumerate() {
                acc += d;
                if d > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            // rounding can leave target >= acc; fall back to the last
            // candidate with positive mass
            pick.unwrap_or_else(|| nearest.iter().rposition(|&d| d > 0.0).expect("total > 0"))
        } else {
            duplicates = true;
            rng.random_range(0..n)
        };
        chosen.push(pick);
        for (i, d) in nearest.iter_mut().enumerate() {
            *d = d.min(squared_distance(points.row(i), points.row(pick)));
        }
    }
    let mut centroids = RowMatrix::zeros(k, points.cols());
    for (c, &i) in chosen.iter().enumerate() {
        centroids.row_mut(c).copy_from_slice(points.row(i));
    }
    Ok(Seeding {
        centroids,
        chosen,
        duplicates,
    })
}

struct Lloyd {
    assignments: Vec<u32>,
    centroids: RowMatrix,
    objective: f64,
    trace: Vec<f64>,
}

fn nearest_centroid(x: &[f64], centroids: &RowMatrix) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for c in 0..centroids.rows() {
        let d = squared_distance(x, centroids.row(c));
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn update_centroids(points: &RowMatrix, assign: &[u32], k: usize) -> (RowMatrix, Vec<usize>) {
    let d = points.cols();
    let mut sums = RowMatrix::zeros(k, d);
    let mut counts = vec![0usize; k];
    for (i, &a) in assign.iter().enumerate() {
        let a = a as usize;
        counts[a] += 1;
        for (s, &x) in sums.row_mut(a).iter_mut().zip(points.row(i)) {
            *s += x;
        }
    }
    for (c, &cnt) in counts.iter().enumerate() {
        if cnt > 0 {
            sums.row_mut(c).iter_mut().for_each(|s| *s /= cnt as f64);
        }
    }
    (sums, counts)
}

/// Moves points into empty clusters: each empty cluster takes the point
/// farthest from its centroid among clusters with at least two members.
fn repair_empty(points: &RowMatrix, assign: &mut [u32], dist: &mut [f64], centroids: &mut RowMatrix) {
    let k = centroids.rows();
    let mut counts = vec![0usize; k];
    for &a in assign.iter() {
        counts[a as usize] += 1;
    }
    for empty in 0..k {
        if counts[empty] > 0 {
            continue;
        }
        let mut best: Option<usize> = None;
        for i in 0..assign.len() {
            if counts[assign[i] as usize] >= 2 && best.is_none_or(|b| dist[i] > dist[b]) {
                best = Some(i);
            }
        }
        let i = best.expect("n >= k leaves a cluster with two members");
        counts[assign[i] as usize] -= 1;
        counts[empty] = 1;
        assign[i] = empty as u32;
        dist[i] = 0.0;
        centroids.row_mut(empty).copy_from_slice(points.row(i));
    }
}

fn lloyd(points: &RowMatrix, init: RowMatrix, params: &KMeansParams) -> Lloyd {
    let n = points.rows();
    let k = init.rows();
    let mut centroids = init;
    let mut assignments = vec![0u32; n];
    let mut trace: Vec<f64> = Vec::new();
    for _ in 0..params.max_iter.max(1) {
        let nearest = par::map_range(n, |i| nearest_centroid(points.row(i), &centroids));
        let mut assign: Vec<u32> = nearest.iter().map(|&(c, _)| c as u32).collect();
        let mut dist: Vec<f64> = nearest.iter().map(|&(_, d)| d).collect();
        repair_empty(points, &mut assign, &mut dist, &mut centroids);
        let (updated, _) = update_centroids(points, &assign, k);
        centroids = updated;
        let objective: f64 = (0..n)
            .map(|i| squared_distance(points.row(i), centroids.row(assign[i] as usize)))
            .sum();
        let unchanged = !trace.is_empty() && assign == assignments;
        assignments = assign;
        let prev = trace.last().copied();
        trace.push(objective);
        let converged = match prev {
            Some(p) => unchanged || objective == 0.0 || (p - objective) <= params.rel_tol * p,
            None => objective == 0.0,
        };
        if converged {
            break;
        }
    }
    Lloyd {
        assignments,
        centroids,
        objective: *trace.last().expect("at least one iteration"),
        trace,
    }
}

/// Best of `params.restarts` seeded k-means runs.
///
/// Restarts draw from independent ChaCha streams of `params.seed` and may
/// run in parallel; the lowest objective wins, earlier restarts on ties.
pub fn kmeans(points: &RowMatrix, params: &KMeansParams) -> Result<KMeansResult> {
    let n = points.rows();
    let k = params.k;
    if k == 0 || n < k {
        return Err(invalid!("k-means needs 1 <= k <= n, got k={k}, n={n}"));
    }
    if params.restarts == 0 {
        return Err(invalid!("at least one restart is required"));
    }
    if let Some(pos) = points.as_slice().iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite(pos));
    }
    let runs = par::map_range(params.restarts, |r| {
        let mut rng = restart_rng(params.seed, r as u64);
        let seeding = kmeans_pp_init(points, k, &mut rng).expect("validated above");
        (lloyd(points, seeding.centroids, params), seeding.duplicates)
    });
    let restart_objectives: Vec<f64> = runs.iter().map(|(l, _)| l.objective).collect();
    let best = (0..runs.len())
        .min_by(|&a, &b| restart_objectives[a].total_cmp(&restart_objectives[b]).then(a.cmp(&b)))
        .expect("restarts >= 1");
    let (run, duplicates) = runs.into_iter().nth(best).expect("index in range");
    Ok(KMeansResult {
        assignments: run.assignments.iter().map(|&a| a + 1).collect(),
        centroids: run.centroids,
        objective: run.objective,
        iterations: run.trace.len(),
        trace: run.trace,
        restart_objectives,
        duplicate_seeds: duplicates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::collections::BTreeSet;

    fn one_d(values: &[f64]) -> RowMatrix {
        RowMatrix::from_vec(values.len(), 1, values.to_vec()).unwrap()
    }

    fn partition(assign: &[u32]) -> BTreeSet<Vec<usize>> {
        let mut groups: alloc::collections::BTreeMap<u32, Vec<usize>> = Default::default();
        for (i, &a) in assign.iter().enumerate() {
            groups.entry(a).or_default().push(i);
        }
        groups.into_values().collect()
    }

    #[test]
    fn k_equals_n_gives_zero_objective() {
        let pts = one_d(&[0.0, 2.0, 5.0, 9.0]);
        let res = kmeans(&pts, &KMeansParams::new(4, 1)).unwrap();
        assert_eq!(res.objective, 0.0);
        assert_eq!(partition(&res.assignments).len(), 4);
    }

    #[test]
    fn two_blobs() {
        // enumerated: the only competitive 2-partition is {0, 0.1} | {10, 10.1}
        let pts = one_d(&[0.0, 0.1, 10.0, 10.1]);
        let res = kmeans(&pts, &KMeansParams::new(2, 3)).unwrap();
        let mut c = [res.centroids.get(0, 0), res.centroids.get(1, 0)];
        c.sort_by(f64::total_cmp);
        assert!((c[0] - 0.05).abs() < 1e-12 && (c[1] - 10.05).abs() < 1e-12);
        assert!((res.objective - 0.01).abs() < 1e-12);
    }

    #[test]
    fn objective_trace_is_non_increasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pts = RowMatrix::from_vec(500, 3, (0..1500).map(|_| rng.random::<f64>()).collect()).unwrap();
        let res = kmeans(&pts, &KMeansParams::new(7, 9)).unwrap();
        for w in res.trace.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
        assert!(res.restart_objectives.iter().all(|&o| res.objective <= o));
        let mut counts = [0usize; 7];
        res.assignments.iter().for_each(|&a| counts[a as usize - 1] += 1);
        assert!(counts.iter().all(|&c| c > 0));
    }

    #[test]
    fn seeding_examples() {
        let mut rng = restart_rng(1, 0);
        let s = kmeans_pp_init(&one_d(&[4.0, 1.0, 7.0]), 1, &mut rng).unwrap();
        assert_eq!(s.chosen.len(), 1);
        let s = kmeans_pp_init(&one_d(&[0.0, 1.0]), 2, &mut rng).unwrap();
        let set: BTreeSet<_> = s.chosen.iter().copied().collect();
        assert_eq!(set, [0, 1].into_iter().collect());
    }

    #[test]
    fn seeding_follows_squared_distance_law() {
        // On {0, 0, 10}: P(first = 10) = 1/3; if the first seed is a 0 the
        // second is 10 with probability 1, otherwise a 0 with probability 1.
        let pts = one_d(&[0.0, 0.0, 10.0]);
        let runs = 10_000;
        let (mut first_ten, mut second_ten, mut contains_ten) = (0, 0, 0);
        for r in 0..runs {
            let mut rng = restart_rng(77, r);
            let s = kmeans_pp_init(&pts, 2, &mut rng).unwrap();
            let vals: Vec<f64> = s.chosen.iter().map(|&i| pts.get(i, 0)).collect();
            first_ten += (vals[0] == 10.0) as usize;
            second_ten += (vals[1] == 10.0) as usize;
            contains_ten += vals.contains(&10.0) as usize;
            assert_ne!(vals[0], vals[1]);
        }
        assert_eq!(contains_ten, runs as usize);
        assert!((first_ten as f64 / runs as f64 - 1.0 / 3.0).abs() < 0.02);
        assert!((second_ten as f64 / runs as f64 - 2.0 / 3.0).abs() < 0.02);
    }

    #[test]
    fn identical_points_flag_duplicates() {
        let pts = one_d(&[1.0; 5]);
        let res = kmeans(&pts, &KMeansParams::new(3, 0)).unwrap();
        assert!(res.duplicate_seeds);
        assert_eq!(res.objective, 0.0);
        let mut counts = [0usize; 3];
        res.assignments.iter().for_each(|&a| counts[a as usize - 1] += 1);
        assert!(counts.iter().all(|&c| c > 0));
    }

    #[test]
    fn errors() {
        assert!(kmeans(&one_d(&[1.0]), &KMeansParams::new(2, 0)).is_err());
        assert!(kmeans(&one_d(&[1.0, f64::NAN]), &KMeansParams::new(1, 0)).is_err());
    }

    #[test]
    fn relabeling_does_not_change_partition() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut v: Vec<f64> = (0..60).map(|i| (i / 20) as f64 * 10.0 + rng.random::<f64>()).collect();
        let pts = one_d(&v);
        let a = kmeans(&pts, &KMeansParams::new(3, 5)).unwrap();
        v.iter_mut().for_each(|x| *x = -*x);
        let b = kmeans(&one_d(&v), &KMeansParams::new(3, 5)).unwrap();
        assert_eq!(partition(&a.assignments), partition(&b.assignments));
    }
}
