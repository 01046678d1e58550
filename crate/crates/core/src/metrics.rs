//! Label alignment and accuracy scores against partial ground truth.
//!
//! Predicted cluster ids are arbitrary, so they are first matched to ground
//! truth classes by a maximum-weight assignment on the confusion counts
//! (Hungarian algorithm). Only pixels with a non-zero ground-truth label are
//! scored.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{invalid, Error, Result};
use crate::raster::LabelRaster;

/// Solves the square assignment problem `min sum cost[i][perm[i]]`.
///
/// `cost` is row-major `n x n`. Returns the column assigned to each row.
/// O(n^3) shortest augmenting path with potentials.
pub fn hungarian_min(cost: &[i64], n: usize) -> Vec<usize> {
    debug_assert_eq!(cost.len(), n * n);
    const INF: i64 = i64::MAX / 4;
    // 1-based potentials; column 0 is a virtual source
    let mut u = vec![0i64; n + 1];
    let mut v = vec![0i64; n + 1];
    let mut row_of = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        row_of[0] = i;
        let mut j0 = 0;
        let mut minv = vec![INF; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let mut delta = INF;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if row_of[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        if row_of[j] > 0 {
            assignment[row_of[j] - 1] = j - 1;
        }
    }
    assignment
}

/// Counts of (ground-truth class, predicted cluster) over labeled pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    gt_classes: usize,
    pred_clusters: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    /// `counts` is row-major `gt_classes x pred_clusters`.
    pub fn from_counts(gt_classes: usize, pred_clusters: usize, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != gt_classes * pred_clusters {
            return Err(Error::DimensionMismatch(alloc::format!(
                "{gt_classes}x{pred_clusters} confusion matrix needs {} counts",
                gt_classes * pred_clusters
            )));
        }
        Ok(Self {
            gt_classes,
            pred_clusters,
            counts,
        })
    }

    /// Tallies pixels with `gt != 0`. Predicted labels must be `>= 1`.
    pub fn tally(pred: &LabelRaster, gt: &LabelRaster) -> Result<Self> {
        if pred.dims() != gt.dims() {
            return Err(Error::DimensionMismatch(alloc::format!(
                "prediction is {}x{}, ground truth is {}x{}",
                pred.rows(),
                pred.cols(),
                gt.rows(),
                gt.cols()
            )));
        }
        let g = gt.max_label() as usize;
        let p = pred.max_label() as usize;
        let mut counts = vec![0u64; g * p];
        for (&pl, &gl) in pred.labels().iter().zip(gt.labels()) {
            if gl == 0 {
                continue;
            }
            if pl == 0 {
                return Err(invalid!("predicted labels must be >= 1 on labeled pixels"));
            }
            counts[(gl as usize - 1) * p + (pl as usize - 1)] += 1;
        }
        Self::from_counts(g, p, counts)
    }

    pub fn gt_classes(&self) -> usize {
        self.gt_classes
    }

    pub fn pred_clusters(&self) -> usize {
        self.pred_clusters
    }

    /// Count for ground-truth class `g` and predicted cluster `p` (0-based).
    pub fn get(&self, g: usize, p: usize) -> u64 {
        self.counts[g * self.pred_clusters + p]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Rows of counts, one per ground-truth class.
    pub fn rows(&self) -> Vec<Vec<u64>> {
        self.counts
            .chunks(self.pred_clusters.max(1))
            .take(self.gt_classes)
            .map(<[u64]>::to_vec)
            .collect()
    }
}

/// Maps every predicted cluster (0-based) to a ground-truth class (0-based),
/// or `None` when the cluster is left unmatched.
pub fn align(confusion: &ConfusionMatrix) -> Vec<Option<usize>> {
    let (g, p) = (confusion.gt_classes, confusion.pred_clusters);
    let s = g.max(p);
    if s == 0 {
        return Vec::new();
    }
    // maximize matched counts == minimize negated counts; padding costs 0
    let mut cost = vec![0i64; s * s];
    for pi in 0..p {
        for gi in 0..g {
            cost[pi * s + gi] = -(confusion.get(gi, pi) as i64);
        }
    }
    let assignment = hungarian_min(&cost, s);
    (0..p)
        .map(|pi| Some(assignment[pi]).filter(|&gi| gi < g))
        .collect()
}

/// Total count on matched (ground truth, prediction) pairs.
pub fn matched_count(confusion: &ConfusionMatrix, alignment: &[Option<usize>]) -> u64 {
    alignment
        .iter()
        .enumerate()
        .filter_map(|(p, g)| g.map(|g| confusion.get(g, p)))
        .sum()
}

/// Alignment of predicted labels onto ground-truth labels, both 1-based.
pub fn hungarian_align(pred: &LabelRaster, gt: &LabelRaster) -> Result<Vec<Option<u32>>> {
    let confusion = ConfusionMatrix::tally(pred, gt)?;
    Ok(align(&confusion)
        .into_iter()
        .map(|g| g.map(|g| g as u32 + 1))
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    pub oa: f64,
    pub aa: f64,
    pub kappa: f64,
    /// `alignment[p - 1]` is the ground-truth label matched to predicted
    /// label `p`, if any.
    pub alignment: Vec<Option<u32>>,
    pub confusion: ConfusionMatrix,
}

/// Scores an aligned `gt_classes x gt_classes` confusion matrix (rows: truth,
/// columns: aligned prediction). Pixels in unmatched clusters are passed as
/// `unmatched[g]`, counted against their true class.
///
/// Returns `(oa, aa, kappa)`.
pub fn scores(aligned: &[Vec<u64>], unmatched: &[u64]) -> Result<(f64, f64, f64)> {
    let k = aligned.len();
    if aligned.iter().any(|r| r.len() != k) || unmatched.len() != k {
        return Err(invalid!("aligned confusion matrix must be square"));
    }
    let row_tot: Vec<u64> = (0..k).map(|g| aligned[g].iter().sum::<u64>() + unmatched[g]).collect();
    let col_tot: Vec<u64> = (0..k).map(|c| aligned.iter().map(|r| r[c]).sum()).collect();
    let total: u64 = row_tot.iter().sum();
    if total == 0 {
        return Err(invalid!("no labeled pixels to score"));
    }
    let total_f = total as f64;
    let correct: u64 = (0..k).map(|c| aligned[c][c]).sum();
    let oa = correct as f64 / total_f;
    let recalls: Vec<f64> = (0..k)
        .filter(|&g| row_tot[g] > 0)
        .map(|g| aligned[g][g] as f64 / row_tot[g] as f64)
        .collect();
    let aa = recalls.iter().sum::<f64>() / recalls.len() as f64;
    let pe: f64 = (0..k)
        .map(|c| row_tot[c] as f64 * col_tot[c] as f64)
        .sum::<f64>()
        / (total_f * total_f);
    let kappa = if pe < 1.0 { (oa - pe) / (1.0 - pe) } else { 1.0 };
    Ok((oa, aa, kappa))
}

/// Aligns `pred` to `gt` and computes overall accuracy, average (per-class)
/// accuracy and Cohen's kappa.
pub fn evaluate(pred: &LabelRaster, gt: &LabelRaster) -> Result<MetricsReport> {
    let confusion = ConfusionMatrix::tally(pred, gt)?;
    metrics_from_confusion(confusion)
}

/// Same as [`evaluate`] starting from raw counts.
pub fn metrics_from_confusion(confusion: ConfusionMatrix) -> Result<MetricsReport> {
    let alignment = align(&confusion);
    let k = confusion.gt_classes;
    let mut aligned = vec![vec![0u64; k]; k];
    let mut unmatched = vec![0u64; k];
    for g in 0..k {
        for (p, target) in alignment.iter().enumerate() {
            let c = confusion.get(g, p);
            match target {
                Some(t) => aligned[g][*t] += c,
                None => unmatched[g] += c,
            }
        }
    }
    let (oa, aa, kappa) = scores(&aligned, &unmatched)?;
    Ok(MetricsReport {
        oa,
        aa,
        kappa,
        alignment: alignment.into_iter().map(|g| g.map(|g| g as u32 + 1)).collect(),
        confusion,
    })
}
