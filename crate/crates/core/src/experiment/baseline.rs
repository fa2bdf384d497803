//! Reference imputers that ignore graph structure.

use crate::graph::MaskMatrix;
use ndarray::{Array1, Array2};

/// Observed mean of every column; a column with nothing observed gets 0.
fn column_means(x: &Array2<f64>, mask: &MaskMatrix) -> Array1<f64> {
    let obs = mask.observed();
    Array1::from_iter((0..x.ncols()).map(|d| {
        let (sum, count) = x
            .column(d)
            .iter()
            .zip(obs.column(d))
            .filter(|(_, &seen)| seen)
            .fold((0.0, 0usize), |(s, c), (v, _)| (s + v, c + 1));
        if count == 0 {
            log::warn!("column {d} has no observed entries; imputing 0");
            0.0
        } else {
            sum / count as f64
        }
    }))
}

/// Hidden entries take their column's observed mean.
pub fn baseline_mean(x: &Array2<f64>, mask: &MaskMatrix) -> Array2<f64> {
    let means = column_means(x, mask);
    let mut out = x.clone();
    for ((i, d), v) in out.indexed_iter_mut() {
        if !mask.is_observed(i, d) {
            *v = means[d];
        }
    }
    out
}

/// Distance between rows `a` and `b` over their co-observed columns,
/// scaled by `sqrt(D / co-observed)`. `None` when nothing is shared.
fn partial_distance(x: &Array2<f64>, mask: &MaskMatrix, a: usize, b: usize) -> Option<f64> {
    let obs = mask.observed();
    let mut sq = 0.0;
    let mut shared = 0usize;
    for d in 0..x.ncols() {
        if obs[[a, d]] && obs[[b, d]] {
            sq += (x[[a, d]] - x[[b, d]]).powi(2);
            shared += 1;
        }
    }
    (shared > 0).then(|| (sq * x.ncols() as f64 / shared as f64).sqrt())
}

/// Inverse-distance weighted average over the `k` nearest rows that observe
/// the entry. Rows at distance zero, when present, are averaged uniformly.
/// Entries no other row observes fall back to the column mean.
pub fn baseline_knn(x: &Array2<f64>, mask: &MaskMatrix, k: usize) -> Array2<f64> {
    assert!(k >= 1, "k must be at least 1");
    let n = x.nrows();
    let means = column_means(x, mask);
    let mut out = x.clone();
    for i in 0..n {
        let hidden: Vec<usize> = (0..x.ncols()).filter(|&d| !mask.is_observed(i, d)).collect();
        if hidden.is_empty() {
            continue;
        }
        let dist: Vec<Option<f64>> =
            (0..n).map(|j| if j == i { None } else { partial_distance(x, mask, i, j) }).collect();
        for d in hidden {
            let mut cands: Vec<(f64, usize)> =
                (0..n).filter(|&j| mask.is_observed(j, d)).filter_map(|j| dist[j].map(|dj| (dj, j))).collect();
            if cands.is_empty() {
                log::debug!("no neighbour observes ({i}, {d}); using the column mean");
                out[[i, d]] = means[d];
                continue;
            }
            cands.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            cands.truncate(k);
            let exact: Vec<_> = cands.iter().filter(|c| c.0 == 0.0).collect();
            out[[i, d]] = if exact.is_empty() {
                let (num, den) =
                    cands.iter().fold((0.0, 0.0), |(num, den), &(dj, j)| (num + x[[j, d]] / dj, den + 1.0 / dj));
                num / den
            } else {
                exact.iter().map(|c| x[[c.1, d]]).sum::<f64>() / exact.len() as f64
            };
        }
    }
    out
}
