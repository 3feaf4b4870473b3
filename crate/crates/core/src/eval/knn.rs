//! Brute-force k-nearest-neighbor classification, Euclidean metric.

use ndarray::ArrayView2;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Majority vote among the `k` Euclidean nearest training rows. Distance
/// ties prefer the lower training index, vote ties the lower class index.
pub fn knn_classify(
    train: ArrayView2<'_, f64>,
    labels: &[usize],
    queries: ArrayView2<'_, f64>,
    k: usize,
) -> Result<Vec<usize>> {
    if k == 0 {
        return Err(Error::Config("k must be >= 1".into()));
    }
    if train.nrows() == 0 {
        return Err(Error::Config("empty training set".into()));
    }
    if labels.len() != train.nrows() {
        return Err(Error::Config("one label per training row required".into()));
    }
    if train.ncols() != queries.ncols() {
        return Err(Error::Shape(format!(
            "train dim {} != query dim {}",
            train.ncols(),
            queries.ncols()
        )));
    }
    let k = k.min(train.nrows());
    let classes = labels.iter().max().copied().unwrap_or(0) + 1;

    let preds: Vec<usize> = (0..queries.nrows())
        .into_par_iter()
        .map(|qi| {
            let q = queries.row(qi);
            let q = q.as_slice().expect("query row is contiguous");
            // (distance^2, train index), kept sorted ascending, length <= k
            let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
            for ti in 0..train.nrows() {
                let t = train.row(ti);
                let t = t.as_slice().expect("train row is contiguous");
                let bound = best.last().map(|b| b.0).unwrap_or(f64::INFINITY);
                let full = best.len() == k;
                let mut d2 = 0.0;
                for (a, b) in q.iter().zip(t.iter()) {
                    let diff = a - b;
                    d2 += diff * diff;
                    if full && d2 > bound {
                        break;
                    }
                }
                let cand = (d2, ti);
                if !full || cand < *best.last().unwrap() {
                    let pos = best.partition_point(|b| *b < cand);
                    best.insert(pos, cand);
                    if best.len() > k {
                        best.pop();
                    }
                }
            }
            let mut votes = vec![0usize; classes];
            for (_, ti) in &best {
                votes[labels[*ti]] += 1;
            }
            let mut winner = 0;
            for (class, v) in votes.iter().enumerate() {
                if *v > votes[winner] {
                    winner = class;
                }
            }
            winner
        })
        .collect();
    Ok(preds)
}
