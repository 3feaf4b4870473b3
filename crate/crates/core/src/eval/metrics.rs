//! Benchmark result assembly: confusion matrices, per-class precision and
//! recall, and stratified fold construction.

use std::io::Write;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::sampler::partial_shuffle;

#[derive(Debug, Clone, Serialize)]
pub struct ClassMetrics {
    pub class: usize,
    pub name: String,
    pub precision: f64,
    pub recall: f64,
    /// Number of tested examples of this class (confusion row sum).
    pub support: u64,
}

/// Outcome of a downstream benchmark, pooled over runs or folds.
#[derive(Debug, Clone, Serialize)]
pub struct BenchResult {
    /// Pooled confusion-matrix trace over total; equals accuracy_mean when
    /// every run tests the same number of examples.
    pub overall_accuracy: f64,
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
    pub runs: usize,
    pub per_class: Vec<ClassMetrics>,
    /// Rows are true classes, columns predicted classes, summed over runs.
    pub confusion: Vec<Vec<u64>>,
    /// Classes too small to stratify; kept whole in every training fold.
    pub small_classes: Vec<usize>,
}

impl BenchResult {
    pub fn from_confusion(
        confusion: Vec<Vec<u64>>,
        per_run_accuracy: &[f64],
        class_names: Option<&[String]>,
        small_classes: Vec<usize>,
    ) -> Self {
        let classes = confusion.len();
        let mut diag = 0u64;
        let mut total = 0u64;
        let mut col_sums = vec![0u64; classes];
        for (t, row) in confusion.iter().enumerate() {
            for (p, &v) in row.iter().enumerate() {
                total += v;
                col_sums[p] += v;
                if t == p {
                    diag += v;
                }
            }
        }
        let per_class = (0..classes)
            .map(|k| {
                let row_sum: u64 = confusion[k].iter().sum();
                let tp = confusion[k][k];
                ClassMetrics {
                    class: k,
                    name: class_names
                        .and_then(|n| n.get(k).cloned())
                        .unwrap_or_else(|| format!("class_{:02}", k + 1)),
                    precision: if col_sums[k] == 0 { 0.0 } else { tp as f64 / col_sums[k] as f64 },
                    recall: if row_sum == 0 { 0.0 } else { tp as f64 / row_sum as f64 },
                    support: row_sum,
                }
            })
            .collect();

        let n = per_run_accuracy.len();
        let mean = per_run_accuracy.iter().sum::<f64>() / n.max(1) as f64;
        let std = if n > 1 {
            let var = per_run_accuracy
                .iter()
                .map(|a| (a - mean) * (a - mean))
                .sum::<f64>()
                / (n - 1) as f64;
            var.sqrt()
        } else {
            0.0
        };

        Self {
            overall_accuracy: if total == 0 { 0.0 } else { diag as f64 / total as f64 },
            accuracy_mean: mean,
            accuracy_std: std,
            runs: n,
            per_class,
            confusion,
            small_classes,
        }
    }

    /// One row per class: `class,name,precision,recall,support`.
    pub fn write_report_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "class,name,precision,recall,support")?;
        for m in &self.per_class {
            writeln!(
                out,
                "{},{},{},{},{}",
                m.class + 1,
                m.name,
                m.precision,
                m.recall,
                m.support
            )?;
        }
        writeln!(
            out,
            "overall,,{},{},{}",
            self.overall_accuracy, self.accuracy_std, self.runs
        )?;
        Ok(())
    }

    /// Square matrix, one CSV row per true class.
    pub fn write_confusion_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for row in &self.confusion {
            let cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
            writeln!(out, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

/// Splits `labels` into `folds` stratified test folds: each class's indices
/// are shuffled and dealt round-robin. Classes with fewer examples than
/// `folds` go to no test fold (they stay in training) and are reported.
/// Returns (folds, small_classes).
pub fn stratified_folds<R: Rng>(
    labels: &[usize],
    folds: usize,
    rng: &mut R,
) -> Result<(Vec<Vec<usize>>, Vec<usize>)> {
    if folds < 2 {
        return Err(Error::Config("need at least 2 folds".into()));
    }
    if labels.is_empty() {
        return Err(Error::Config("no labeled examples".into()));
    }
    let classes = labels.iter().max().unwrap() + 1;
    let mut out = vec![Vec::new(); folds];
    let mut small = Vec::new();
    for k in 0..classes {
        let mut idx: Vec<usize> = labels
            .iter()
            .enumerate()
            .filter(|(_, l)| **l == k)
            .map(|(i, _)| i)
            .collect();
        if idx.is_empty() {
            continue;
        }
        if idx.len() < folds {
            small.push(k);
            continue;
        }
        partial_shuffle(&mut idx, rng);
        for (pos, i) in idx.into_iter().enumerate() {
            out[pos % folds].push(i);
        }
    }
    for fold in &mut out {
        fold.sort_unstable();
    }
    Ok((out, small))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_rng;

    #[test]
    fn confusion_trace_equals_overall_accuracy() {
        let confusion = vec![vec![8, 2, 0], vec![1, 9, 0], vec![0, 3, 7]];
        let res = BenchResult::from_confusion(confusion, &[0.8], None, vec![]);
        assert!((res.overall_accuracy - 24.0 / 30.0).abs() < 1e-15);
        assert_eq!(res.per_class[0].support, 10);
        assert!((res.per_class[1].precision - 9.0 / 14.0).abs() < 1e-15);
        assert!((res.per_class[2].recall - 0.7).abs() < 1e-15);
    }

    #[test]
    fn folds_partition_labels_exactly() {
        let labels: Vec<usize> = (0..200).map(|i| i % 4).collect();
        let mut rng = derive_rng(50, 0);
        let (folds, small) = stratified_folds(&labels, 10, &mut rng).unwrap();
        assert!(small.is_empty());
        assert_eq!(folds.len(), 10);
        let mut all: Vec<usize> = folds.iter().flatten().copied().collect();
        all.sort_unstable();
        let want: Vec<usize> = (0..200).collect();
        assert_eq!(all, want);
        for fold in &folds {
            for class in 0..4 {
                assert_eq!(fold.iter().filter(|&&i| labels[i] == class).count(), 5);
            }
        }
    }

    #[test]
    fn tiny_classes_are_flagged_not_dealt() {
        let mut labels: Vec<usize> = (0..40).map(|i| i % 2).collect();
        labels.extend_from_slice(&[2, 2, 2]); // only 3 examples of class 2
        let mut rng = derive_rng(51, 0);
        let (folds, small) = stratified_folds(&labels, 10, &mut rng).unwrap();
        assert_eq!(small, vec![2]);
        let dealt: usize = folds.iter().map(|f| f.len()).sum();
        assert_eq!(dealt, 40);
    }
}
