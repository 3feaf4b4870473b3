//! Hyperspectral pixel classification with frozen spectral features.
//!
//! Every labeled pixel is represented by the feature vector of its 3x3
//! spatial neighborhood (clamp-to-border at the edges) and classified by
//! k-NN under stratified cross validation.

use ndarray::{Array2, Array3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{feature_forward, ConvFeatureBank, Patch};
use crate::rng::derive_rng;
use crate::sampler::HsiCube;

use super::knn::knn_classify;
use super::metrics::{stratified_folds, BenchResult};

const NEIGHBORHOOD: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HsiBenchConfig {
    pub folds: usize,
    pub neighbors: usize,
}

impl Default for HsiBenchConfig {
    fn default() -> Self {
        Self { folds: 10, neighbors: 1 }
    }
}

/// Feature vectors and zero-based labels of every labeled pixel, in raster
/// order.
pub fn labeled_pixel_features(
    bank: &ConvFeatureBank,
    cube: &HsiCube,
) -> Result<(Array2<f64>, Vec<usize>)> {
    if bank.channels() != cube.bands() {
        return Err(Error::Shape(format!(
            "bank expects {} channels, cube has {} bands",
            bank.channels(),
            cube.bands()
        )));
    }
    let pixels = cube.labeled_pixels();
    if pixels.is_empty() {
        return Err(Error::InsufficientData("cube has no labeled pixels".into()));
    }
    let rows: Vec<Result<Vec<f64>>> = pixels
        .par_iter()
        .map(|&(r, c, _)| {
            let patch = neighborhood_patch(cube, r, c)?;
            Ok(feature_forward(&patch, bank)?.values().to_vec())
        })
        .collect();
    let mut features = Array2::zeros((pixels.len(), bank.features()));
    for (i, row) in rows.into_iter().enumerate() {
        let row = row?;
        features
            .row_mut(i)
            .assign(&ndarray::ArrayView1::from(&row));
    }
    let labels = pixels.iter().map(|&(_, _, l)| l).collect();
    Ok((features, labels))
}

fn neighborhood_patch(cube: &HsiCube, r: usize, c: usize) -> Result<Patch> {
    let (h, w, bands) = cube.data().dim();
    let half = NEIGHBORHOOD / 2;
    let mut data = Array3::zeros((NEIGHBORHOOD, NEIGHBORHOOD, bands));
    for dr in 0..NEIGHBORHOOD {
        let rr = (r + dr).saturating_sub(half).min(h - 1);
        for dc in 0..NEIGHBORHOOD {
            let cc = (c + dc).saturating_sub(half).min(w - 1);
            for b in 0..bands {
                data[[dr, dc, b]] = cube.data()[[rr, cc, b]];
            }
        }
    }
    Patch::new(data)
}

/// Stratified cross-validated pixel classification; see the module docs.
pub fn hsi_benchmark(
    bank: &ConvFeatureBank,
    cube: &HsiCube,
    cfg: &HsiBenchConfig,
    seed: u64,
) -> Result<BenchResult> {
    if cfg.neighbors == 0 {
        return Err(Error::Config("neighbors must be >= 1".into()));
    }
    let (features, labels) = labeled_pixel_features(bank, cube)?;
    let classes = cube.num_classes();
    let mut rng = derive_rng(seed, 0);
    let (folds, small) = stratified_folds(&labels, cfg.folds, &mut rng)?;

    let n = labels.len();
    let in_fold = {
        let mut f = vec![usize::MAX; n];
        for (fi, fold) in folds.iter().enumerate() {
            for &i in fold {
                f[i] = fi;
            }
        }
        f
    };

    let mut confusion = vec![vec![0u64; classes]; classes];
    let mut fold_accs = Vec::with_capacity(folds.len());
    for (fi, fold) in folds.iter().enumerate() {
        if fold.is_empty() {
            continue;
        }
        let train_idx: Vec<usize> = (0..n).filter(|i| in_fold[*i] != fi).collect();
        let mut train = Array2::zeros((train_idx.len(), features.ncols()));
        let mut train_labels = Vec::with_capacity(train_idx.len());
        for (row, &i) in train_idx.iter().enumerate() {
            train.row_mut(row).assign(&features.row(i));
            train_labels.push(labels[i]);
        }
        let mut queries = Array2::zeros((fold.len(), features.ncols()));
        for (row, &i) in fold.iter().enumerate() {
            queries.row_mut(row).assign(&features.row(i));
        }
        let preds = knn_classify(train.view(), &train_labels, queries.view(), cfg.neighbors)?;
        let mut correct = 0usize;
        for (&i, pred) in fold.iter().zip(preds.iter()) {
            confusion[labels[i]][*pred] += 1;
            if *pred == labels[i] {
                correct += 1;
            }
        }
        fold_accs.push(correct as f64 / fold.len() as f64);
    }

    let names: Vec<String> = cube.class_names().to_vec();
    Ok(BenchResult::from_confusion(
        confusion,
        &fold_accs,
        Some(&names),
        small,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::nn::BankShape;
    use crate::rng::master_rng;

    #[test]
    fn folds_cover_every_labeled_pixel_once() {
        let cube = fixtures::small_hsi_cube(20, 20, 6, 3, 501);
        let labels: Vec<usize> = cube.labeled_pixels().iter().map(|&(_, _, l)| l).collect();
        let mut rng = master_rng(50);
        let (folds, small) = stratified_folds(&labels, 5, &mut rng).unwrap();
        assert!(small.is_empty());
        let covered: usize = folds.iter().map(|f| f.len()).sum();
        assert_eq!(covered, labels.len());
    }

    #[test]
    fn benchmark_on_separable_cube_is_accurate() {
        let cube = fixtures::small_hsi_cube(24, 24, 12, 3, 502);
        // w=1 spectral bank on the cube's band count
        let bank = ConvFeatureBank::random(
            BankShape { features: 8, kernel: 1, stride: 1 },
            12,
            &mut master_rng(51),
        );
        let cfg = HsiBenchConfig { folds: 4, neighbors: 1 };
        let res = hsi_benchmark(&bank, &cube, &cfg, 9).unwrap();
        // random spectral projections of well-separated signatures still separate
        assert!(res.overall_accuracy > 0.5, "got {}", res.overall_accuracy);
        let total: u64 = res.confusion.iter().flatten().sum();
        assert_eq!(total as usize, cube.labeled_pixels().len());
        // trace/total == overall accuracy exactly
        let diag: u64 = (0..3).map(|k| res.confusion[k][k]).sum();
        assert_eq!(res.overall_accuracy, diag as f64 / total as f64);
    }

    #[test]
    fn border_pixels_use_clamped_neighborhoods() {
        let cube = fixtures::small_hsi_cube(8, 8, 4, 2, 503);
        let patch = neighborhood_patch(&cube, 0, 0).unwrap();
        assert_eq!(patch.side(), 3);
        // at the top-left corner, the out-of-bounds row/column clamp to 0
        for b in 0..4 {
            for j in 0..3 {
                assert_eq!(patch.data()[[0, j, b]], patch.data()[[1, j, b]]);
            }
            for i in 0..3 {
                assert_eq!(patch.data()[[i, 0, b]], patch.data()[[i, 1, b]]);
            }
        }
        let inner = neighborhood_patch(&cube, 4, 4).unwrap();
        for b in 0..4 {
            assert_eq!(inner.data()[[1, 1, b]], cube.data()[[4, 4, b]]);
            assert_eq!(inner.data()[[0, 0, b]], cube.data()[[3, 3, b]]);
        }
    }
}
