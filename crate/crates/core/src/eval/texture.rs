//! Texture patch classification with frozen features.
//!
//! Each texture image is subdivided into square subregions; every run
//! splits the subregions of each image into disjoint train and test halves
//! and samples one patch per selected subregion, placed fully inside it so
//! no train patch ever overlaps a test patch. A softmax head is fit on the
//! frozen feature vectors of the train patches and scored on the test
//! patches. The same patches also feed a raw-pixel 1-NN baseline.

use ndarray::{Array2, Array3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{classify, ConvFeatureBank, FeatureVector, Patch};
use crate::rng::derive_rng;
use crate::sampler::partial_shuffle;
use crate::trainer::{extract_features, train_head_on_features, HeadTrainConfig};

use super::knn::knn_classify;
use super::metrics::BenchResult;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TextureBenchConfig {
    /// Patch side in pixels; must not exceed `subregion`.
    pub patch_side: usize,
    pub runs: usize,
    /// Subregion side in pixels (32 gives 256 subregions on 512x512).
    pub subregion: usize,
    /// Subregions drawn per image for each of train and test (128).
    pub per_side: usize,
    pub head: HeadTrainConfig,
}

impl Default for TextureBenchConfig {
    fn default() -> Self {
        Self {
            patch_side: 19,
            runs: 10,
            subregion: 32,
            per_side: 128,
            head: HeadTrainConfig {
                epochs: 150,
                minibatch: 64,
                optimizer: crate::nn::OptimizerConfig::adam(2e-3),
            },
        }
    }
}

/// Frozen-feature result plus the raw-pixel 1-NN baseline on identical
/// patch sets.
#[derive(Debug, Clone, Serialize)]
pub struct TextureBenchOutput {
    pub features: BenchResult,
    pub raw_pixels: BenchResult,
}

struct RunPatches {
    train_patches: Vec<Patch>,
    train_raw: Array2<f64>,
    train_labels: Vec<usize>,
    test_patches: Vec<Patch>,
    test_raw: Array2<f64>,
    test_labels: Vec<usize>,
}

fn replicate_to_channels(gray: ndarray::ArrayView2<'_, f64>, channels: usize) -> Result<Patch> {
    let (h, w) = gray.dim();
    let mut data = Array3::zeros((h, w, channels));
    for r in 0..h {
        for c in 0..w {
            for ch in 0..channels {
                data[[r, c, ch]] = gray[[r, c]];
            }
        }
    }
    Patch::new(data)
}

fn sample_run_patches<R: Rng>(
    images: &[Array2<f64>],
    cfg: &TextureBenchConfig,
    channels: usize,
    rng: &mut R,
) -> Result<RunPatches> {
    let a = cfg.patch_side;
    let sub = cfg.subregion;
    if a > sub {
        return Err(Error::Config(format!(
            "patch side {a} exceeds subregion {sub}; disjointness impossible"
        )));
    }
    let raw_len = a * a;
    let n_per_side = cfg.per_side * images.len();
    let mut out = RunPatches {
        train_patches: Vec::with_capacity(n_per_side),
        train_raw: Array2::zeros((n_per_side, raw_len)),
        train_labels: Vec::with_capacity(n_per_side),
        test_patches: Vec::with_capacity(n_per_side),
        test_raw: Array2::zeros((n_per_side, raw_len)),
        test_labels: Vec::with_capacity(n_per_side),
    };

    for (class, img) in images.iter().enumerate() {
        let (h, w) = img.dim();
        let (rows, cols) = (h / sub, w / sub);
        let total = rows * cols;
        if total < 2 * cfg.per_side {
            return Err(Error::Config(format!(
                "image {class} has {total} subregions, need {}",
                2 * cfg.per_side
            )));
        }
        let mut order: Vec<usize> = (0..total).collect();
        partial_shuffle(&mut order, rng);
        for (pos, &sub_idx) in order.iter().take(2 * cfg.per_side).enumerate() {
            let (sr, sc) = (sub_idx / cols, sub_idx % cols);
            let dr = rng.random_range(0..=sub - a);
            let dc = rng.random_range(0..=sub - a);
            let (r0, c0) = (sr * sub + dr, sc * sub + dc);
            let gray = img.slice(ndarray::s![r0..r0 + a, c0..c0 + a]);
            let patch = replicate_to_channels(gray, channels)?;
            let is_train = pos < cfg.per_side;
            let (patches, raw, labels, idx) = if is_train {
                let idx = out.train_labels.len();
                (&mut out.train_patches, &mut out.train_raw, &mut out.train_labels, idx)
            } else {
                let idx = out.test_labels.len();
                (&mut out.test_patches, &mut out.test_raw, &mut out.test_labels, idx)
            };
            for (q, v) in gray.iter().enumerate() {
                raw[[idx, q]] = *v;
            }
            patches.push(patch);
            labels.push(class);
        }
    }
    Ok(out)
}

/// Runs the benchmark; `images` holds one grayscale texture per class,
/// values in [0, 1].
pub fn texture_benchmark(
    bank: &ConvFeatureBank,
    images: &[Array2<f64>],
    cfg: &TextureBenchConfig,
    seed: u64,
) -> Result<TextureBenchOutput> {
    if images.is_empty() {
        return Err(Error::Config("no texture images".into()));
    }
    if cfg.runs == 0 {
        return Err(Error::Config("runs must be >= 1".into()));
    }
    let classes = images.len();
    let channels = bank.channels();

    let mut feat_confusion = vec![vec![0u64; classes]; classes];
    let mut raw_confusion = vec![vec![0u64; classes]; classes];
    let mut feat_accs = Vec::with_capacity(cfg.runs);
    let mut raw_accs = Vec::with_capacity(cfg.runs);

    for run in 0..cfg.runs {
        let mut rng = derive_rng(seed, run as u64);
        let data = sample_run_patches(images, cfg, channels, &mut rng)?;

        let train_refs: Vec<&Patch> = data.train_patches.iter().collect();
        let test_refs: Vec<&Patch> = data.test_patches.iter().collect();
        let train_feats = extract_features(&train_refs, bank)?;
        let test_feats = extract_features(&test_refs, bank)?;
        let (head, _) = train_head_on_features(
            train_feats.view(),
            &data.train_labels,
            classes,
            &cfg.head,
            &mut rng,
        )?;
        let mut correct = 0usize;
        for (i, label) in data.test_labels.iter().enumerate() {
            let y = FeatureVector::new(test_feats.row(i).to_vec())?;
            let pred = classify(&y, &head)?.argmax();
            feat_confusion[*label][pred] += 1;
            if pred == *label {
                correct += 1;
            }
        }
        feat_accs.push(correct as f64 / data.test_labels.len() as f64);

        let preds = knn_classify(
            data.train_raw.view(),
            &data.train_labels,
            data.test_raw.view(),
            1,
        )?;
        let mut correct = 0usize;
        for (pred, label) in preds.iter().zip(data.test_labels.iter()) {
            raw_confusion[*label][*pred] += 1;
            if pred == label {
                correct += 1;
            }
        }
        raw_accs.push(correct as f64 / data.test_labels.len() as f64);
    }

    Ok(TextureBenchOutput {
        features: BenchResult::from_confusion(feat_confusion, &feat_accs, None, vec![]),
        raw_pixels: BenchResult::from_confusion(raw_confusion, &raw_accs, None, vec![]),
    })
}
