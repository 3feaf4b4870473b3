//! Linear-probe evaluation of a frozen feature bank and its task-specific
//! counterpart (bank and head trained jointly on one task).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{
    classify, loss_and_grads, optimizer_step, BankShape, ClassifierHead, ConvFeatureBank,
    FeatureVector, OptimizerConfig, Patch,
};
use crate::sampler::{partial_shuffle, split_em, TaskDataset};
use crate::trainer::{task_features, train_head_on_features, HeadTrainConfig};

/// Settings for joint (unfrozen) training of bank plus head.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct JointTrainConfig {
    pub epochs: usize,
    pub minibatch: usize,
    pub optimizer: OptimizerConfig,
}

impl Default for JointTrainConfig {
    fn default() -> Self {
        Self {
            epochs: 40,
            minibatch: 32,
            optimizer: OptimizerConfig::adam(5e-3),
        }
    }
}

/// Accuracy of predictions of `head` over rows of precomputed features.
fn feature_accuracy(
    features: &ndarray::Array2<f64>,
    labels: &[usize],
    head: &ClassifierHead,
) -> Result<f64> {
    let mut correct = 0usize;
    for (i, label) in labels.iter().enumerate() {
        let y = FeatureVector::new(features.row(i).to_vec())?;
        if classify(&y, head)?.argmax() == *label {
            correct += 1;
        }
    }
    Ok(correct as f64 / labels.len() as f64)
}

/// Splits the task, trains a fresh head on the train side with the bank
/// frozen, and returns held-out accuracy.
pub fn eval_frozen<R: Rng>(
    bank: &ConvFeatureBank,
    task: &TaskDataset,
    split_fraction: f64,
    head_cfg: &HeadTrainConfig,
    rng: &mut R,
) -> Result<f64> {
    let (train, test) = split_em(task, split_fraction, rng)?;
    eval_frozen_on_split(bank, &train, &test, head_cfg, rng)
}

/// Same as `eval_frozen` but on an existing split, so several banks can be
/// compared on identical data.
pub fn eval_frozen_on_split<R: Rng>(
    bank: &ConvFeatureBank,
    train: &TaskDataset,
    test: &TaskDataset,
    head_cfg: &HeadTrainConfig,
    rng: &mut R,
) -> Result<f64> {
    let train_feats = task_features(train, bank)?;
    let train_labels: Vec<usize> = train.examples.iter().map(|e| e.class).collect();
    let (head, _) =
        train_head_on_features(train_feats.view(), &train_labels, train.classes, head_cfg, rng)?;
    let test_feats = task_features(test, bank)?;
    let test_labels: Vec<usize> = test.examples.iter().map(|e| e.class).collect();
    feature_accuracy(&test_feats, &test_labels, &head)
}

/// Trains bank and head jointly from random initialization on the train
/// side of the task; returns held-out accuracy.
pub fn eval_specific<R: Rng>(
    task: &TaskDataset,
    shape: BankShape,
    cfg: &JointTrainConfig,
    rng: &mut R,
) -> Result<f64> {
    let (train, test) = split_em(task, 0.5, rng)?;
    eval_specific_on_split(&train, &test, shape, cfg, rng)
}

/// Joint training on an existing split.
pub fn eval_specific_on_split<R: Rng>(
    train: &TaskDataset,
    test: &TaskDataset,
    shape: BankShape,
    cfg: &JointTrainConfig,
    rng: &mut R,
) -> Result<f64> {
    let channels = train
        .examples
        .first()
        .ok_or_else(|| Error::Config("empty training split".into()))?
        .patch
        .channels();
    let mut bank = ConvFeatureBank::random(shape, channels, rng);
    let probe = task_features(train, &bank)?; // sizes the head input
    let feat_len = probe.ncols();
    let sigma = 1.0 / (feat_len as f64).sqrt();
    let mut head = ClassifierHead::random(train.classes, feat_len, sigma, rng);

    let mut opt = cfg
        .optimizer
        .state_for(bank.param_count() + train.classes * feat_len);
    let pairs = train.pairs();
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    for _ in 0..cfg.epochs {
        partial_shuffle(&mut order, rng);
        for chunk in order.chunks(cfg.minibatch) {
            let batch: Vec<(&Patch, usize)> = chunk.iter().map(|&i| pairs[i]).collect();
            let out = loss_and_grads(&batch, train.classes, &bank, &head, false, false)?;
            if !out.loss.is_finite() {
                return Err(Error::Diverged("joint training loss is non-finite".into()));
            }
            let d_filters = out.grads.d_filters.as_slice().expect("contiguous");
            let d_biases = out.grads.d_biases.as_slice().expect("contiguous");
            let d_head = out.grads.d_head.as_slice().expect("contiguous");
            let (filters, biases) = bank.params_mut();
            optimizer_step(
                &mut [
                    (filters, d_filters),
                    (biases, d_biases),
                    (head.weights_slice_mut(), d_head),
                ],
                &mut opt,
            )?;
        }
    }

    let test_feats = task_features(test, &bank)?;
    let test_labels: Vec<usize> = test.examples.iter().map(|e| e.class).collect();
    feature_accuracy(&test_feats, &test_labels, &head)
}
