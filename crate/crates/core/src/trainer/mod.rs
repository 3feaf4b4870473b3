//! The EM-style training loop.
//!
//! Each iteration draws a fresh contextual-group task, splits it into an E
//! and an M subset, fits a fresh softmax head on the E subset with the
//! feature bank frozen (E-step), measures transferable accuracy on the M
//! subset, then updates the bank on the M subset with the head frozen
//! (M-step). Bank weights carry over between iterations; the loop stops
//! when the accuracy has been flat over a sliding window.

use std::io::Write;
use std::time::Instant;

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{
    classify, feature_forward, loss_and_grads, optimizer_step, BankShape, ClassifierHead,
    ConvFeatureBank, FeatureVector, OptimizerConfig, OptimizerState, Patch,
};
use crate::rng::master_rng;
use crate::sampler::{build_task, partial_shuffle, split_em, SampleSource, SamplerConfig, TaskDataset};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainerConfig {
    pub epochs_e: usize,
    pub epochs_m: usize,
    pub head_optimizer: OptimizerConfig,
    pub bank_optimizer: OptimizerConfig,
    pub minibatch: usize,
    pub max_iterations: usize,
    pub convergence_window: usize,
    pub convergence_threshold: f64,
    pub e_fraction: f64,
    /// Checkpoint cadence in iterations; 0 disables (observers decide how).
    pub checkpoint_every: usize,
    #[serde(skip)]
    pub seed: u64,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            epochs_e: 1,
            epochs_m: 1,
            head_optimizer: OptimizerConfig::adam(1e-3),
            bank_optimizer: OptimizerConfig::adam(1e-3),
            minibatch: 64,
            max_iterations: 100,
            convergence_window: 10,
            convergence_threshold: 0.01,
            e_fraction: 0.5,
            checkpoint_every: 0,
            seed: 42,
        }
    }
}

impl TrainerConfig {
    /// The slower non-minibatch regime: plain SGD, ten epochs per step.
    pub fn classic_sgd(lr: f64) -> Self {
        Self {
            epochs_e: 10,
            epochs_m: 10,
            head_optimizer: OptimizerConfig::sgd(lr),
            bank_optimizer: OptimizerConfig::sgd(lr),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs_e == 0 || self.epochs_m == 0 {
            return Err(Error::Config("epoch counts must be >= 1".into()));
        }
        if self.minibatch == 0 {
            return Err(Error::Config("minibatch must be >= 1".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::Config("max_iterations must be >= 1".into()));
        }
        if self.convergence_window < 2 {
            return Err(Error::Config("convergence window must be >= 2".into()));
        }
        if !(self.e_fraction > 0.0 && self.e_fraction < 1.0) {
            return Err(Error::Config("e_fraction must lie in (0, 1)".into()));
        }
        Ok(())
    }

    fn head_train(&self) -> HeadTrainConfig {
        HeadTrainConfig {
            epochs: self.epochs_e,
            minibatch: self.minibatch,
            optimizer: self.head_optimizer,
        }
    }
}

/// Settings for fitting a softmax head on fixed feature vectors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeadTrainConfig {
    pub epochs: usize,
    pub minibatch: usize,
    pub optimizer: OptimizerConfig,
}

impl Default for HeadTrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            minibatch: 64,
            optimizer: OptimizerConfig::adam(3e-3),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Transferable accuracy on the M subset, measured between the steps.
    pub accuracy: f64,
    pub loss_e: f64,
    pub loss_m: f64,
    pub seconds: f64,
}

/// Append-only per-iteration records, strictly ordered by iteration.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct TrainingTrace {
    records: Vec<IterationRecord>,
}

impl TrainingTrace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, record: IterationRecord) {
        assert!(
            (0.0..=1.0).contains(&record.accuracy),
            "accuracy out of range"
        );
        if let Some(last) = self.records.last() {
            assert!(record.iteration > last.iteration, "iterations must increase");
        }
        self.records.push(record);
    }

    pub fn records(&self) -> &[IterationRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn accuracies(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().map(|r| r.accuracy)
    }

    /// CSV with columns `iteration,A,loss_E,loss_M,seconds`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "iteration,A,loss_E,loss_M,seconds")?;
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{}",
                r.iteration, r.accuracy, r.loss_e, r.loss_m, r.seconds
            )?;
        }
        Ok(())
    }
}

/// Eq-6 style held-out accuracy of a head over frozen features.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransferableAccuracy {
    pub value: f64,
    pub classes: usize,
    pub samples: usize,
}

/// Feature vectors of every example of a task, one row per example.
pub fn task_features(task: &TaskDataset, bank: &ConvFeatureBank) -> Result<Array2<f64>> {
    let patches: Vec<&Patch> = task.examples.iter().map(|e| &e.patch).collect();
    extract_features(&patches, bank)
}

/// Feature vectors of a list of patches, one row per patch; extraction is
/// parallel with a deterministic row order.
pub fn extract_features(patches: &[&Patch], bank: &ConvFeatureBank) -> Result<Array2<f64>> {
    use rayon::prelude::*;
    if patches.is_empty() {
        return Err(Error::Config("no patches to featurize".into()));
    }
    let rows: Vec<Result<Vec<f64>>> = patches
        .par_iter()
        .map(|p| Ok(feature_forward(p, bank)?.values().to_vec()))
        .collect();
    let mut out = Array2::zeros((patches.len(), 0));
    for (i, row) in rows.into_iter().enumerate() {
        let row = row?;
        if i == 0 {
            out = Array2::zeros((patches.len(), row.len()));
        }
        out.row_mut(i).assign(&ndarray::ArrayView1::from(&row));
    }
    Ok(out)
}

/// Mean cross-entropy loss and head gradient over the rows of `chunk`.
fn head_minibatch_grad(
    features: ArrayView2<'_, f64>,
    labels: &[usize],
    chunk: &[usize],
    head: &ClassifierHead,
) -> Result<(f64, Array2<f64>)> {
    use crate::nn::LOG_FLOOR;
    let feat = head.input_len();
    let classes = head.classes();
    let ws = head.weights_slice();
    let mut grad = Array2::<f64>::zeros((classes, feat));
    let gs = grad.as_slice_mut().expect("grad is contiguous");
    let mut loss = 0.0;
    for &i in chunk {
        let y = features.row(i);
        let y = y.as_slice().expect("row is contiguous");
        let mut logits = vec![0.0; classes];
        for (l, logit) in logits.iter_mut().enumerate() {
            let row = &ws[l * feat..(l + 1) * feat];
            let mut acc = 0.0;
            for q in 0..feat {
                acc += row[q] * y[q];
            }
            *logit = acc;
        }
        if !logits.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("head logits".into()));
        }
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut probs: Vec<f64> = logits.iter().map(|v| (v - max).exp()).collect();
        let sum: f64 = probs.iter().sum();
        for p in &mut probs {
            *p /= sum;
        }
        loss += -probs[labels[i]].max(LOG_FLOOR).ln();
        probs[labels[i]] -= 1.0;
        for (l, g) in probs.iter().enumerate() {
            if *g == 0.0 {
                continue;
            }
            let row = &mut gs[l * feat..(l + 1) * feat];
            for q in 0..feat {
                row[q] += g * y[q];
            }
        }
    }
    let n = chunk.len() as f64;
    grad.mapv_inplace(|v| v / n);
    Ok((loss / n, grad))
}

/// Fits a fresh head (Gaussian init, std `1/sqrt(feature len)`) on fixed
/// feature vectors by minibatch gradient steps. Returns the head and the
/// mean loss of the final epoch.
pub fn train_head_on_features<R: Rng>(
    features: ArrayView2<'_, f64>,
    labels: &[usize],
    classes: usize,
    cfg: &HeadTrainConfig,
    rng: &mut R,
) -> Result<(ClassifierHead, f64)> {
    let n = features.nrows();
    if n == 0 || labels.len() != n {
        return Err(Error::Config("features and labels must align".into()));
    }
    if let Some(l) = labels.iter().find(|l| **l >= classes) {
        return Err(Error::Config(format!("label {l} out of range")));
    }
    let feat = features.ncols();
    let sigma = 1.0 / (feat as f64).sqrt();
    let mut head = ClassifierHead::random(classes, feat, sigma, rng);
    let mut opt = cfg.optimizer.state_for(classes * feat);
    let mut order: Vec<usize> = (0..n).collect();
    let mut last_epoch_loss = 0.0;

    for _ in 0..cfg.epochs {
        partial_shuffle(&mut order, rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(cfg.minibatch) {
            let (loss, grad) = head_minibatch_grad(features, labels, chunk, &head)?;
            if !loss.is_finite() {
                return Err(Error::Diverged("head loss is non-finite".into()));
            }
            let gs = grad.as_slice().expect("grad is contiguous");
            optimizer_step(&mut [(head.weights_slice_mut(), gs)], &mut opt)?;
            epoch_loss += loss * chunk.len() as f64;
        }
        last_epoch_loss = epoch_loss / n as f64;
    }
    Ok((head, last_epoch_loss))
}

/// E-step: trains a fresh head on the E subset with the bank frozen.
/// Returns the head and the final-epoch loss. The bank is untouched.
pub fn e_step<R: Rng>(
    bank: &ConvFeatureBank,
    x_e: &TaskDataset,
    cfg: &TrainerConfig,
    rng: &mut R,
) -> Result<(ClassifierHead, f64)> {
    if x_e.is_empty() {
        return Err(Error::Config("empty E subset".into()));
    }
    let features = task_features(x_e, bank)?;
    let labels: Vec<usize> = x_e.examples.iter().map(|e| e.class).collect();
    train_head_on_features(features.view(), &labels, x_e.classes, &cfg.head_train(), rng)
}

/// Fraction of M-subset examples whose predicted class matches the label;
/// argmax ties break toward the lowest index.
pub fn measure_transfer_accuracy(
    bank: &ConvFeatureBank,
    head: &ClassifierHead,
    x_m: &TaskDataset,
) -> Result<TransferableAccuracy> {
    if x_m.is_empty() {
        return Err(Error::Config("empty M subset".into()));
    }
    let features = task_features(x_m, bank)?;
    let mut correct = 0usize;
    for (i, ex) in x_m.examples.iter().enumerate() {
        let y = FeatureVector::from_raw(features.row(i).to_vec());
        let z = classify(&y, head)?;
        if z.argmax() == ex.class {
            correct += 1;
        }
    }
    Ok(TransferableAccuracy {
        value: correct as f64 / x_m.len() as f64,
        classes: x_m.classes,
        samples: x_m.len(),
    })
}

/// M-step: updates the bank on the M subset with the head frozen,
/// continuing from the existing weights and optimizer state. Returns the
/// final-epoch loss. The head is untouched.
pub fn m_step<R: Rng>(
    bank: &mut ConvFeatureBank,
    head: &ClassifierHead,
    x_m: &TaskDataset,
    cfg: &TrainerConfig,
    opt: &mut OptimizerState,
    rng: &mut R,
) -> Result<f64> {
    if x_m.is_empty() {
        return Err(Error::Config("empty M subset".into()));
    }
    let pairs = x_m.pairs();
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut last_epoch_loss = 0.0;
    for _ in 0..cfg.epochs_m {
        partial_shuffle(&mut order, rng);
        let mut epoch_loss = 0.0;
        for chunk in order.chunks(cfg.minibatch) {
            let batch: Vec<(&Patch, usize)> = chunk.iter().map(|&i| pairs[i]).collect();
            let out = loss_and_grads(&batch, x_m.classes, bank, head, false, true)?;
            if !out.loss.is_finite() {
                return Err(Error::Diverged("M-step loss is non-finite".into()));
            }
            let d_filters = out.grads.d_filters.as_slice().expect("contiguous");
            let d_biases = out.grads.d_biases.as_slice().expect("contiguous");
            let (filters, biases) = bank.params_mut();
            optimizer_step(&mut [(filters, d_filters), (biases, d_biases)], opt)?;
            epoch_loss += out.loss * chunk.len() as f64;
        }
        last_epoch_loss = epoch_loss / pairs.len() as f64;
    }
    Ok(last_epoch_loss)
}

/// True once the last `window` accuracies exist and their range is below
/// `threshold`.
pub fn has_converged(trace: &TrainingTrace, window: usize, threshold: f64) -> bool {
    if window < 2 || trace.len() < window {
        return false;
    }
    let tail = &trace.records()[trace.len() - window..];
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for r in tail {
        lo = lo.min(r.accuracy);
        hi = hi.max(r.accuracy);
    }
    hi - lo < threshold
}

/// Full training loop; see the module docs. The observer runs after every
/// completed iteration with the fresh record and the current bank.
pub fn train_cgcnn_with_observer<F>(
    source: SampleSource,
    sampler: &SamplerConfig,
    shape: BankShape,
    cfg: &TrainerConfig,
    mut observer: F,
) -> Result<(ConvFeatureBank, TrainingTrace)>
where
    F: FnMut(&IterationRecord, &ConvFeatureBank),
{
    cfg.validate()?;
    sampler.validate()?;
    let mut rng = master_rng(cfg.seed);
    let mut bank = ConvFeatureBank::random(shape, sampler.channels, &mut rng);
    let mut bank_opt = cfg.bank_optimizer.state_for(bank.param_count());
    let mut trace = TrainingTrace::new();
    let mut consecutive_aborts = 0usize;

    for iteration in 1..=cfg.max_iterations {
        let started = Instant::now();
        let task = build_task(source, sampler, &mut rng)?;
        let (x_e, x_m) = split_em(&task, cfg.e_fraction, &mut rng)?;

        let step = (|| -> Result<(f64, f64, TransferableAccuracy)> {
            let (head, loss_e) = e_step(&bank, &x_e, cfg, &mut rng)?;
            let accuracy = measure_transfer_accuracy(&bank, &head, &x_m)?;
            let snapshot = bank.clone();
            match m_step(&mut bank, &head, &x_m, cfg, &mut bank_opt, &mut rng) {
                Ok(loss_m) => Ok((loss_e, loss_m, accuracy)),
                Err(e) => {
                    bank = snapshot;
                    Err(e)
                }
            }
        })();

        match step {
            Ok((loss_e, loss_m, accuracy)) => {
                consecutive_aborts = 0;
                let record = IterationRecord {
                    iteration,
                    accuracy: accuracy.value,
                    loss_e,
                    loss_m,
                    seconds: started.elapsed().as_secs_f64(),
                };
                trace.push(record);
                observer(&record, &bank);
                if has_converged(&trace, cfg.convergence_window, cfg.convergence_threshold) {
                    break;
                }
            }
            Err(Error::Diverged(msg)) => {
                consecutive_aborts += 1;
                if consecutive_aborts > 3 {
                    return Err(Error::Diverged(format!(
                        "{consecutive_aborts} consecutive aborted iterations, last: {msg}"
                    )));
                }
            }
            Err(other) => return Err(other),
        }
    }
    Ok((bank, trace))
}

pub fn train_cgcnn(
    source: SampleSource,
    sampler: &SamplerConfig,
    shape: BankShape,
    cfg: &TrainerConfig,
) -> Result<(ConvFeatureBank, TrainingTrace)> {
    train_cgcnn_with_observer(source, sampler, shape, cfg, |_, _| {})
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::nn::bank_bytes;
    use crate::rng::derive_rng;
    use crate::sampler::SampleMode;

    fn small_sampler(groups: usize) -> SamplerConfig {
        SamplerConfig {
            groups,
            per_group: 8,
            patch_side: 9,
            channels: 3,
            slide_radius: 3,
            gray_probability: 0.3,
            jitter_amplitude: 0.1,
            mode: SampleMode::Rgb,
        }
    }

    fn small_shape() -> BankShape {
        BankShape { features: 6, kernel: 5, stride: 2 }
    }

    fn fast_cfg(seed: u64) -> TrainerConfig {
        TrainerConfig {
            epochs_e: 4,
            epochs_m: 2,
            minibatch: 16,
            max_iterations: 3,
            seed,
            ..TrainerConfig::default()
        }
    }

    #[test]
    fn e_step_leaves_bank_bits_untouched() {
        let store = fixtures::synthetic_image_store(2, 48, 48, 201);
        let cfg = fast_cfg(1);
        let mut rng = derive_rng(1, 5);
        let bank = ConvFeatureBank::random(small_shape(), 3, &mut rng);
        let before = bank_bytes(&bank);
        let task = build_task(SampleSource::Rgb(&store), &small_sampler(4), &mut rng).unwrap();
        let (x_e, _) = split_em(&task, 0.5, &mut rng).unwrap();
        let (head, loss) = e_step(&bank, &x_e, &cfg, &mut rng).unwrap();
        assert_eq!(bank_bytes(&bank), before);
        assert_eq!(head.classes(), 4);
        assert!(loss.is_finite());
    }

    #[test]
    fn single_class_task_scores_perfectly() {
        let store = fixtures::synthetic_image_store(2, 48, 48, 202);
        let cfg = fast_cfg(2);
        let mut rng = derive_rng(2, 5);
        let bank = ConvFeatureBank::random(small_shape(), 3, &mut rng);
        let task = build_task(SampleSource::Rgb(&store), &small_sampler(1), &mut rng).unwrap();
        let (x_e, x_m) = split_em(&task, 0.5, &mut rng).unwrap();
        let (head, _) = e_step(&bank, &x_e, &cfg, &mut rng).unwrap();
        let acc = measure_transfer_accuracy(&bank, &head, &x_m).unwrap();
        assert_eq!(acc.value, 1.0);
    }

    #[test]
    fn head_training_separates_two_clusters() {
        // The head has no bias, so the clusters must differ in direction,
        // not just distance from the origin.
        let mut rng = derive_rng(3, 5);
        let n = 60;
        let mut features = Array2::zeros((2 * n, 4));
        let mut labels = Vec::new();
        for i in 0..2 * n {
            let class = i % 2;
            for q in 0..4 {
                features[[i, q]] = if q == class {
                    2.0 + rng.random_range(-0.3..0.3)
                } else {
                    rng.random_range(0.0..0.3)
                };
            }
            labels.push(class);
        }
        let cfg = HeadTrainConfig {
            epochs: 10,
            minibatch: 16,
            optimizer: OptimizerConfig::adam(0.05),
        };
        let (head, _) = train_head_on_features(features.view(), &labels, 2, &cfg, &mut rng).unwrap();
        let mut correct = 0;
        for i in 0..2 * n {
            let y = FeatureVector::new(features.row(i).to_vec()).unwrap();
            if classify(&y, &head).unwrap().argmax() == labels[i] {
                correct += 1;
            }
        }
        let acc = correct as f64 / (2 * n) as f64;
        assert!(acc >= 0.99, "training accuracy {acc}");
    }

    #[test]
    fn m_step_freezes_head_and_zero_lr_freezes_bank() {
        let store = fixtures::synthetic_image_store(2, 48, 48, 203);
        let cfg = fast_cfg(4);
        let mut rng = derive_rng(4, 5);
        let mut bank = ConvFeatureBank::random(small_shape(), 3, &mut rng);
        let task = build_task(SampleSource::Rgb(&store), &small_sampler(3), &mut rng).unwrap();
        let (x_e, x_m) = split_em(&task, 0.5, &mut rng).unwrap();
        let (head, _) = e_step(&bank, &x_e, &cfg, &mut rng).unwrap();

        let head_before = head.clone();
        let bank_before = bank_bytes(&bank);
        let mut zero_opt = OptimizerConfig::sgd(0.0).state_for(bank.param_count());
        m_step(&mut bank, &head, &x_m, &cfg, &mut zero_opt, &mut rng).unwrap();
        assert_eq!(head, head_before);
        assert_eq!(bank_bytes(&bank), bank_before, "zero lr must not move the bank");

        let mut real_opt = cfg.bank_optimizer.state_for(bank.param_count());
        m_step(&mut bank, &head, &x_m, &cfg, &mut real_opt, &mut rng).unwrap();
        assert_eq!(head, head_before);
        assert_ne!(bank_bytes(&bank), bank_before);
    }

    #[test]
    fn full_batch_descent_reduces_loss() {
        use crate::nn::batch_loss;
        let store = fixtures::synthetic_image_store(2, 48, 48, 204);
        let mut rng = derive_rng(5, 5);
        let mut bank = ConvFeatureBank::random(small_shape(), 3, &mut rng);
        let task = build_task(SampleSource::Rgb(&store), &small_sampler(3), &mut rng).unwrap();
        let (x_e, x_m) = split_em(&task, 0.5, &mut rng).unwrap();
        let cfg_e = fast_cfg(5);
        let (head, _) = e_step(&bank, &x_e, &cfg_e, &mut rng).unwrap();

        let pairs = x_m.pairs();
        let before = batch_loss(&pairs, x_m.classes, &bank, &head).unwrap();
        let cfg = TrainerConfig {
            epochs_m: 1,
            minibatch: pairs.len(), // full batch
            bank_optimizer: OptimizerConfig::sgd(1e-4),
            ..fast_cfg(5)
        };
        let mut opt = cfg.bank_optimizer.state_for(bank.param_count());
        m_step(&mut bank, &head, &x_m, &cfg, &mut opt, &mut rng).unwrap();
        let after = batch_loss(&pairs, x_m.classes, &bank, &head).unwrap();
        assert!(
            after <= before + 1e-9,
            "full-batch small-step SGD must not increase the loss: {before} -> {after}"
        );
    }

    #[test]
    fn trace_is_append_only_and_bounded() {
        let store = fixtures::synthetic_image_store(2, 48, 48, 205);
        let cfg = TrainerConfig { max_iterations: 1, ..fast_cfg(6) };
        let (_, trace) = train_cgcnn(
            SampleSource::Rgb(&store),
            &small_sampler(3),
            small_shape(),
            &cfg,
        )
        .unwrap();
        assert_eq!(trace.len(), 1);
        assert_eq!(trace.records()[0].iteration, 1);
    }

    #[test]
    fn training_is_bit_reproducible() {
        let store = fixtures::synthetic_image_store(2, 48, 48, 206);
        let cfg = fast_cfg(7);
        let run = || {
            train_cgcnn(
                SampleSource::Rgb(&store),
                &small_sampler(3),
                small_shape(),
                &cfg,
            )
            .unwrap()
        };
        let (bank_a, trace_a) = run();
        let (bank_b, trace_b) = run();
        assert_eq!(bank_bytes(&bank_a), bank_bytes(&bank_b));
        let key = |t: &TrainingTrace| -> Vec<(usize, u64, u64, u64)> {
            t.records()
                .iter()
                .map(|r| (r.iteration, r.accuracy.to_bits(), r.loss_e.to_bits(), r.loss_m.to_bits()))
                .collect()
        };
        assert_eq!(key(&trace_a), key(&trace_b));
    }

    #[test]
    fn accuracy_improves_on_oriented_bars() {
        let store = fixtures::oriented_bar_images(4, 160, 40, 207);
        let sampler = SamplerConfig {
            groups: 10,
            per_group: 12,
            patch_side: 9,
            channels: 3,
            slide_radius: 6,
            gray_probability: 0.3,
            jitter_amplitude: 0.1,
            mode: SampleMode::Rgb,
        };
        let shape = BankShape { features: 8, kernel: 5, stride: 2 };
        let cfg = TrainerConfig {
            epochs_e: 8,
            epochs_m: 2,
            minibatch: 30,
            max_iterations: 20,
            convergence_window: 50, // effectively off
            convergence_threshold: 0.0,
            head_optimizer: OptimizerConfig::adam(5e-3),
            bank_optimizer: OptimizerConfig::adam(2e-3),
            e_fraction: 0.5,
            checkpoint_every: 0,
            seed: 77,
        };
        let (_, trace) = train_cgcnn(SampleSource::Rgb(&store), &sampler, shape, &cfg).unwrap();
        assert_eq!(trace.len(), 20);
        let accs: Vec<f64> = trace.accuracies().collect();
        let early = (accs[0] + accs[1]) / 2.0;
        let late = accs[15..20].iter().sum::<f64>() / 5.0;
        assert!(
            late > early,
            "accuracy should improve over EM iterations: early {early:.3}, late {late:.3}"
        );
    }

    #[test]
    fn convergence_detector_matches_hand_ranges() {
        let mut trace = TrainingTrace::new();
        for (i, a) in [0.2, 0.5, 0.8, 0.81, 0.805].iter().enumerate() {
            trace.push(IterationRecord {
                iteration: i + 1,
                accuracy: *a,
                loss_e: 0.0,
                loss_m: 0.0,
                seconds: 0.0,
            });
        }
        assert!(has_converged(&trace, 3, 0.02)); // range 0.01 over last 3
        assert!(!has_converged(&trace, 4, 0.02));
        assert!(!has_converged(&trace, 6, 0.5)); // shorter than window
        let mut flat = TrainingTrace::new();
        for i in 0..4 {
            flat.push(IterationRecord {
                iteration: i + 1,
                accuracy: 0.5,
                loss_e: 0.0,
                loss_m: 0.0,
                seconds: 0.0,
            });
        }
        assert!(has_converged(&flat, 4, 1e-9));
    }

    #[test]
    fn csv_has_expected_header_and_rows() {
        let mut trace = TrainingTrace::new();
        trace.push(IterationRecord {
            iteration: 1,
            accuracy: 0.25,
            loss_e: 1.5,
            loss_m: 1.25,
            seconds: 0.5,
        });
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "iteration,A,loss_E,loss_M,seconds");
        assert_eq!(lines.next().unwrap(), "1,0.25,1.5,1.25,0.5");
    }
}
