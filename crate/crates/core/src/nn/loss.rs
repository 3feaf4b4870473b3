//! Negative log-likelihood loss over a batch and its exact analytic
//! gradients for the conv -> ReLU -> maxpool -> softmax topology.
//!
//! The loss is the mean per-example cross entropy. Gradients flow through
//! the softmax head as `z - r`, through max pooling only at the argmax
//! position of each pooled entry (first position in raster order on ties),
//! through the ReLU gate, and accumulate into the filters by transposed
//! convolution. Frozen parameter groups receive exact zeros.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::nn::forward::{conv_forward, head_logits, maxpool_with_argmax, relu, softmax};
use crate::nn::types::{ClassifierHead, ConvFeatureBank, GradientSet, Patch};

/// Probabilities below this floor are clamped inside the log.
pub const LOG_FLOOR: f64 = 1e-12;

/// Fixed reduction chunk size so gradient accumulation order does not
/// depend on the thread count.
const REDUCE_CHUNK: usize = 8;

#[derive(Debug, Clone)]
pub struct LossOutput {
    pub loss: f64,
    pub grads: GradientSet,
    /// Number of examples whose true-class probability hit the log floor.
    pub clamped: usize,
}

/// Mean loss and gradients over a batch of `(patch, class)` examples.
pub fn loss_and_grads(
    batch: &[(&Patch, usize)],
    num_classes: usize,
    bank: &ConvFeatureBank,
    head: &ClassifierHead,
    freeze_bank: bool,
    freeze_head: bool,
) -> Result<LossOutput> {
    if batch.is_empty() {
        return Err(Error::Config("empty batch".into()));
    }
    if let Some((_, c)) = batch.iter().find(|(_, c)| *c >= num_classes) {
        return Err(Error::Config(format!(
            "label {c} out of range for {num_classes} classes"
        )));
    }
    if head.classes() != num_classes {
        return Err(Error::Shape(format!(
            "head has {} rows, task has {num_classes} classes",
            head.classes()
        )));
    }

    let chunks: Vec<Result<(f64, usize, GradientSet)>> = batch
        .par_chunks(REDUCE_CHUNK)
        .map(|chunk| {
            let mut acc = GradientSet::zeros_like(bank, head);
            let mut loss = 0.0;
            let mut clamped = 0;
            for (x, label) in chunk {
                let (l, c) =
                    example_backward(x, *label, bank, head, freeze_bank, freeze_head, &mut acc)?;
                loss += l;
                clamped += c;
            }
            Ok((loss, clamped, acc))
        })
        .collect();

    let mut total = GradientSet::zeros_like(bank, head);
    let mut loss_sum = 0.0;
    let mut clamped = 0;
    for chunk in chunks {
        let (l, c, g) = chunk?;
        loss_sum += l;
        clamped += c;
        total.add_assign(&g);
    }
    let n = batch.len() as f64;
    total.scale(1.0 / n);
    Ok(LossOutput { loss: loss_sum / n, grads: total, clamped })
}

/// Forward-only mean loss of a batch (used by numerical checks and
/// divergence monitoring).
pub fn batch_loss(
    batch: &[(&Patch, usize)],
    num_classes: usize,
    bank: &ConvFeatureBank,
    head: &ClassifierHead,
) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::Config("empty batch".into()));
    }
    let mut loss = 0.0;
    for (x, label) in batch {
        if *label >= num_classes {
            return Err(Error::Config(format!(
                "label {label} out of range for {num_classes} classes"
            )));
        }
        let pre = conv_forward(x, bank)?;
        let act = relu(&pre);
        let (pooled, _) = maxpool_with_argmax(&act)?;
        let y = pooled.as_slice().expect("pooled is contiguous");
        let z = softmax(&head_logits(y, head))?;
        loss += -z.probs()[*label].max(LOG_FLOOR).ln();
    }
    Ok(loss / batch.len() as f64)
}

/// One example's loss plus unnormalized gradient accumulation into `acc`.
fn example_backward(
    x: &Patch,
    label: usize,
    bank: &ConvFeatureBank,
    head: &ClassifierHead,
    freeze_bank: bool,
    freeze_head: bool,
    acc: &mut GradientSet,
) -> Result<(f64, usize)> {
    let pre = conv_forward(x, bank)?;
    let act = relu(&pre);
    let (pooled, arg) = maxpool_with_argmax(&act)?;
    let y = pooled.as_slice().expect("pooled is contiguous");
    let z = softmax(&head_logits(y, head))?;

    let p_true = z.probs()[label];
    let clamped = usize::from(p_true < LOG_FLOOR);
    let loss = -p_true.max(LOG_FLOOR).ln();

    // d loss / d logit_l = z_l - r_l
    let mut dlogits = z.probs().to_vec();
    dlogits[label] -= 1.0;

    let c = head.classes();
    let feat = y.len();
    if !freeze_head {
        let dh = acc.d_head.as_slice_mut().expect("head grad is contiguous");
        for l in 0..c {
            let g = dlogits[l];
            if g == 0.0 {
                continue;
            }
            let row = &mut dh[l * feat..(l + 1) * feat];
            for q in 0..feat {
                row[q] += g * y[q];
            }
        }
    }

    if !freeze_bank {
        // dy = head^T · dlogits
        let ws = head.weights_slice();
        let mut dy = vec![0.0; feat];
        for l in 0..c {
            let g = dlogits[l];
            if g == 0.0 {
                continue;
            }
            let row = &ws[l * feat..(l + 1) * feat];
            for q in 0..feat {
                dy[q] += g * row[q];
            }
        }

        let (m, _, d) = pre.dim();
        let a = x.side();
        let b = x.channels();
        let w = bank.kernel();
        let s = bank.stride();
        let xs = x.data().as_slice().expect("patch is contiguous");
        let pres = pre.as_slice().expect("pre-activation is contiguous");
        let df = acc.d_filters.as_slice_mut().expect("filter grad is contiguous");
        let db = acc.d_biases.as_slice_mut().expect("bias grad is contiguous");
        let row_len = w * b;

        // Pooling routes each pooled gradient to a single conv position;
        // the ReLU gate passes it only where the pre-activation is positive.
        for (flat, g) in dy.iter().enumerate() {
            if *g == 0.0 {
                continue;
            }
            let k = flat % d;
            let pos = arg[flat];
            if pres[pos * d + k] <= 0.0 {
                continue;
            }
            let (ci, cj) = (pos / m, pos % m);
            db[k] += g;
            let f_base = k * w * row_len;
            for r in 0..w {
                let x_off = ((ci * s + r) * a + cj * s) * b;
                let f_off = f_base + r * row_len;
                let xrow = &xs[x_off..x_off + row_len];
                let frow = &mut df[f_off..f_off + row_len];
                for q in 0..row_len {
                    frow[q] += g * xrow[q];
                }
            }
        }
    }

    Ok((loss, clamped))
}
