//! Forward pass of the feature generator and the softmax head.
//!
//! The generator is convolution (cross-correlation, no kernel flip, valid
//! padding) at stride `s`, then ReLU, then 3x3/stride-2 max pooling. For the
//! canonical geometries (`a = w + 2s`) the pooled map is 1x1xd and collapses
//! to a d-vector; larger maps are flattened in raster order.

use ndarray::Array3;

use crate::error::{Error, Result};
use crate::nn::types::{argmax, ClassifierHead, ConvFeatureBank, FeatureVector, Patch, ProbVector};

pub const POOL_KERNEL: usize = 3;
pub const POOL_STRIDE: usize = 2;

/// Spatial side of the convolution output for input side `a`.
pub fn conv_output_side(a: usize, w: usize, s: usize) -> Result<usize> {
    if a < w {
        return Err(Error::Shape(format!("patch side {a} smaller than kernel {w}")));
    }
    Ok((a - w) / s + 1)
}

/// Pre-activation map (m x m x d) of the bank applied to a patch.
///
/// `out[i, j, k] = bias_k + sum over the w x w x b window at (i*s, j*s)` of
/// `filter_k` times the input.
pub fn conv_forward(x: &Patch, bank: &ConvFeatureBank) -> Result<Array3<f64>> {
    let a = x.side();
    let b = x.channels();
    let w = bank.kernel();
    let s = bank.stride();
    let d = bank.features();
    if b != bank.channels() {
        return Err(Error::Shape(format!(
            "patch has {b} channels, bank expects {}",
            bank.channels()
        )));
    }
    let m = conv_output_side(a, w, s)?;

    let xs = x.data().as_slice().expect("patch is contiguous");
    let fs = bank.filters_slice();
    let biases = bank.biases_slice();
    let mut out = Array3::zeros((m, m, d));
    let os = out.as_slice_mut().expect("output is contiguous");

    let row_len = w * b; // one kernel row is contiguous in both tensors
    for i in 0..m {
        for j in 0..m {
            let out_base = (i * m + j) * d;
            for k in 0..d {
                let mut acc = biases[k];
                let f_base = k * w * row_len;
                for r in 0..w {
                    let x_off = ((i * s + r) * a + j * s) * b;
                    let f_off = f_base + r * row_len;
                    let xrow = &xs[x_off..x_off + row_len];
                    let frow = &fs[f_off..f_off + row_len];
                    for q in 0..row_len {
                        acc += xrow[q] * frow[q];
                    }
                }
                os[out_base + k] = acc;
            }
        }
    }
    Ok(out)
}

/// Elementwise `max(v, 0)`.
pub fn relu(map: &Array3<f64>) -> Array3<f64> {
    map.mapv(|v| v.max(0.0))
}

/// 3x3 stride-2 max pooling per feature channel.
pub fn maxpool(map: &Array3<f64>) -> Result<Array3<f64>> {
    Ok(maxpool_with_argmax(map)?.0)
}

/// Max pooling that also records, per pooled entry, the flat (row*m + col)
/// index of the winning position in the input map. Ties keep the first
/// position in raster order.
pub fn maxpool_with_argmax(map: &Array3<f64>) -> Result<(Array3<f64>, Vec<usize>)> {
    let (m, m2, d) = map.dim();
    if m != m2 {
        return Err(Error::Shape(format!("pool input must be square, got {m}x{m2}")));
    }
    if m < POOL_KERNEL {
        return Err(Error::Shape(format!(
            "pool input side {m} smaller than kernel {POOL_KERNEL}"
        )));
    }
    let mp = (m - POOL_KERNEL) / POOL_STRIDE + 1;
    let ms = map.as_slice().expect("map is contiguous");
    let mut out = Array3::zeros((mp, mp, d));
    let os = out.as_slice_mut().expect("output is contiguous");
    let mut arg = vec![0usize; mp * mp * d];

    for pi in 0..mp {
        for pj in 0..mp {
            let out_base = (pi * mp + pj) * d;
            for k in 0..d {
                let mut best = f64::NEG_INFINITY;
                let mut best_pos = 0usize;
                for r in 0..POOL_KERNEL {
                    let row = pi * POOL_STRIDE + r;
                    for c in 0..POOL_KERNEL {
                        let col = pj * POOL_STRIDE + c;
                        let v = ms[(row * m + col) * d + k];
                        if v > best {
                            best = v;
                            best_pos = row * m + col;
                        }
                    }
                }
                os[out_base + k] = best;
                arg[out_base + k] = best_pos;
            }
        }
    }
    Ok((out, arg))
}

/// Full feature generator: conv -> ReLU -> maxpool, flattened to a vector.
pub fn feature_forward(x: &Patch, bank: &ConvFeatureBank) -> Result<FeatureVector> {
    let pre = conv_forward(x, bank)?;
    let act = relu(&pre);
    let (pooled, _) = maxpool_with_argmax(&act)?;
    let values = pooled.into_raw_vec_and_offset().0;
    Ok(FeatureVector::from_raw(values))
}

/// Softmax probabilities of the head over a feature vector, computed with
/// max-logit subtraction.
pub fn classify(y: &FeatureVector, head: &ClassifierHead) -> Result<ProbVector> {
    if y.len() != head.input_len() {
        return Err(Error::Shape(format!(
            "feature vector length {} does not match head width {}",
            y.len(),
            head.input_len()
        )));
    }
    let logits = head_logits(y.values(), head);
    softmax(&logits)
}

pub(crate) fn head_logits(y: &[f64], head: &ClassifierHead) -> Vec<f64> {
    let c = head.classes();
    let d = head.input_len();
    let ws = head.weights_slice();
    let mut logits = vec![0.0; c];
    for (l, logit) in logits.iter_mut().enumerate() {
        let row = &ws[l * d..(l + 1) * d];
        let mut acc = 0.0;
        for q in 0..d {
            acc += row[q] * y[q];
        }
        *logit = acc;
    }
    logits
}

pub(crate) fn softmax(logits: &[f64]) -> Result<ProbVector> {
    if !logits.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("softmax logits".into()));
    }
    let max = logits[argmax(logits)];
    let mut probs: Vec<f64> = logits.iter().map(|v| (v - max).exp()).collect();
    let sum: f64 = probs.iter().sum();
    for p in &mut probs {
        *p /= sum;
    }
    Ok(ProbVector::from_raw(probs))
}
