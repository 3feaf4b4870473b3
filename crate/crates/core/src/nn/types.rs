//! Value types for the three-layer network: input patches, the
//! convolutional feature bank, feature/probability vectors, the softmax
//! head, and gradient carriers.

use ndarray::{Array1, Array2, Array3, Array4};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// An `a x a x b` input window, indexed by (row, column, channel).
#[derive(Debug, Clone, PartialEq)]
pub struct Patch {
    data: Array3<f64>,
}

impl Patch {
    pub fn new(data: Array3<f64>) -> Result<Self> {
        let (h, w, _) = data.dim();
        if h != w {
            return Err(Error::Shape(format!("patch must be square, got {h}x{w}")));
        }
        if !data.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("patch".into()));
        }
        Ok(Self { data })
    }

    pub fn side(&self) -> usize {
        self.data.dim().0
    }

    pub fn channels(&self) -> usize {
        self.data.dim().2
    }

    pub fn data(&self) -> &Array3<f64> {
        &self.data
    }
}

/// Shape of a feature bank: `features` kernels of size `kernel x kernel`
/// applied at `stride`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BankShape {
    pub features: usize,
    pub kernel: usize,
    pub stride: usize,
}

/// The transferable artifact: `d` convolution filters (each `w x w x b`)
/// with one bias per filter, applied at a fixed stride.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvFeatureBank {
    filters: Array4<f64>, // (feature, row, column, channel)
    biases: Array1<f64>,
    stride: usize,
}

impl ConvFeatureBank {
    pub fn new(filters: Array4<f64>, biases: Array1<f64>, stride: usize) -> Result<Self> {
        let (d, kh, kw, _b) = filters.dim();
        if d == 0 || kh == 0 || kh != kw {
            return Err(Error::Shape(format!(
                "filters must be (d, w, w, b) with d,w >= 1, got {:?}",
                filters.dim()
            )));
        }
        if biases.len() != d {
            return Err(Error::Shape(format!(
                "expected {d} biases, got {}",
                biases.len()
            )));
        }
        if stride == 0 {
            return Err(Error::Config("stride must be >= 1".into()));
        }
        if !filters.iter().chain(biases.iter()).all(|v| v.is_finite()) {
            return Err(Error::NonFinite("feature bank".into()));
        }
        Ok(Self { filters, biases, stride })
    }

    /// Fan-in scaled Gaussian filters (std `sqrt(2 / (w*w*b))`), zero biases.
    pub fn random<R: Rng>(shape: BankShape, channels: usize, rng: &mut R) -> Self {
        let BankShape { features, kernel, stride } = shape;
        let std = (2.0 / (kernel * kernel * channels) as f64).sqrt();
        let normal = Normal::new(0.0, std).expect("valid std");
        let filters = Array4::from_shape_simple_fn(
            (features, kernel, kernel, channels),
            || normal.sample(rng),
        );
        Self {
            filters,
            biases: Array1::zeros(features),
            stride,
        }
    }

    pub fn features(&self) -> usize {
        self.filters.dim().0
    }

    pub fn kernel(&self) -> usize {
        self.filters.dim().1
    }

    pub fn channels(&self) -> usize {
        self.filters.dim().3
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn shape(&self) -> BankShape {
        BankShape {
            features: self.features(),
            kernel: self.kernel(),
            stride: self.stride,
        }
    }

    pub fn filters(&self) -> &Array4<f64> {
        &self.filters
    }

    pub fn biases(&self) -> &Array1<f64> {
        &self.biases
    }

    /// Flat (feature, row, column, channel) view of the filters.
    pub fn filters_slice(&self) -> &[f64] {
        self.filters.as_slice().expect("filters are contiguous")
    }

    pub fn filters_slice_mut(&mut self) -> &mut [f64] {
        self.filters.as_slice_mut().expect("filters are contiguous")
    }

    pub fn biases_slice(&self) -> &[f64] {
        self.biases.as_slice().expect("biases are contiguous")
    }

    pub fn biases_slice_mut(&mut self) -> &mut [f64] {
        self.biases.as_slice_mut().expect("biases are contiguous")
    }

    /// Both trainable groups, (filters, biases), borrowed together.
    pub fn params_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        (
            self.filters.as_slice_mut().expect("filters are contiguous"),
            self.biases.as_slice_mut().expect("biases are contiguous"),
        )
    }

    pub fn param_count(&self) -> usize {
        self.filters.len() + self.biases.len()
    }
}

/// Output of the feature generator: non-negative pooled responses.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if !values.iter().all(|v| v.is_finite() && *v >= 0.0) {
            return Err(Error::NonFinite("feature vector (negative or non-finite)".into()));
        }
        Ok(Self { values })
    }

    pub(crate) fn from_raw(values: Vec<f64>) -> Self {
        debug_assert!(values.iter().all(|v| v.is_finite() && *v >= 0.0));
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Task-specific softmax weights: one row of length `d` per class, no bias.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierHead {
    weights: Array2<f64>, // (class, feature)
}

impl ClassifierHead {
    pub fn new(weights: Array2<f64>) -> Result<Self> {
        if weights.nrows() == 0 || weights.ncols() == 0 {
            return Err(Error::Shape("head must be C x d with C,d >= 1".into()));
        }
        if !weights.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("classifier head".into()));
        }
        Ok(Self { weights })
    }

    /// Gaussian init with std `sigma`.
    pub fn random<R: Rng>(classes: usize, input_len: usize, sigma: f64, rng: &mut R) -> Self {
        let normal = Normal::new(0.0, sigma).expect("valid std");
        let weights = Array2::from_shape_simple_fn((classes, input_len), || normal.sample(rng));
        Self { weights }
    }

    pub fn classes(&self) -> usize {
        self.weights.nrows()
    }

    pub fn input_len(&self) -> usize {
        self.weights.ncols()
    }

    pub fn weights(&self) -> &Array2<f64> {
        &self.weights
    }

    pub fn weights_slice(&self) -> &[f64] {
        self.weights.as_slice().expect("head is contiguous")
    }

    pub fn weights_slice_mut(&mut self) -> &mut [f64] {
        self.weights.as_slice_mut().expect("head is contiguous")
    }
}

/// Softmax output over the task classes.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbVector {
    probs: Vec<f64>,
}

impl ProbVector {
    pub(crate) fn from_raw(probs: Vec<f64>) -> Self {
        Self { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// Index of the largest probability; ties go to the lowest index.
    pub fn argmax(&self) -> usize {
        argmax(&self.probs)
    }
}

/// First index of the maximum value (strictly-greater scan).
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Gradients for every trainable parameter group; shapes mirror the
/// parameters. Frozen groups carry zeros.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    pub d_filters: Array4<f64>,
    pub d_biases: Array1<f64>,
    pub d_head: Array2<f64>,
}

impl GradientSet {
    pub fn zeros_like(bank: &ConvFeatureBank, head: &ClassifierHead) -> Self {
        Self {
            d_filters: Array4::zeros(bank.filters().dim()),
            d_biases: Array1::zeros(bank.features()),
            d_head: Array2::zeros(head.weights().dim()),
        }
    }

    pub fn scale(&mut self, factor: f64) {
        self.d_filters.mapv_inplace(|v| v * factor);
        self.d_biases.mapv_inplace(|v| v * factor);
        self.d_head.mapv_inplace(|v| v * factor);
    }

    pub fn add_assign(&mut self, other: &GradientSet) {
        self.d_filters += &other.d_filters;
        self.d_biases += &other.d_biases;
        self.d_head += &other.d_head;
    }

    pub fn is_finite(&self) -> bool {
        self.d_filters.iter().all(|v| v.is_finite())
            && self.d_biases.iter().all(|v| v.is_finite())
            && self.d_head.iter().all(|v| v.is_finite())
    }
}
