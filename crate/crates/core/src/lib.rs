//! Contextually guided convolutional feature learning.
//!
//! A single convolution + ReLU + maxpool layer is trained without labels by
//! discriminating "contextual groups": sets of image windows slid within a
//! small radius of a random seed position, optionally re-colored, treated as
//! one class. An EM-style loop alternates between fitting a fresh softmax
//! head on frozen features (E-step) and updating the features under the
//! frozen head (M-step), carrying the features across tasks. The crate also
//! ships the evaluation machinery: transfer-utility curves against random
//! and task-specific feature banks, a texture patch benchmark, and a
//! hyperspectral pixel benchmark.

pub mod error;
pub mod eval;
pub mod fixtures;
pub mod nn;
pub mod rng;
pub mod sampler;
pub mod trainer;

pub use error::{Error, Result};
