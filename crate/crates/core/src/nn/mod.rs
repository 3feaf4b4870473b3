//! Dense numerical primitives for the three-layer network: convolution,
//! ReLU, max pooling, softmax classification, the batch loss with exact
//! analytic gradients, and SGD/Adam updates.

mod bank_io;
mod forward;
mod loss;
mod optim;
mod types;

pub use bank_io::{bank_bytes, load_bank, load_bank_from_path, save_bank, save_bank_to_path};
pub use forward::{
    classify, conv_forward, conv_output_side, feature_forward, maxpool, maxpool_with_argmax, relu,
    POOL_KERNEL, POOL_STRIDE,
};
pub use loss::{batch_loss, loss_and_grads, LossOutput, LOG_FLOOR};
pub use optim::{optimizer_step, OptimizerAlgo, OptimizerConfig, OptimizerKind, OptimizerState};
pub use types::{
    argmax, BankShape, ClassifierHead, ConvFeatureBank, FeatureVector, GradientSet, Patch,
    ProbVector,
};
