//! Pluripotency quantification and frozen-feature downstream benchmarks.

mod hsi_bench;
mod knn;
mod metrics;
mod probe;
mod texture;
mod utility;

pub use hsi_bench::{hsi_benchmark, labeled_pixel_features, HsiBenchConfig};
pub use knn::knn_classify;
pub use metrics::{stratified_folds, BenchResult, ClassMetrics};
pub use probe::{
    eval_frozen, eval_frozen_on_split, eval_specific, eval_specific_on_split, JointTrainConfig,
};
pub use texture::{texture_benchmark, TextureBenchConfig, TextureBenchOutput};
pub use utility::{
    transfer_utility, utility_curves, BankKind, UtilityConfig, UtilityCurve, UtilityPoint,
    UtilityReport,
};
