//! Tweet stance classification: hashed text features, a two-plane ordinal
//! linear SVM (Buy-vs-rest and Sell-vs-rest) and blocked cross-validation.

mod eval;
mod features;
mod model;
mod train;

use thiserror::Error;

pub use eval::{
    blocked_cv, f1_buy_sell, fold_blocks, Confusion, EvalReport, FoldMetrics, LabeledExample,
    MeanStd,
};
pub use features::{featurize, fnv1a64, tokenize, FeatureHasher, FeatureVector};
pub use model::{decide, Plane, PlaneScores, TwoPlaneModel};
pub use train::{train_two_plane, TrainParams};

#[derive(Debug, Error, PartialEq)]
pub enum StanceError {
    #[error("feature dimension must be a power of two >= 1024, got {0}")]
    InvalidDimension(usize),
    #[error("invalid training parameters: {0}")]
    InvalidParams(String),
    #[error("dimension mismatch: model has {expected}, vector has {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("training data is empty")]
    EmptyTraining,
    #[error("need at least k={k} examples for cross-validation, got {n}")]
    TooFewExamples { n: usize, k: usize },
    #[error("examples are not in time order (first violation at index {index})")]
    Unsorted { index: usize },
    #[error("model file line {line}: {reason}")]
    ModelFormat { line: usize, reason: String },
}
