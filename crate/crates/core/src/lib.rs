//! Desk-scale convolutional classifiers built from five residual/separable
//! block families, trained with Adam on categorical cross-entropy, combined by
//! a weighted-average ensemble whose weights live on the probability simplex,
//! and scored with confusion-matrix metrics and ROC/AUC.

pub mod blocks;
pub mod data;
pub mod ensemble;
pub mod error;
pub mod metrics;
pub mod optim;
pub mod tensor;

pub use blocks::{BlockKind, ModelConfig, ModelGraph};
pub use data::Dataset;
pub use error::{Error, Result};
pub use tensor::{ParamId, ParamStore, Parameter, Scalar, Tape, Tensor, Var};
