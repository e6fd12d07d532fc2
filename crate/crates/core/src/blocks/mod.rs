//! The five block families, toy model assembly and the checkpoint format.

pub mod checkpoint;
pub mod layers;
mod model;
mod spec;
mod units;

pub use checkpoint::{read_checkpoint, write_checkpoint};
pub use layers::{apply_stat_updates, Forward, StatUpdate};
pub use model::{build_toy_model, Layer, ModelConfig, ModelGraph};
pub use spec::{BlockKind, BlockSpec, ProjectionPolicy};
pub use units::{
    Block, DenseBlock, DenseLayer, InceptionResnetModule, InvertedResidualBlock, PreactResidualUnit, Shortcut,
    TransitionLayer, XceptionSepBlock,
};
