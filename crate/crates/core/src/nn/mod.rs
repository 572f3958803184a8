//! Small image classifiers built from convolution or gain layers, trained
//! with Adam.

mod adam;
mod layers;
mod model;
mod train;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use layers::*;
pub use model::{build_lenet, build_wavelenet, LayerSpec, Model, ModelConfig, Precision, Step};
pub use train::{evaluate, train, EpochMetrics, RunMetrics, TrainConfig};
