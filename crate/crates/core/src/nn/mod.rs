//! Layers, network assembly, datasets and the mini-batch SGD training loop.

mod data;
mod layer;
mod network;
pub mod synthetic;
mod train;
mod weights;

pub use data::{split, Dataset};
pub use layer::Layer;
pub use network::{argmax, Forward, Network};
pub use train::{evaluate, train, EpochMetrics, Metrics, TrainConfig};
pub use weights::{load_weights, save_weights, WEIGHTS_MAGIC};
