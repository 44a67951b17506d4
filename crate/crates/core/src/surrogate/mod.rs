//! Synthetic, differentiable stand-in for visual-odometry training.
//!
//! Sequences are generated with a controlled motion difficulty, a small
//! regressor predicts per-frame motion from noisy observations, and any
//! scheduler drives the hierarchical loss during training.

pub mod data;
pub mod dual;
pub mod model;
pub mod train;

pub use data::{generate_dataset, stratified_split, Camera, DatasetSpec, Split, SyntheticDataset, SyntheticSequence};
pub use model::{model_loss, ModelLoss, SurrogateModel, Window};
pub use train::{run_training, run_training_with, TrainConfig, TrainingOutcome, TrainingRecord};
