//! Training harnesses that keep their weights in simulated DAM cells.

pub mod dataset;
pub mod network;

pub mod perceptron;

pub use dataset::{make_dataset_with_truth, make_separable_dataset, LabeledPoint, SeparableDataset};
pub use perceptron::{
    decision_fn, gradient_to_pulses, hinge_gradient, hinge_loss, train_perceptron, TrainerConfig,
    TrainingTrace,
};
