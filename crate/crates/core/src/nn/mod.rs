//! Dense networks: forward inference with per-layer capture and an SGD trainer.

mod layer;
mod network;
mod tensor;
mod train;

pub use layer::{softmax_in_place, Activation, DenseLayer};
pub use network::{argmax, ForwardTrace, LabeledSet, Network};
pub use tensor::Tensor;
pub use train::{loss_and_gradients, mean_loss, train_sgd, Gradients, TrainConfig};
