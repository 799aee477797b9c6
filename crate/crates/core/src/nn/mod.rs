//! Minimal dense/convolutional network kernel: forward/backward passes,
//! losses, Adam, gradient verification, and weight persistence.

pub mod adam;
pub mod gradcheck;
pub mod io;
pub mod loss;
pub mod network;
pub mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use gradcheck::{grad_check, LossKind};
pub use io::{load_weights, save_weights, NamedTensor};
pub use loss::{bce_loss, mse_loss};
pub use network::{Activation, Gradients, LayerParams, LayerSpec, Network, NetworkSpec};
pub use tensor::Tensor;
