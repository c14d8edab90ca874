//! Minimal differentiable classifier: matrices, an MLP with hand-written
//! gradients, cross-entropy, and Adam.

pub mod loss;
pub mod matrix;
pub mod model;
pub mod optim;
pub mod train;

pub use loss::{cross_entropy_loss, log_sum_exp, one_hot, softmax, softmax_with_temperature};
pub use matrix::{argmax, Matrix};
pub use model::{Activation, Dense, Gradients, Model};
pub use optim::{backward_and_step, AdamConfig, OptimizerState};
pub use train::train_epochs;
