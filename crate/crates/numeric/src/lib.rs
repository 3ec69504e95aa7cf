//! Numeric substrate for the tracker: row-major `f64` tensors, a
//! reverse-mode differentiation tape, MLP layers, Adam and a checkpoint
//! container.

pub mod adam;
pub mod checkpoint;
mod error;
pub mod mlp;
pub mod ops;
pub mod tape;
pub mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use checkpoint::Checkpoint;
pub use error::{NumericError, Result};
pub use mlp::{Activation, BoundMlp, InputPart, Layer, Mlp};
pub use ops::{focal_bce, kl_divergence, log_softmax, softmax, PROB_CLAMP};
pub use tape::{sigmoid, Gradients, Tape, Var};
pub use tensor::Tensor2D;
