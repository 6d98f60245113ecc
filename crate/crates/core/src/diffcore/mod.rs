//! Reverse-mode differentiation, MLPs, Adam and a finite-difference checker.

mod adam;
mod gradcheck;
mod mlp;
mod tape;
mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use gradcheck::grad_check;
pub use mlp::{Mlp, MlpNodes, OutputActivation};
pub use tape::{Gradients, NodeId, Tape};
pub use tensor::Tensor;

pub(crate) use tape::softplus;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DiffError {
    #[error("shape mismatch in {context}: expected {expected}, got {actual}")]
    ShapeMismatch {
        context: &'static str,
        expected: String,
        actual: String,
    },
    #[error("loss must be a scalar, got shape {shape:?}")]
    NonScalarLoss { shape: Vec<usize> },
    #[error("non-finite gradient in parameter tensor {tensor} at element {index}")]
    NonFiniteGradient { tensor: usize, index: usize },
}
