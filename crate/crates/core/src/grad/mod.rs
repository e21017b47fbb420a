//! Minimal reverse-mode differentiation for the visual encoder.
//!
//! Only the layers the encoder needs exist here: 2-D convolution, ReLU,
//! 2x2 max pooling, global average pooling, a dense layer, an element-wise
//! sigmoid and binary cross entropy. Everything is generic over [`Real`] so
//! the gradient checks can run in 64-bit while training runs in 32-bit.

mod adam;
pub mod ops;
mod real;
mod tape;
mod tensor;

pub use adam::{Adam, AdamConfig};
pub use real::Real;
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GradError {
    #[error("{op}: shape mismatch between {left:?} and {right:?}")]
    ShapeMismatch {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("{op}: {reason}")]
    InvalidArgument { op: &'static str, reason: String },
    #[error("backward requires a scalar loss, got shape {0:?}")]
    NonScalarLoss(Vec<usize>),
    #[error("variable {0} does not belong to this tape")]
    UnknownVar(usize),
}

pub type Result<T> = std::result::Result<T, GradError>;

pub(crate) fn invalid(op: &'static str, reason: impl Into<String>) -> GradError {
    GradError::InvalidArgument {
        op,
        reason: reason.into(),
    }
}
