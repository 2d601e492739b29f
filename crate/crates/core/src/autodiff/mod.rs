//! Reverse-mode automatic differentiation over dense `f64` tensors.
//!
//! A [`Graph`] is a tape that is rebuilt for every training step. Gradients
//! are produced by appending adjoint operations to the same tape, so with
//! `create_graph` enabled a gradient can itself be differentiated. The
//! gradient penalty of the critic objective needs exactly that.

mod graph;
pub(crate) mod kernels;
mod tensor;

pub use graph::{GradOptions, Graph, UpsampleMode, Var};
pub use tensor::Tensor;
