//! Dense tensors and reverse-mode differentiation.

mod gradcheck;
mod graph;
mod tensor;

pub use gradcheck::{gradient_check, GradCheckReport, ERROR_FLOOR};
pub use graph::{
    gelu_scalar, log_softmax_rows, softmax_rows, BackwardCtx, BackwardFn, Graph, NodeId,
};
pub use tensor::Tensor;
