//! Dense-network numeric core.

pub mod gradcheck;
pub mod layer;
pub mod matrix;
pub mod optim;

pub use gradcheck::{grad_check, relative_error, GradCheckConfig, GradCheckReport};
pub use layer::{Activation, DenseLayer, DropoutSpec, LayerGrads};
pub use matrix::{argmax, dot, l2_norm, softmax_rows, Matrix};
pub use optim::{OptimizerKind, OptimizerState};
