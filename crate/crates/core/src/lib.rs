//! Adaptive weighted super-resolution networks on a small CPU tensor engine.

pub mod autodiff;
pub mod data;
pub mod kernels;
pub mod metrics;
pub mod model;
pub mod params;
pub mod tensor;
pub mod train;

pub use autodiff::{Eager, Graph, Tape, Var};
pub use params::{ParamRegistry, Parameter};
pub use tensor::{DType, Element, Shape, Tensor, TensorError};
