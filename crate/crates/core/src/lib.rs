// `!(x > 0.0)` style checks also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod data;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod geometry;
pub mod networks;
pub mod tensor;
pub mod tracker;
pub mod train;

pub use error::{Error, Result};
pub use geometry::BoundingBox;
pub use tensor::{ConvKernel, Tensor};
