#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod data;
pub mod error;
pub mod geometry;
pub mod image;
pub mod model;
pub mod real;
pub mod render;
pub mod tensor;
pub mod train;
pub mod verify;

pub use error::{Error, Result};
pub use real::{Dtype, Real};
pub use tensor::{Tape, Tensor, Var};
