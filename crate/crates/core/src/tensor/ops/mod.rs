//! Differentiable operations recorded on a [`Tape`](super::Tape).
//!
//! Every op validates shapes up front and returns a dimension error rather
//! than panicking; backward rules assume the forward checks passed.

mod bias;
mod conv;
mod elementwise;
mod matmul;
mod norm;
mod shape;
mod softmax;

pub use elementwise::{gelu, gelu_grad, sigmoid, softplus};
pub(crate) use matmul::gemm;

use crate::error::{Error, Result};
use crate::real::Real;

pub(crate) fn same_shape(op: &str, a: &[usize], b: &[usize]) -> Result<()> {
    if a != b {
        return Err(Error::dim(format!("{op}: shapes {a:?} and {b:?} differ")));
    }
    Ok(())
}

pub(crate) fn axpy<T: Real>(acc: &mut [T], x: &[T]) {
    acc.iter_mut().zip(x).for_each(|(a, b)| *a += *b);
}
