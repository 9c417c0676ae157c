use std::cell::RefCell;
use std::rc::Rc;

use super::Tensor;
use crate::error::{Error, Result};
use crate::real::Real;

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

type BackwardFn<T> = Box<dyn FnOnce(&[T], &mut GradSink<T>)>;

struct Node<T: Real> {
    value: Rc<Tensor<T>>,
    requires_grad: bool,
    backward: Option<BackwardFn<T>>,
}

/// Records operations in execution order so gradients can be replayed in
/// reverse. One tape per training step; [`Tape::backward`] consumes it.
pub struct Tape<T: Real = f64> {
    nodes: RefCell<Vec<Node<T>>>,
}

impl<T: Real> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Real> Tape<T> {
    pub fn new() -> Self {
        Self {
            nodes: RefCell::new(Vec::new()),
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Drops every recorded value and backward rule.
    pub fn clear(&self) {
        self.nodes.borrow_mut().clear();
    }

    fn push(&self, value: Tensor<T>, requires_grad: bool, backward: Option<BackwardFn<T>>) -> Var {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value: Rc::new(value),
            requires_grad,
            backward,
        });
        Var(nodes.len() - 1)
    }

    /// Records a leaf; it receives a gradient iff `value.requires_grad()`.
    pub fn leaf(&self, mut value: Tensor<T>) -> Var {
        let rg = value.requires_grad();
        value.zero_grad();
        self.push(value, rg, None)
    }

    /// Records a value that never receives a gradient.
    pub fn constant(&self, value: Tensor<T>) -> Var {
        let value = value.with_requires_grad(false);
        self.push(value, false, None)
    }

    pub fn value(&self, v: Var) -> Rc<Tensor<T>> {
        Rc::clone(&self.nodes.borrow()[v.0].value)
    }

    pub fn shape(&self, v: Var) -> Vec<usize> {
        self.nodes.borrow()[v.0].value.shape().to_vec()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes.borrow()[v.0].requires_grad
    }

    /// Records the result of an operation. The backward rule receives the
    /// upstream gradient of `value` and is dropped when no input needs one.
    pub(crate) fn push_op<F>(&self, value: Tensor<T>, inputs: &[Var], backward: F) -> Var
    where
        F: FnOnce(&[T], &mut GradSink<T>) + 'static,
    {
        let rg = {
            let nodes = self.nodes.borrow();
            inputs.iter().any(|v| nodes[v.0].requires_grad)
        };
        let bw: Option<BackwardFn<T>> = if rg { Some(Box::new(backward)) } else { None };
        self.push(value, rg, bw)
    }

    /// Propagates d(loss)/d(node) to every leaf that requires a gradient.
    pub fn backward(self, loss: Var) -> Result<Gradients<T>> {
        let mut nodes = self.nodes.into_inner();
        let root = &nodes[loss.0];
        if root.value.numel() != 1 {
            return Err(Error::contract(format!(
                "backward needs a scalar loss, got shape {:?}",
                root.value.shape()
            )));
        }
        if !root.value.data()[0].is_finite() {
            return Err(Error::Numeric("non-finite loss".into()));
        }
        let mut sink = GradSink {
            grads: (0..nodes.len()).map(|_| None).collect(),
            requires: nodes.iter().map(|n| n.requires_grad).collect(),
            sizes: nodes.iter().map(|n| n.value.numel()).collect(),
        };
        if nodes[loss.0].requires_grad {
            sink.grads[loss.0] = Some(vec![T::one()]);
        }
        for id in (0..=loss.0).rev() {
            let node = &mut nodes[id];
            let Some(bw) = node.backward.take() else {
                continue;
            };
            // values are no longer needed once their rule has run
            node.value = Rc::new(Tensor::scalar(T::zero()));
            if let Some(g) = sink.grads[id].take() {
                bw(&g, &mut sink);
            }
        }
        Ok(Gradients { grads: sink.grads })
    }
}

/// Gradient accumulator handed to backward rules.
pub struct GradSink<T: Real> {
    grads: Vec<Option<Vec<T>>>,
    requires: Vec<bool>,
    sizes: Vec<usize>,
}

impl<T: Real> GradSink<T> {
    pub fn wants(&self, v: Var) -> bool {
        self.requires[v.0]
    }

    /// Lets `f` add into the gradient buffer of `v` (zero-initialised).
    pub fn add(&mut self, v: Var, f: impl FnOnce(&mut [T])) {
        if !self.requires[v.0] {
            return;
        }
        let size = self.sizes[v.0];
        let g = self.grads[v.0].get_or_insert_with(|| vec![T::zero(); size]);
        f(g);
    }

    /// Adds `delta` elementwise into the gradient of `v`.
    pub fn add_slice(&mut self, v: Var, delta: &[T]) {
        self.add(v, |g| {
            debug_assert_eq!(g.len(), delta.len());
            g.iter_mut().zip(delta).for_each(|(a, b)| *a += *b);
        });
    }
}

/// Leaf gradients produced by [`Tape::backward`].
pub struct Gradients<T: Real> {
    grads: Vec<Option<Vec<T>>>,
}

impl<T: Real> Gradients<T> {
    pub fn get(&self, v: Var) -> Option<&[T]> {
        self.grads.get(v.0).and_then(|g| g.as_deref())
    }

    pub fn take(&mut self, v: Var) -> Option<Vec<T>> {
        self.grads.get_mut(v.0).and_then(Option::take)
    }
}
