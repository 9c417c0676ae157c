use std::rc::Rc;

use crate::error::{Error, Result};
use crate::real::Real;
use crate::tensor::{Tape, Tensor, Var};

impl<T: Real> Tape<T> {
    /// `x − s·c` for `x: [..., q, k]`, a one-element `s` and a constant
    /// `c: [q, k]` broadcast over the leading axes of `x`.
    pub fn sub_scaled_const(&self, x: Var, s: Var, c: &Rc<Tensor<T>>) -> Result<Var> {
        let (xv, sv) = (self.value(x), self.value(s));
        let block = c.numel();
        let sh = xv.shape();
        if sv.numel() != 1 || c.rank() != 2 || sh.len() < 2 || sh[sh.len() - 2..] != *c.shape() {
            return Err(Error::dim(format!(
                "sub_scaled_const: x {:?}, scale {:?}, constant {:?}",
                sh,
                sv.shape(),
                c.shape()
            )));
        }
        let k = sv.data()[0];
        let mut out = xv.data().to_vec();
        for chunk in out.chunks_mut(block) {
            chunk.iter_mut().zip(c.data()).for_each(|(o, &cv)| *o -= k * cv);
        }
        let c = Rc::clone(c);
        Ok(self.push_op(Tensor::from_parts(sh.to_vec(), out), &[x, s], move |g, sink| {
            sink.add_slice(x, g);
            sink.add(s, |gs| {
                let mut acc = T::zero();
                for chunk in g.chunks(block) {
                    acc += chunk.iter().zip(c.data()).map(|(&gi, &cv)| gi * cv).sum::<T>();
                }
                gs[0] -= acc;
            });
        }))
    }
}
