use crate::error::{Error, Result};
use crate::real::Real;
use crate::tensor::{Tape, Tensor, Var};

use super::{axpy, same_shape};

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_A: f64 = 0.044_715;

/// `tanh` through one `exp`; absolute error stays near machine epsilon,
/// which is all GELU needs, and it is several times cheaper than libm's.
#[inline]
fn tanh_fast<T: Real>(u: T) -> T {
    if u.abs() > T::of(19.0) {
        return u.signum();
    }
    let e = (u + u).exp();
    (e - T::one()) / (e + T::one())
}

#[inline]
fn gelu_parts<T: Real>(x: T) -> (T, T) {
    let th = tanh_fast(T::of(GELU_C) * (x + T::of(GELU_A) * x * x * x));
    (T::of(0.5) * x * (T::one() + th), th)
}

#[inline]
fn gelu_grad_from<T: Real>(x: T, th: T) -> T {
    let c = T::of(GELU_C);
    let a = T::of(GELU_A);
    let half = T::of(0.5);
    half * (T::one() + th) + half * x * (T::one() - th * th) * c * (T::one() + T::of(3.0) * a * x * x)
}

/// Tanh approximation of GELU.
#[inline]
pub fn gelu<T: Real>(x: T) -> T {
    gelu_parts(x).0
}

#[inline]
pub fn gelu_grad<T: Real>(x: T) -> T {
    gelu_grad_from(x, gelu_parts(x).1)
}

#[inline]
pub fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

#[inline]
pub fn softplus<T: Real>(x: T) -> T {
    x.max(T::zero()) + (-x.abs()).exp().ln_1p()
}

impl<T: Real> Tape<T> {
    fn unary<F, D>(&self, x: Var, f: F, df: D) -> Var
    where
        F: Fn(T) -> T,
        D: Fn(T, T) -> T + 'static,
    {
        let xv = self.value(x);
        let out: Vec<T> = xv.data().iter().map(|&v| f(v)).collect();
        let result = Tensor::from_parts(xv.shape().to_vec(), out);
        let yv = if self.requires_grad(x) {
            Some(result.data().to_vec())
        } else {
            None
        };
        self.push_op(result, &[x], move |g, sink| {
            let y = yv.expect("recorded output");
            sink.add(x, |gx| {
                for (((acc, &gi), &xi), &yi) in gx.iter_mut().zip(g).zip(xv.data()).zip(&y) {
                    *acc += gi * df(xi, yi);
                }
            });
        })
    }

    pub fn gelu(&self, x: Var) -> Var {
        let xv = self.value(x);
        let keep = self.requires_grad(x);
        let mut out = Vec::with_capacity(xv.numel());
        let mut ths = Vec::with_capacity(if keep { xv.numel() } else { 0 });
        for &v in xv.data() {
            let (y, th) = gelu_parts(v);
            out.push(y);
            if keep {
                ths.push(th);
            }
        }
        let result = Tensor::from_parts(xv.shape().to_vec(), out);
        self.push_op(result, &[x], move |g, sink| {
            sink.add(x, |gx| {
                for (((acc, &gi), &xi), &th) in gx.iter_mut().zip(g).zip(xv.data()).zip(&ths) {
                    *acc += gi * gelu_grad_from(xi, th);
                }
            });
        })
    }

    pub fn sigmoid(&self, x: Var) -> Var {
        self.unary(x, sigmoid, |_, y| y * (T::one() - y))
    }

    pub fn softplus(&self, x: Var) -> Var {
        self.unary(x, softplus, |x, _| sigmoid(x))
    }

    pub fn exp(&self, x: Var) -> Var {
        self.unary(x, T::exp, |_, y| y)
    }

    pub fn ln(&self, x: Var) -> Var {
        self.unary(x, T::ln, |x, _| T::one() / x)
    }

    pub fn tanh(&self, x: Var) -> Var {
        self.unary(x, T::tanh, |_, y| T::one() - y * y)
    }

    pub fn scale(&self, x: Var, c: T) -> Var {
        self.unary(x, move |v| v * c, move |_, _| c)
    }

    pub fn neg(&self, x: Var) -> Var {
        self.scale(x, -T::one())
    }

    pub fn add(&self, a: Var, b: Var) -> Result<Var> {
        self.binary("add", a, b, |x, y| x + y, true, |g, _, _| g, |g, _, _| g)
    }

    pub fn sub(&self, a: Var, b: Var) -> Result<Var> {
        self.binary("sub", a, b, |x, y| x - y, true, |g, _, _| g, |g, _, _| -g)
    }

    pub fn mul(&self, a: Var, b: Var) -> Result<Var> {
        self.binary("mul", a, b, |x, y| x * y, false, |g, _, y| g * y, |g, x, _| g * x)
    }

    #[allow(clippy::too_many_arguments)]
    fn binary<F, Da, Db>(&self, op: &str, a: Var, b: Var, f: F, linear: bool, da: Da, db: Db) -> Result<Var>
    where
        F: Fn(T, T) -> T,
        Da: Fn(T, T, T) -> T + 'static,
        Db: Fn(T, T, T) -> T + 'static,
    {
        let (av, bv) = (self.value(a), self.value(b));
        same_shape(op, av.shape(), bv.shape())?;
        let out = av.data().iter().zip(bv.data()).map(|(&x, &y)| f(x, y)).collect();
        let result = Tensor::from_parts(av.shape().to_vec(), out);
        // linear ops do not need their inputs in backward
        let saved = (!linear).then_some((av, bv));
        Ok(self.push_op(result, &[a, b], move |g, sink| {
            let zero = T::zero();
            match &saved {
                Some((av, bv)) => {
                    let (ad, bd) = (av.data(), bv.data());
                    sink.add(a, |ga| {
                        for i in 0..g.len() {
                            ga[i] += da(g[i], ad[i], bd[i]);
                        }
                    });
                    sink.add(b, |gb| {
                        for i in 0..g.len() {
                            gb[i] += db(g[i], ad[i], bd[i]);
                        }
                    });
                }
                None => {
                    sink.add(a, |ga| ga.iter_mut().zip(g).for_each(|(s, &gi)| *s += da(gi, zero, zero)));
                    sink.add(b, |gb| gb.iter_mut().zip(g).for_each(|(s, &gi)| *s += db(gi, zero, zero)));
                }
            }
        }))
    }

    /// Adds a bias vector along the last axis.
    pub fn add_bias(&self, x: Var, bias: Var) -> Result<Var> {
        let (xv, bv) = (self.value(x), self.value(bias));
        let d = bv.numel();
        if xv.shape().last() != Some(&d) || bv.rank() != 1 {
            return Err(Error::dim(format!(
                "add_bias: bias {:?} does not match last axis of {:?}",
                bv.shape(),
                xv.shape()
            )));
        }
        let mut out = xv.data().to_vec();
        for row in out.chunks_mut(d) {
            axpy(row, bv.data());
        }
        let result = Tensor::from_parts(xv.shape().to_vec(), out);
        Ok(self.push_op(result, &[x, bias], move |g, sink| {
            sink.add_slice(x, g);
            sink.add(bias, |gb| {
                for row in g.chunks(d) {
                    axpy(gb, row);
                }
            });
        }))
    }

    pub fn sum(&self, x: Var) -> Var {
        let s = self.value(x).data().iter().copied().sum();
        self.push_op(Tensor::scalar(s), &[x], move |g, sink| {
            let g0 = g[0];
            sink.add(x, |gx| gx.iter_mut().for_each(|v| *v += g0));
        })
    }

    pub fn mean(&self, x: Var) -> Var {
        let n = self.value(x).numel();
        let s = self.sum(x);
        self.scale(s, T::one() / T::of(n as f64))
    }

    /// `sum(x * weights)` with constant weights.
    pub fn weighted_sum(&self, x: Var, weights: &Tensor<T>) -> Result<Var> {
        let xv = self.value(x);
        same_shape("weighted_sum", xv.shape(), weights.shape())?;
        let s = xv.data().iter().zip(weights.data()).map(|(&a, &b)| a * b).sum();
        let w = weights.data().to_vec();
        Ok(self.push_op(Tensor::scalar(s), &[x], move |g, sink| {
            let g0 = g[0];
            sink.add(x, |gx| {
                gx.iter_mut().zip(&w).for_each(|(a, &wi)| *a += g0 * wi);
            });
        }))
    }

    /// Mean squared difference over all elements.
    pub fn mse(&self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        same_shape("mse", av.shape(), bv.shape())?;
        let n = T::of(av.numel() as f64);
        let diff: Vec<T> = av.data().iter().zip(bv.data()).map(|(&x, &y)| x - y).collect();
        let s = diff.iter().map(|&d| d * d).sum::<T>() / n;
        Ok(self.push_op(Tensor::scalar(s), &[a, b], move |g, sink| {
            let k = T::of(2.0) * g[0] / n;
            sink.add(a, |ga| ga.iter_mut().zip(&diff).for_each(|(s, &d)| *s += k * d));
            sink.add(b, |gb| gb.iter_mut().zip(&diff).for_each(|(s, &d)| *s -= k * d));
        }))
    }
}
