//! Central finite-difference gradient verification.

use crate::error::{Error, Result};
use crate::real::Real;
use crate::tensor::{Tape, Tensor, Var};

/// Default relative step: `h_i = 1e-6 * (1 + |x_i|)`.
pub const DEFAULT_STEP: f64 = 1e-6;

/// Compares the taped gradient of scalar `f` at `x` with central differences
/// and returns the worst `|analytic - numeric| / max(1, |analytic|, |numeric|)`.
pub fn grad_check<T, F>(f: F, x: &Tensor<T>) -> Result<f64>
where
    T: Real,
    F: Fn(&Tape<T>, Var) -> Result<Var>,
{
    grad_check_with(f, x, DEFAULT_STEP)
}

pub fn grad_check_with<T, F>(f: F, x: &Tensor<T>, step: f64) -> Result<f64>
where
    T: Real,
    F: Fn(&Tape<T>, Var) -> Result<Var>,
{
    let tape = Tape::new();
    let xv = tape.leaf(x.clone().with_requires_grad(true));
    let y = f(&tape, xv)?;
    let y0 = tape.value(y);
    if y0.numel() != 1 {
        return Err(Error::contract(format!(
            "grad_check needs a scalar function, got shape {:?}",
            y0.shape()
        )));
    }
    let grads = tape.backward(y)?;
    let analytic: Vec<f64> = match grads.get(xv) {
        Some(g) => g.iter().map(|v| v.as_f64()).collect(),
        None => vec![0.0; x.numel()],
    };

    let eval = |probe: Tensor<T>| -> Result<f64> {
        let tape = Tape::new();
        let v = tape.constant(probe);
        let out = f(&tape, v)?;
        let value = tape.value(out).item()?.as_f64();
        if !value.is_finite() {
            return Err(Error::Numeric("function value is not finite".into()));
        }
        Ok(value)
    };

    let mut worst = 0.0f64;
    for i in 0..x.numel() {
        let xi = x.data()[i].as_f64();
        let h = step * (1.0 + xi.abs());
        let mut plus = x.clone();
        plus.data_mut()[i] = T::of(xi + h);
        let mut minus = x.clone();
        minus.data_mut()[i] = T::of(xi - h);
        // use the representable step actually taken
        let span = plus.data()[i].as_f64() - minus.data()[i].as_f64();
        let numeric = (eval(plus)? - eval(minus)?) / span;
        let a = analytic[i];
        let err = (a - numeric).abs() / 1f64.max(a.abs()).max(numeric.abs());
        worst = worst.max(err);
    }
    Ok(worst)
}
