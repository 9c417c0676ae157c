use crate::error::{Error, Result};
use crate::real::Real;
use crate::tensor::{Tape, Var};

/// Image-similarity term added to the pixel loss with weight `α`.
pub trait Perceptual<T: Real> {
    /// `None` means the term is identically zero.
    fn term(&self, tape: &Tape<T>, rendered: Var, truth: Var) -> Result<Option<Var>>;

    /// True when the term is identically zero.
    fn is_zero(&self) -> bool {
        false
    }
}

/// The zero term.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoPerceptual;

impl<T: Real> Perceptual<T> for NoPerceptual {
    fn term(&self, _: &Tape<T>, _: Var, _: Var) -> Result<Option<Var>> {
        Ok(None)
    }

    fn is_zero(&self) -> bool {
        true
    }
}

/// Mean over views of the per-pixel MSE plus `α` times the perceptual term.
pub fn reconstruction_loss<T: Real>(
    tape: &Tape<T>,
    rendered: &[Var],
    truth: &[Var],
    alpha: f64,
    perceptual: &dyn Perceptual<T>,
) -> Result<Var> {
    if rendered.len() != truth.len() || rendered.is_empty() {
        return Err(Error::contract(format!(
            "loss needs matching non-empty view lists, got {} rendered and {} truth",
            rendered.len(),
            truth.len()
        )));
    }
    let mut terms = Vec::with_capacity(rendered.len());
    for (&r, &t) in rendered.iter().zip(truth) {
        let mut term = tape.mse(r, t)?;
        if alpha != 0.0 {
            if let Some(p) = perceptual.term(tape, r, t)? {
                let weighted = tape.scale(p, T::of(alpha));
                term = tape.add(term, weighted)?;
            }
        }
        terms.push(tape.reshape(term, &[1])?);
    }
    let stacked = tape.concat_rows(&terms)?;
    Ok(tape.mean(stacked))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{grad_check, Tensor};

    fn leaf(tape: &Tape<f64>, data: Vec<f64>) -> Var {
        let n = data.len() / 3;
        tape.leaf(Tensor::new(vec![n, 3], data).unwrap().with_requires_grad(true))
    }

    #[test]
    fn equal_views_give_zero() {
        let tape = Tape::new();
        let a = leaf(&tape, vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6]);
        let loss = reconstruction_loss(&tape, &[a], &[a], 0.0, &NoPerceptual).unwrap();
        assert_eq!(tape.value(loss).item().unwrap(), 0.0);
    }

    #[test]
    fn constant_offset() {
        let tape = Tape::new();
        let (x1, x2) = (leaf(&tape, vec![0.25; 6]), leaf(&tape, vec![0.0; 12]));
        let (y1, y2) = (leaf(&tape, vec![0.75; 6]), leaf(&tape, vec![0.5; 12]));
        let loss = reconstruction_loss(&tape, &[y1, y2], &[x1, x2], 0.0, &NoPerceptual).unwrap();
        assert_eq!(tape.value(loss).item().unwrap(), 0.25);
    }

    #[test]
    fn pixel_gradient_matches_closed_form() {
        let truth = Tensor::new(vec![2, 3], vec![0.1, 0.9, 0.4, 0.3, 0.2, 0.7]).unwrap();
        let x = Tensor::new(vec![2, 3], vec![0.5, 0.6, 0.1, 0.8, 0.0, 0.3]).unwrap();
        let views = 2.0;
        let other = Tensor::new(vec![2, 3], vec![0.2; 6]).unwrap();
        let f = |tape: &Tape<f64>, v: Var| {
            let t = tape.constant(truth.clone());
            let o = tape.constant(other.clone());
            reconstruction_loss(tape, &[v, o], &[t, o], 0.0, &NoPerceptual)
        };
        let tape = Tape::new();
        let v = tape.leaf(x.clone().with_requires_grad(true));
        let loss = f(&tape, v).unwrap();
        let grads = tape.backward(loss).unwrap();
        let g = grads.get(v).unwrap();
        for i in 0..6 {
            let expect = 2.0 * (x.data()[i] - truth.data()[i]) / (6.0 * views);
            assert!((g[i] - expect).abs() <= 1e-15);
        }
        let err = grad_check(|t, v| f(t, v), &x).unwrap();
        assert!(err <= 1e-8, "{err}");
    }

    #[test]
    fn mismatches_are_rejected() {
        let tape = Tape::new();
        let (a, b) = (leaf(&tape, vec![0.0; 6]), leaf(&tape, vec![0.0; 9]));
        assert!(reconstruction_loss(&tape, &[a], &[b], 0.0, &NoPerceptual).is_err());
        assert!(reconstruction_loss(&tape, &[a], &[], 0.0, &NoPerceptual).is_err());
    }
}
