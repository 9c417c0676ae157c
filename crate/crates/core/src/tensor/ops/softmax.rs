use crate::error::{Error, Result};
use crate::real::Real;
use crate::tensor::{Tape, Tensor, Var};

/// Row-wise softmax of a flat buffer with rows of width `d`, computed with
/// max subtraction.
pub(crate) fn softmax_rows<T: Real>(x: &[T], d: usize) -> Vec<T> {
    let mut out = vec![T::zero(); x.len()];
    for (row, dst) in x.chunks(d).zip(out.chunks_mut(d)) {
        let max = row.iter().copied().fold(T::neg_infinity(), T::max);
        let mut total = T::zero();
        for (o, &v) in dst.iter_mut().zip(row) {
            *o = (v - max).exp();
            total += *o;
        }
        let inv = T::one() / total;
        dst.iter_mut().for_each(|o| *o *= inv);
    }
    out
}

impl<T: Real> Tape<T> {
    pub fn softmax(&self, x: Var) -> Result<Var> {
        let xv = self.value(x);
        let d = *xv.shape().last().unwrap_or(&0);
        if d == 0 {
            return Err(Error::dim("softmax over an empty last axis"));
        }
        let y = softmax_rows(xv.data(), d);
        let saved = y.clone();
        Ok(self.push_op(Tensor::from_parts(xv.shape().to_vec(), y), &[x], move |g, sink| {
            sink.add(x, |gx| {
                for ((grow, yrow), gxrow) in g.chunks(d).zip(saved.chunks(d)).zip(gx.chunks_mut(d)) {
                    let dot: T = grow.iter().zip(yrow).map(|(&a, &b)| a * b).sum();
                    for ((o, &gi), &yi) in gxrow.iter_mut().zip(grow).zip(yrow) {
                        *o += yi * (gi - dot);
                    }
                }
            });
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::grad_check;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn uniform_row() {
        let y = softmax_rows(&[0.0f64, 0.0, 0.0], 3);
        for v in y {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn large_logits_do_not_overflow() {
        let y = softmax_rows(&[1000.0f64, 0.0], 2);
        assert_eq!(y[0], 1.0);
        assert!(y[1] >= 0.0 && y[1] < 1e-300);
    }

    #[test]
    fn empty_axis_is_rejected() {
        let tape = Tape::<f64>::new();
        let x = tape.constant(Tensor::new(Vec::new(), vec![1.0]).unwrap());
        assert!(matches!(tape.softmax(x), Err(Error::Dimension(_))));
    }

    #[test]
    fn jacobian_matches_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let x = Tensor::<f64>::uniform([8], -2.0, 2.0, &mut rng);
        for out in 0..8 {
            let w = Tensor::from_fn([8], |i| if i == out { 1.0 } else { 0.0 });
            let err = grad_check(
                |t, v| {
                    let y = t.softmax(v)?;
                    t.weighted_sum(y, &w)
                },
                &x,
            )
            .unwrap();
            assert!(err <= 1e-6, "row {out}: {err}");
        }
    }

    proptest! {
        #[test]
        fn rows_sum_to_one_and_shift_invariant(
            row in proptest::collection::vec(-50.0f64..50.0, 1..16),
            shift in -100.0f64..100.0,
        ) {
            let d = row.len();
            let y = softmax_rows(&row, d);
            let total: f64 = y.iter().sum();
            prop_assert!((total - 1.0).abs() <= 1e-12);
            let shifted: Vec<f64> = row.iter().map(|v| v + shift).collect();
            let z = softmax_rows(&shifted, d);
            for (a, b) in y.iter().zip(&z) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }
    }
}
