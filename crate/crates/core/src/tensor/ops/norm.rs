use crate::error::{Error, Result};
use crate::real::Real;
use crate::tensor::{Tape, Tensor, Var};

impl<T: Real> Tape<T> {
    /// Normalises over the last axis, then applies `gain` and `bias`.
    pub fn layer_norm(&self, x: Var, gain: Var, bias: Var, eps: T) -> Result<Var> {
        let (xv, gv, bv) = (self.value(x), self.value(gain), self.value(bias));
        let d = *xv.shape().last().unwrap_or(&0);
        if gv.shape() != [d] || bv.shape() != [d] {
            return Err(Error::dim(format!(
                "layer_norm: gain {:?} / bias {:?} vs input {:?}",
                gv.shape(),
                bv.shape(),
                xv.shape()
            )));
        }
        if eps <= T::zero() {
            return Err(Error::contract("layer_norm needs eps > 0"));
        }
        let rows = xv.numel() / d;
        let inv_d = T::one() / T::of(d as f64);
        let mut xhat = vec![T::zero(); xv.numel()];
        let mut rstd = vec![T::zero(); rows];
        let mut out = vec![T::zero(); xv.numel()];
        for r in 0..rows {
            let row = &xv.data()[r * d..(r + 1) * d];
            let mean = row.iter().copied().sum::<T>() * inv_d;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() * inv_d;
            let s = T::one() / (var + eps).sqrt();
            rstd[r] = s;
            for j in 0..d {
                let h = (row[j] - mean) * s;
                xhat[r * d + j] = h;
                out[r * d + j] = h * gv.data()[j] + bv.data()[j];
            }
        }
        let result = Tensor::from_parts(xv.shape().to_vec(), out);
        Ok(self.push_op(result, &[x, gain, bias], move |g, sink| {
            sink.add(bias, |gb| {
                for row in g.chunks(d) {
                    gb.iter_mut().zip(row).for_each(|(a, &b)| *a += b);
                }
            });
            sink.add(gain, |gg| {
                for (row, hrow) in g.chunks(d).zip(xhat.chunks(d)) {
                    for j in 0..d {
                        gg[j] += row[j] * hrow[j];
                    }
                }
            });
            let gd = gv.data();
            sink.add(x, |gx| {
                for r in 0..rows {
                    let grow = &g[r * d..(r + 1) * d];
                    let hrow = &xhat[r * d..(r + 1) * d];
                    let mut mean_gh = T::zero();
                    let mut mean_ghh = T::zero();
                    for j in 0..d {
                        let gh = grow[j] * gd[j];
                        mean_gh += gh;
                        mean_ghh += gh * hrow[j];
                    }
                    mean_gh *= inv_d;
                    mean_ghh *= inv_d;
                    for j in 0..d {
                        let gh = grow[j] * gd[j];
                        gx[r * d + j] += rstd[r] * (gh - mean_gh - hrow[j] * mean_ghh);
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
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn norm_of(x: Tensor<f64>) -> Tensor<f64> {
        let d = *x.shape().last().unwrap();
        let tape = Tape::<f64>::new();
        let xv = tape.constant(x);
        let g = tape.constant(Tensor::full([d], 1.0));
        let b = tape.constant(Tensor::zeros([d]));
        let y = tape.layer_norm(xv, g, b, 1e-5).unwrap();
        (*tape.value(y)).clone()
    }

    #[test]
    fn constant_row_maps_to_zero() {
        let y = norm_of(Tensor::full([1, 5], 3.7));
        assert!(y.data().iter().all(|&v| v.abs() < 1e-9));
    }

    #[test]
    fn already_normalised_row_is_kept() {
        let y = norm_of(Tensor::new([1, 2], vec![1.0, -1.0]).unwrap());
        // unit variance up to eps
        assert!((y.data()[0] - 1.0).abs() < 1e-5);
        assert!((y.data()[1] + 1.0).abs() < 1e-5);
    }

    #[test]
    fn gradients_match_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let x = Tensor::<f64>::uniform([3, 6], -2.0, 2.0, &mut rng);
        let gain = Tensor::<f64>::uniform([6], 0.5, 1.5, &mut rng);
        let bias = Tensor::<f64>::uniform([6], -0.5, 0.5, &mut rng);
        let w = Tensor::<f64>::uniform([3, 6], -1.0, 1.0, &mut rng);
        let (g2, b2, w2) = (gain.clone(), bias.clone(), w.clone());
        let err_x = grad_check(
            move |t, v| {
                let g = t.constant(g2.clone());
                let b = t.constant(b2.clone());
                let y = t.layer_norm(v, g, b, 1e-5)?;
                t.weighted_sum(y, &w2)
            },
            &x,
        )
        .unwrap();
        let (x2, b2, w2) = (x.clone(), bias.clone(), w.clone());
        let err_g = grad_check(
            move |t, v| {
                let xv = t.constant(x2.clone());
                let b = t.constant(b2.clone());
                let y = t.layer_norm(xv, v, b, 1e-5)?;
                t.weighted_sum(y, &w2)
            },
            &gain,
        )
        .unwrap();
        let (x2, g2, w2) = (x.clone(), gain.clone(), w.clone());
        let err_b = grad_check(
            move |t, v| {
                let xv = t.constant(x2.clone());
                let g = t.constant(g2.clone());
                let y = t.layer_norm(xv, g, v, 1e-5)?;
                t.weighted_sum(y, &w2)
            },
            &bias,
        )
        .unwrap();
        assert!(err_x <= 1e-5 && err_g <= 1e-5 && err_b <= 1e-5, "{err_x} {err_g} {err_b}");
    }
}
