use crate::error::{Error, Result};
use crate::real::Real;
use crate::tensor::{Tape, Tensor, Var};

use super::gemm;

impl<T: Real> Tape<T> {
    /// Stride-2 transposed convolution with a 2×2 kernel and no bias:
    /// `[C_in, N, N] ⊛ [C_in, C_out, 2, 2] -> [C_out, 2N, 2N]`. Every input
    /// pixel expands into its own disjoint 2×2 output block.
    pub fn transposed_conv_2x(&self, x: Var, kernel: Var) -> Result<Var> {
        let (xv, kv) = (self.value(x), self.value(kernel));
        let &[cin, h, w] = xv.shape() else {
            return Err(Error::dim(format!("deconv input must be [C, N, N], got {:?}", xv.shape())));
        };
        if h != w {
            return Err(Error::dim(format!("deconv input must be square, got {h}x{w}")));
        }
        let &[kin, cout, 2, 2] = kv.shape() else {
            return Err(Error::dim(format!(
                "deconv kernel must be [C_in, C_out, 2, 2], got {:?}",
                kv.shape()
            )));
        };
        if kin != cin {
            return Err(Error::dim(format!("deconv kernel has {kin} input channels, input has {cin}")));
        }
        let n = h;
        let pixels = n * n;
        let cols = cout * 4;
        // blocks[(co, a, b), p] = sum_ci K[ci, (co, a, b)] * X[ci, p]
        let mut blocks = vec![T::zero(); cols * pixels];
        gemm(cols, cin, pixels, kv.data(), true, xv.data(), false, &mut blocks, false);
        let m = 2 * n;
        let mut out = vec![T::zero(); cout * m * m];
        scatter_blocks(&blocks, &mut out, cout, n, false);
        let result = Tensor::from_parts(vec![cout, m, m], out);
        Ok(self.push_op(result, &[x, kernel], move |g, sink| {
            let mut gblocks = vec![T::zero(); cols * pixels];
            scatter_blocks(g, &mut gblocks, cout, n, true);
            sink.add(x, |gx| gemm(cin, cols, pixels, kv.data(), false, &gblocks, false, gx, true));
            sink.add(kernel, |gk| gemm(cin, pixels, cols, xv.data(), false, &gblocks, true, gk, true));
        }))
    }
}

/// Moves between block layout `[(co, a, b), (i, j)]` and image layout
/// `[co, 2i + a, 2j + b]`; `gather` runs the inverse direction.
fn scatter_blocks<T: Real>(src: &[T], dst: &mut [T], cout: usize, n: usize, gather: bool) {
    let m = 2 * n;
    let pixels = n * n;
    for co in 0..cout {
        for a in 0..2 {
            for b in 0..2 {
                let row = (co * 4 + a * 2 + b) * pixels;
                for i in 0..n {
                    for j in 0..n {
                        let block = row + i * n + j;
                        let image = co * m * m + (2 * i + a) * m + 2 * j + b;
                        if gather {
                            dst[block] = src[image];
                        } else {
                            dst[image] = src[block];
                        }
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::grad_check;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn run(x: Tensor<f64>, k: Tensor<f64>) -> Tensor<f64> {
        let tape = Tape::<f64>::new();
        let xv = tape.constant(x);
        let kv = tape.constant(k);
        let y = tape.transposed_conv_2x(xv, kv).unwrap();
        (*tape.value(y)).clone()
    }

    #[test]
    fn single_pixel_expands_to_block() {
        let y = run(Tensor::full([1, 1, 1], 2.5), Tensor::full([1, 1, 2, 2], 1.0));
        assert_eq!(y.shape(), &[1, 2, 2]);
        assert_eq!(y.data(), &[2.5; 4]);
    }

    #[test]
    fn zero_input_gives_zero_output() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let y = run(Tensor::zeros([3, 4, 4]), Tensor::uniform([3, 2, 2, 2], -1.0, 1.0, &mut rng));
        assert_eq!(y.shape(), &[2, 8, 8]);
        assert!(y.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn matches_direct_definition() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = Tensor::<f64>::uniform([3, 2, 2], -1.0, 1.0, &mut rng);
        let k = Tensor::<f64>::uniform([3, 2, 2, 2], -1.0, 1.0, &mut rng);
        let y = run(x.clone(), k.clone());
        for co in 0..2 {
            for oy in 0..4 {
                for ox in 0..4 {
                    let expect: f64 = (0..3).map(|ci| x.at(&[ci, oy / 2, ox / 2]) * k.at(&[ci, co, oy % 2, ox % 2])).sum();
                    assert!((y.at(&[co, oy, ox]) - expect).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn perturbing_one_pixel_touches_one_block() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = Tensor::<f64>::uniform([2, 3, 3], -1.0, 1.0, &mut rng);
        let k = Tensor::<f64>::uniform([2, 2, 2, 2], -1.0, 1.0, &mut rng);
        let base = run(x.clone(), k.clone());
        let mut x2 = x.clone();
        x2.data_mut()[9 + 4] += 0.5; // channel 1, pixel (1, 1)
        let moved = run(x2, k);
        for co in 0..2 {
            for oy in 0..6 {
                for ox in 0..6 {
                    let changed = base.at(&[co, oy, ox]) != moved.at(&[co, oy, ox]);
                    let inside = oy / 2 == 1 && ox / 2 == 1;
                    assert!(!changed || inside, "({co},{oy},{ox}) changed outside the block");
                }
            }
        }
    }

    #[test]
    fn rejects_non_square_input() {
        let tape = Tape::<f64>::new();
        let x = tape.constant(Tensor::zeros([1, 2, 3]));
        let k = tape.constant(Tensor::zeros([1, 1, 2, 2]));
        assert!(matches!(tape.transposed_conv_2x(x, k), Err(Error::Dimension(_))));
    }

    #[test]
    fn gradients_match_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = Tensor::<f64>::uniform([2, 4, 4], -1.0, 1.0, &mut rng);
        let k = Tensor::<f64>::uniform([2, 3, 2, 2], -1.0, 1.0, &mut rng);
        let w = Tensor::<f64>::uniform([3, 8, 8], -1.0, 1.0, &mut rng);
        let (k2, w2) = (k.clone(), w.clone());
        let err_x = grad_check(
            move |t, v| {
                let kk = t.constant(k2.clone());
                let y = t.transposed_conv_2x(v, kk)?;
                t.weighted_sum(y, &w2)
            },
            &x,
        )
        .unwrap();
        let (x2, w2) = (x.clone(), w.clone());
        let err_k = grad_check(
            move |t, v| {
                let xx = t.constant(x2.clone());
                let y = t.transposed_conv_2x(xx, v)?;
                t.weighted_sum(y, &w2)
            },
            &k,
        )
        .unwrap();
        assert!(err_x <= 1e-5 && err_k <= 1e-5, "{err_x} {err_k}");
    }
}
