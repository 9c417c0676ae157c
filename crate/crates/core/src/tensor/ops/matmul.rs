use crate::error::{Error, Result};
use crate::real::Real;
use crate::tensor::{Tape, Tensor, Var};

/// `c (m×n) = a (m×k) · b (k×n)`, adding into `c` when `accumulate`.
/// `ta`/`tb` mean the operand is stored transposed (k×m / n×k).
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm<T: Real>(m: usize, k: usize, n: usize, a: &[T], ta: bool, b: &[T], tb: bool, c: &mut [T], accumulate: bool) {
    assert_eq!(a.len(), m * k, "gemm: lhs length");
    assert_eq!(b.len(), k * n, "gemm: rhs length");
    assert_eq!(c.len(), m * n, "gemm: output length");
    if m == 0 || n == 0 {
        return;
    }
    let (rsa, csa) = if ta { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if tb { (1, k as isize) } else { (n as isize, 1) };
    let beta = if accumulate { T::one() } else { T::zero() };
    // SAFETY: lengths checked above; strides address exactly those buffers.
    unsafe {
        T::gemm_raw(
            m,
            k,
            n,
            a.as_ptr(),
            rsa,
            csa,
            b.as_ptr(),
            rsb,
            csb,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

impl<T: Real> Tape<T> {
    /// Batched matrix product `[..., i, j] · [..., j, k] -> [..., i, k]`.
    ///
    /// The right operand may be rank 2, in which case it is shared by every
    /// batch entry of the left operand.
    pub fn matmul(&self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        let (ash, bsh) = (av.shape(), bv.shape());
        if ash.len() < 2 || bsh.len() < 2 {
            return Err(Error::dim(format!("matmul needs rank >= 2, got {ash:?} and {bsh:?}")));
        }
        let (m, k) = (ash[ash.len() - 2], ash[ash.len() - 1]);
        let (k2, n) = (bsh[bsh.len() - 2], bsh[bsh.len() - 1]);
        if k != k2 {
            return Err(Error::dim(format!("matmul inner extents differ: {ash:?} · {bsh:?}")));
        }
        let a_batch = &ash[..ash.len() - 2];
        let b_batch = &bsh[..bsh.len() - 2];
        let shared_rhs = b_batch.is_empty();
        if !shared_rhs && a_batch != b_batch {
            return Err(Error::dim(format!("matmul batch extents differ: {ash:?} · {bsh:?}")));
        }
        let batch: usize = a_batch.iter().product();

        let mut out_shape = a_batch.to_vec();
        out_shape.extend([m, n]);
        let mut out = vec![T::zero(); batch * m * n];
        if shared_rhs {
            // one tall product instead of `batch` small ones
            gemm(batch * m, k, n, av.data(), false, bv.data(), false, &mut out, false);
        } else {
            for i in 0..batch {
                gemm(
                    m,
                    k,
                    n,
                    &av.data()[i * m * k..(i + 1) * m * k],
                    false,
                    &bv.data()[i * k * n..(i + 1) * k * n],
                    false,
                    &mut out[i * m * n..(i + 1) * m * n],
                    false,
                );
            }
        }
        let result = Tensor::from_parts(out_shape, out);
        Ok(self.push_op(result, &[a, b], move |g, sink| {
            let (ad, bd) = (av.data(), bv.data());
            if shared_rhs {
                // dA = G · Bᵀ, dB = Aᵀ · G
                sink.add(a, |ga| gemm(batch * m, n, k, g, false, bd, true, ga, true));
                sink.add(b, |gb| gemm(k, batch * m, n, ad, true, g, false, gb, true));
            } else {
                sink.add(a, |ga| {
                    for i in 0..batch {
                        gemm(
                            m,
                            n,
                            k,
                            &g[i * m * n..(i + 1) * m * n],
                            false,
                            &bd[i * k * n..(i + 1) * k * n],
                            true,
                            &mut ga[i * m * k..(i + 1) * m * k],
                            true,
                        );
                    }
                });
                sink.add(b, |gb| {
                    for i in 0..batch {
                        gemm(
                            k,
                            m,
                            n,
                            &ad[i * m * k..(i + 1) * m * k],
                            true,
                            &g[i * m * n..(i + 1) * m * n],
                            false,
                            &mut gb[i * k * n..(i + 1) * k * n],
                            true,
                        );
                    }
                });
            }
        }))
    }

    /// `x · w + b` for `x: [..., i]`, `w: [i, o]`, `b: [o]`.
    pub fn linear(&self, x: Var, weight: Var, bias: Option<Var>) -> Result<Var> {
        let y = self.matmul(x, weight)?;
        match bias {
            Some(b) => self.add_bias(y, b),
            None => Ok(y),
        }
    }
}
