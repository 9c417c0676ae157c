//! Scaled dot-product attention with an optional distance penalty.

use std::rc::Rc;

use crate::error::{Error, Result};
use crate::real::Real;
use crate::tensor::{Bindings, Tape, Tensor, Var};

/// `γ·D` subtracted from the attention logits of every head.
#[derive(Clone, Copy)]
pub struct DistancePenalty<'a, T: Real> {
    pub gamma: Var,
    pub distances: &'a Rc<Tensor<T>>,
}

/// `softmax(Q Kᵀ / √d_h − γ D)` for `q, k: [(h,) n, d_h]` and `D: [nq, nk]`
/// shared by all heads.
pub fn attention_weights<T: Real>(tape: &Tape<T>, q: Var, k: Var, penalty: Option<DistancePenalty<'_, T>>) -> Result<Var> {
    let (qs, ks) = (tape.shape(q), tape.shape(k));
    let r = qs.len();
    if r < 2 || ks.len() != r || qs.last() != ks.last() || qs[..r - 2] != ks[..r - 2] {
        return Err(Error::dim(format!("attention shapes q {qs:?}, k {ks:?}")));
    }
    let dh = *qs.last().expect("rank checked");
    let kt = tape.transpose(k)?;
    let logits = tape.matmul(q, kt)?;
    let mut logits = tape.scale(logits, T::one() / T::of(dh as f64).sqrt());
    if let Some(p) = penalty {
        logits = tape.sub_scaled_const(logits, p.gamma, p.distances)?;
    }
    tape.softmax(logits)
}

/// `softmax(Q Kᵀ / √d_h − γ D) V`; `v: [(h,) nk, d_v]`.
pub fn biased_attention<T: Real>(tape: &Tape<T>, q: Var, k: Var, v: Var, penalty: Option<DistancePenalty<'_, T>>) -> Result<Var> {
    let (ks, vs) = (tape.shape(k), tape.shape(v));
    if vs.len() != ks.len() || ks[..ks.len() - 1] != vs[..vs.len().saturating_sub(1)] {
        return Err(Error::dim(format!("attention shapes k {ks:?}, v {vs:?}")));
    }
    let weights = attention_weights(tape, q, k, penalty)?;
    tape.matmul(weights, v)
}

/// Multi-head attention sublayer reading projections from `prefix`:
/// `{q,k,v,out}/{weight,bias}`.
pub fn multi_head<T: Real>(
    tape: &Tape<T>,
    b: &Bindings,
    prefix: &str,
    queries: Var,
    keys: Var,
    heads: usize,
    penalty: Option<DistancePenalty<'_, T>>,
) -> Result<Var> {
    let proj = |name: &str, x: Var| -> Result<Var> {
        tape.linear(
            x,
            b.get(&format!("{prefix}/{name}/weight"))?,
            Some(b.get(&format!("{prefix}/{name}/bias"))?),
        )
    };
    let q = proj("q", queries)?;
    let k = proj("k", keys)?;
    let v = proj("v", keys)?;
    let (nq, d) = dims2(tape, q)?;
    let (nk, _) = dims2(tape, k)?;
    if d % heads != 0 {
        return Err(Error::dim(format!("width {d} does not split into {heads} heads")));
    }
    let dh = d / heads;
    let split = |x: Var, n: usize| -> Result<Var> {
        let r = tape.reshape(x, &[n, heads, dh])?;
        tape.swap_leading(r)
    };
    let (qh, kh, vh) = (split(q, nq)?, split(k, nk)?, split(v, nk)?);
    let out = biased_attention(tape, qh, kh, vh, penalty)?;
    let merged = tape.swap_leading(out)?;
    let merged = tape.reshape(merged, &[nq, d])?;
    proj("out", merged)
}

fn dims2<T: Real>(tape: &Tape<T>, x: Var) -> Result<(usize, usize)> {
    match tape.shape(x)[..] {
        [a, b] => Ok((a, b)),
        ref s => Err(Error::dim(format!("expected a matrix, got {s:?}"))),
    }
}
