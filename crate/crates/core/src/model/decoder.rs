//! Pre-norm transformer blocks: self-attention over grid-line queries,
//! cross-attention into image tokens, feed-forward.

use std::rc::Rc;

use super::attention::{multi_head, DistancePenalty};
use super::config::ModelConfig;
use crate::error::{Error, Result};
use crate::real::Real;
use crate::tensor::{Bindings, Tape, Tensor, Var};

pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Distance matrices for one forward pass: grid lines against grid lines
/// and grid lines against image tokens.
#[derive(Clone, Debug)]
pub struct Biases<T: Real> {
    pub grid_grid: Rc<Tensor<T>>,
    pub grid_image: Rc<Tensor<T>>,
}

fn norm<T: Real>(tape: &Tape<T>, b: &Bindings, prefix: &str, x: Var) -> Result<Var> {
    tape.layer_norm(
        x,
        b.get(&format!("{prefix}/norm/gain"))?,
        b.get(&format!("{prefix}/norm/bias"))?,
        T::of(LAYER_NORM_EPS),
    )
}

fn penalty<'a, T: Real>(
    tape: &Tape<T>,
    b: &Bindings,
    prefix: &str,
    cfg: &ModelConfig,
    distances: &'a Rc<Tensor<T>>,
) -> Result<Option<DistancePenalty<'a, T>>> {
    if !cfg.bias_enabled {
        return Ok(None);
    }
    let gamma = tape.softplus(b.get(&format!("{prefix}/gamma_raw"))?);
    Ok(Some(DistancePenalty { gamma, distances }))
}

/// Runs all blocks on `queries: [3N², d_D]` against `image_tokens`.
pub fn decoder_forward<T: Real>(
    tape: &Tape<T>,
    b: &Bindings,
    cfg: &ModelConfig,
    queries: Var,
    image_tokens: Var,
    biases: &Biases<T>,
) -> Result<Var> {
    let (nq, ni) = (tape.shape(queries)[0], tape.shape(image_tokens)[0]);
    if biases.grid_grid.shape() != [nq, nq] || biases.grid_image.shape() != [nq, ni] {
        return Err(Error::dim(format!(
            "bias shapes {:?} / {:?} for {nq} queries and {ni} image tokens",
            biases.grid_grid.shape(),
            biases.grid_image.shape()
        )));
    }
    let mut x = queries;
    for l in 0..cfg.layers {
        let p = format!("layer{l}/self");
        let h = norm(tape, b, &p, x)?;
        let pen = penalty(tape, b, &p, cfg, &biases.grid_grid)?;
        let a = multi_head(tape, b, &p, h, h, cfg.heads, pen)?;
        x = tape.add(x, a)?;

        let p = format!("layer{l}/cross");
        let h = norm(tape, b, &p, x)?;
        let pen = penalty(tape, b, &p, cfg, &biases.grid_image)?;
        let a = multi_head(tape, b, &p, h, image_tokens, cfg.heads, pen)?;
        x = tape.add(x, a)?;

        let p = format!("layer{l}/ffn");
        let h = norm(tape, b, &p, x)?;
        let h = tape.linear(h, b.get(&format!("{p}/fc1/weight"))?, Some(b.get(&format!("{p}/fc1/bias"))?))?;
        let h = tape.gelu(h);
        let h = tape.linear(h, b.get(&format!("{p}/fc2/weight"))?, Some(b.get(&format!("{p}/fc2/bias"))?))?;
        x = tape.add(x, h)?;
    }
    Ok(x)
}
