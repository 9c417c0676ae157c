//! Image patch tokens, line-coordinate encoding and grid-line queries.

use super::config::ModelConfig;
use crate::error::{Error, Result};
use crate::geometry::PluckerLine;
use crate::image::Image;
use crate::real::Real;
use crate::tensor::{Bindings, Tape, Tensor, Var};

/// Tokens on a tape with the line each one stands for; `None` marks a
/// summary (CLS) token.
#[derive(Clone, Debug)]
pub struct TokenSet {
    pub tokens: Var,
    pub lines: Vec<Option<PluckerLine>>,
}

impl TokenSet {
    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    pub fn cls_flags(&self) -> Vec<bool> {
        self.lines.iter().map(Option::is_none).collect()
    }
}

/// Non-overlapping `p`×`p` patches flattened row-major as `(dy, dx, c)`,
/// one row per patch in row-major patch order.
pub fn patchify<T: Real>(image: &Image, p: usize) -> Result<Tensor<T>> {
    let (w, h) = (image.width(), image.height());
    if w % p != 0 || h % p != 0 {
        return Err(Error::Geometry(format!("{w}x{h} image does not tile into {p}x{p} patches")));
    }
    let (ex, ey) = (w / p, h / p);
    let mut data = Vec::with_capacity(w * h * 3);
    for py in 0..ey {
        for px in 0..ex {
            for dy in 0..p {
                let row = (py * p + dy) * w + px * p;
                data.extend(image.data()[row * 3..(row + p) * 3].iter().map(|&v| T::of(v)));
            }
        }
    }
    Tensor::new(vec![ex * ey, p * p * 3], data)
}

/// Linear patch projection with a learned summary token prepended:
/// `[E² + 1, d_I]`, summary first.
pub fn patch_embed<T: Real>(tape: &Tape<T>, b: &Bindings, image: &Image, cfg: &ModelConfig) -> Result<Var> {
    let patches = tape.constant(patchify(image, cfg.patch)?);
    let proj = tape.linear(patches, b.get("embed/proj/weight")?, Some(b.get("embed/proj/bias")?))?;
    let cls = tape.reshape(b.get("embed/cls")?, &[1, cfg.image_dim])?;
    tape.concat_rows(&[cls, proj])
}

/// Appends `(d, m)` of each token's line; summary tokens get zeros.
pub fn concat_plucker<T: Real>(tape: &Tape<T>, tokens: Var, lines: &[Option<PluckerLine>]) -> Result<Var> {
    let shape = tape.shape(tokens);
    if shape.len() != 2 || shape[0] != lines.len() {
        return Err(Error::contract(format!("{} line slots for token matrix {shape:?}", lines.len())));
    }
    let coords = line_matrix(lines);
    let c = tape.constant(coords);
    tape.concat_cols(&[tokens, c])
}

/// `[count, 6]` matrix of line coordinates; `None` rows are zero.
pub fn line_matrix<T: Real>(lines: &[Option<PluckerLine>]) -> Tensor<T> {
    let data = lines.iter().flat_map(|l| l.map_or([0.0; 6], |l| l.coords())).map(T::of).collect();
    Tensor::from_parts(vec![lines.len(), 6], data)
}

/// Image tokens for one view: embedded patches plus the optional line
/// encoding, with the lines of the view's patch rays.
pub fn image_tokens<T: Real>(
    tape: &Tape<T>,
    b: &Bindings,
    image: &Image,
    patch_lines: &[PluckerLine],
    cfg: &ModelConfig,
) -> Result<TokenSet> {
    let emb = patch_embed(tape, b, image, cfg)?;
    let count = tape.shape(emb)[0];
    if patch_lines.len() + 1 != count {
        return Err(Error::contract(format!(
            "{} patch rays for {} patch tokens",
            patch_lines.len(),
            count - 1
        )));
    }
    let lines: Vec<Option<PluckerLine>> = std::iter::once(None).chain(patch_lines.iter().copied().map(Some)).collect();
    let tokens = if cfg.plucker_encoding {
        concat_plucker(tape, emb, &lines)?
    } else {
        emb
    };
    Ok(TokenSet { tokens, lines })
}

/// Query tokens: the grid lines' coordinates through the learned 6→d_D
/// projection, or free learned tokens when line input is disabled.
pub fn query_tokens<T: Real>(tape: &Tape<T>, b: &Bindings, grid_lines: &[PluckerLine], cfg: &ModelConfig) -> Result<TokenSet> {
    if grid_lines.len() != cfg.query_count() {
        return Err(Error::contract(format!(
            "{} grid lines for a {}-token query grid",
            grid_lines.len(),
            cfg.query_count()
        )));
    }
    let lines: Vec<Option<PluckerLine>> = grid_lines.iter().copied().map(Some).collect();
    let tokens = if cfg.grid_line_input {
        let coords = tape.constant(line_matrix(&lines));
        tape.linear(coords, b.get("query/proj/weight")?, Some(b.get("query/proj/bias")?))?
    } else {
        b.get("query/tokens")?
    };
    Ok(TokenSet { tokens, lines })
}
