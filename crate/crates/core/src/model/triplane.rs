//! Query tokens to feature planes.

use super::config::ModelConfig;
use crate::error::{Error, Result};
use crate::real::Real;
use crate::tensor::{Tape, Var};

/// Splits `[3N², d_D]` tokens into the xy, yz and zx token grids and
/// upsamples each with the shared stride-2 transposed convolution. Each
/// plane comes out as `[M, M, d_T]`, indexed `[i][j]` along the plane's
/// first and second axis.
pub fn tokens_to_triplane<T: Real>(tape: &Tape<T>, tokens: Var, kernel: Var, cfg: &ModelConfig) -> Result<[Var; 3]> {
    let n = cfg.grid;
    let shape = tape.shape(tokens);
    if shape != [3 * n * n, cfg.hidden] {
        return Err(Error::dim(format!(
            "expected [{}, {}] grid tokens, got {shape:?}",
            3 * n * n,
            cfg.hidden
        )));
    }
    let m = 2 * n;
    let dt = tape.shape(kernel)[1];
    let plane = |p: usize| -> Result<Var> {
        let rows = tape.slice_rows(tokens, p * n * n, (p + 1) * n * n)?;
        let chw = tape.transpose(rows)?;
        let chw = tape.reshape(chw, &[cfg.hidden, n, n])?;
        let up = tape.transposed_conv_2x(chw, kernel)?;
        let flat = tape.reshape(up, &[dt, m * m])?;
        let hwc = tape.transpose(flat)?;
        tape.reshape(hwc, &[m, m, dt])
    };
    Ok([plane(0)?, plane(1)?, plane(2)?])
}
