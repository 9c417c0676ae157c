use crate::error::{Error, Result};
use crate::real::Real;
use crate::tensor::{Tape, Tensor, Var};

impl<T: Real> Tape<T> {
    pub fn reshape(&self, x: Var, shape: &[usize]) -> Result<Var> {
        let xv = self.value(x);
        if shape.iter().product::<usize>() != xv.numel() || shape.contains(&0) {
            return Err(Error::dim(format!("cannot reshape {:?} into {shape:?}", xv.shape())));
        }
        let result = Tensor::from_parts(shape.to_vec(), xv.data().to_vec());
        Ok(self.push_op(result, &[x], move |g, sink| sink.add_slice(x, g)))
    }

    /// Swaps the last two axes.
    pub fn transpose(&self, x: Var) -> Result<Var> {
        let xv = self.value(x);
        let sh = xv.shape();
        if sh.len() < 2 {
            return Err(Error::dim(format!("transpose needs rank >= 2, got {sh:?}")));
        }
        let (r, c) = (sh[sh.len() - 2], sh[sh.len() - 1]);
        let batch = xv.numel() / (r * c);
        let out = transpose_blocks(xv.data(), batch, r, c);
        let mut shape = sh.to_vec();
        let len = shape.len();
        shape.swap(len - 2, len - 1);
        Ok(self.push_op(Tensor::from_parts(shape, out), &[x], move |g, sink| {
            let back = transpose_blocks(g, batch, c, r);
            sink.add_slice(x, &back);
        }))
    }

    /// `[a, b, c] -> [b, a, c]`.
    pub fn swap_leading(&self, x: Var) -> Result<Var> {
        let xv = self.value(x);
        let &[a, b, c] = xv.shape() else {
            return Err(Error::dim(format!("swap_leading needs rank 3, got {:?}", xv.shape())));
        };
        let out = swap01(xv.data(), a, b, c);
        Ok(self.push_op(Tensor::from_parts(vec![b, a, c], out), &[x], move |g, sink| {
            let back = swap01(g, b, a, c);
            sink.add_slice(x, &back);
        }))
    }

    /// Concatenates along the first axis.
    pub fn concat_rows(&self, xs: &[Var]) -> Result<Var> {
        let values: Vec<_> = xs.iter().map(|&v| self.value(v)).collect();
        let first = values.first().ok_or_else(|| Error::dim("concat of nothing"))?;
        let tail = &first.shape()[1..];
        let mut rows = 0;
        for v in &values {
            if v.rank() == 0 || &v.shape()[1..] != tail {
                return Err(Error::dim(format!(
                    "concat_rows: {:?} does not stack with {:?}",
                    v.shape(),
                    first.shape()
                )));
            }
            rows += v.shape()[0];
        }
        let mut shape = vec![rows];
        shape.extend_from_slice(tail);
        let data: Vec<T> = values.iter().flat_map(|v| v.data().iter().copied()).collect();
        let sizes: Vec<usize> = values.iter().map(|v| v.numel()).collect();
        let inputs = xs.to_vec();
        Ok(self.push_op(Tensor::from_parts(shape, data), xs, move |g, sink| {
            let mut off = 0;
            for (v, n) in inputs.iter().zip(&sizes) {
                sink.add_slice(*v, &g[off..off + n]);
                off += n;
            }
        }))
    }

    /// Concatenates rank-2 tensors along the last axis.
    pub fn concat_cols(&self, xs: &[Var]) -> Result<Var> {
        let values: Vec<_> = xs.iter().map(|&v| self.value(v)).collect();
        let first = values.first().ok_or_else(|| Error::dim("concat of nothing"))?;
        let rows = first.shape()[0];
        let mut widths = Vec::with_capacity(values.len());
        for v in &values {
            if v.rank() != 2 || v.shape()[0] != rows {
                return Err(Error::dim(format!(
                    "concat_cols: {:?} does not align with {:?}",
                    v.shape(),
                    first.shape()
                )));
            }
            widths.push(v.shape()[1]);
        }
        let total: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for (v, &w) in values.iter().zip(&widths) {
                data.extend_from_slice(&v.data()[r * w..(r + 1) * w]);
            }
        }
        let inputs = xs.to_vec();
        Ok(self.push_op(Tensor::from_parts(vec![rows, total], data), xs, move |g, sink| {
            let mut col = 0;
            for (v, &w) in inputs.iter().zip(&widths) {
                sink.add(*v, |gv| {
                    for r in 0..rows {
                        let src = &g[r * total + col..r * total + col + w];
                        gv[r * w..(r + 1) * w].iter_mut().zip(src).for_each(|(a, &b)| *a += b);
                    }
                });
                col += w;
            }
        }))
    }

    /// Columns `start..end` of a rank-2 tensor.
    pub fn slice_cols(&self, x: Var, start: usize, end: usize) -> Result<Var> {
        let xv = self.value(x);
        let &[rows, cols] = xv.shape() else {
            return Err(Error::dim(format!("slice_cols needs rank 2, got {:?}", xv.shape())));
        };
        if start >= end || end > cols {
            return Err(Error::dim(format!("column range {start}..{end} of {cols}")));
        }
        let w = end - start;
        let data: Vec<T> = (0..rows)
            .flat_map(|r| xv.data()[r * cols + start..r * cols + end].iter().copied())
            .collect();
        Ok(self.push_op(Tensor::from_parts(vec![rows, w], data), &[x], move |g, sink| {
            sink.add(x, |gx| {
                for r in 0..rows {
                    gx[r * cols + start..r * cols + end]
                        .iter_mut()
                        .zip(&g[r * w..(r + 1) * w])
                        .for_each(|(a, &b)| *a += b);
                }
            });
        }))
    }

    /// Rows `start..end` along the first axis.
    pub fn slice_rows(&self, x: Var, start: usize, end: usize) -> Result<Var> {
        let xv = self.value(x);
        let rows = *xv.shape().first().ok_or_else(|| Error::dim("slice of scalar"))?;
        if start >= end || end > rows {
            return Err(Error::dim(format!("row range {start}..{end} of {rows}")));
        }
        let stride = xv.numel() / rows;
        let mut shape = xv.shape().to_vec();
        shape[0] = end - start;
        let data = xv.data()[start * stride..end * stride].to_vec();
        Ok(self.push_op(Tensor::from_parts(shape, data), &[x], move |g, sink| {
            sink.add(x, |gx| {
                gx[start * stride..end * stride].iter_mut().zip(g).for_each(|(a, &b)| *a += b);
            });
        }))
    }

    /// Places the rows of `src` at positions `rows` of a `[total, c]` output
    /// whose remaining rows hold the constant `fill`.
    pub fn scatter_rows(&self, src: Var, rows: &[usize], total: usize, fill: &[T]) -> Result<Var> {
        let sv = self.value(src);
        let &[n, c] = sv.shape() else {
            return Err(Error::dim(format!("scatter_rows needs rank 2, got {:?}", sv.shape())));
        };
        if rows.len() != n || fill.len() != c || rows.iter().any(|&r| r >= total) {
            return Err(Error::dim("scatter_rows: index set does not match source"));
        }
        let mut data: Vec<T> = (0..total).flat_map(|_| fill.iter().copied()).collect();
        for (i, &r) in rows.iter().enumerate() {
            data[r * c..(r + 1) * c].copy_from_slice(&sv.data()[i * c..(i + 1) * c]);
        }
        let rows = rows.to_vec();
        Ok(self.push_op(Tensor::from_parts(vec![total, c], data), &[src], move |g, sink| {
            sink.add(src, |gs| {
                for (i, &r) in rows.iter().enumerate() {
                    gs[i * c..(i + 1) * c]
                        .iter_mut()
                        .zip(&g[r * c..(r + 1) * c])
                        .for_each(|(a, &b)| *a += b);
                }
            });
        }))
    }
}

fn transpose_blocks<T: Real>(x: &[T], batch: usize, r: usize, c: usize) -> Vec<T> {
    let mut out = vec![T::zero(); x.len()];
    for b in 0..batch {
        let src = &x[b * r * c..(b + 1) * r * c];
        let dst = &mut out[b * r * c..(b + 1) * r * c];
        for i in 0..r {
            for j in 0..c {
                dst[j * r + i] = src[i * c + j];
            }
        }
    }
    out
}

fn swap01<T: Real>(x: &[T], a: usize, b: usize, c: usize) -> Vec<T> {
    let mut out = vec![T::zero(); x.len()];
    for i in 0..a {
        for j in 0..b {
            out[(j * a + i) * c..(j * a + i + 1) * c].copy_from_slice(&x[(i * b + j) * c..(i * b + j + 1) * c]);
        }
    }
    out
}
