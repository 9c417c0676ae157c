//! Bilinear lookups into feature planes.

use crate::error::{Error, Result};
use crate::geometry::Plane;
use crate::real::Real;
use crate::tensor::{Tape, Tensor, Var};

/// Node `i` of an `m`-node axis sits at `-1 + 2(i + 0.5)/m`; coordinates
/// beyond the outer nodes clamp to them. Returns the two neighbouring
/// nodes and the weight of the second.
fn axis_stencil(x: f64, m: usize) -> (usize, usize, f64) {
    let u = ((x + 1.0) * m as f64 / 2.0 - 0.5).clamp(0.0, (m - 1) as f64);
    let i0 = (u.floor() as usize).min(m.saturating_sub(2));
    let i1 = (i0 + 1).min(m - 1);
    (i0, i1, u - i0 as f64)
}

/// Flat node offsets and weights of the 4-node bilinear stencil at `(a, b)`
/// on an `m`×`m` grid.
fn stencil(a: f64, b: f64, m: usize) -> [(usize, f64); 4] {
    let (i0, i1, fa) = axis_stencil(a, m);
    let (j0, j1, fb) = axis_stencil(b, m);
    [
        (i0 * m + j0, (1.0 - fa) * (1.0 - fb)),
        (i0 * m + j1, (1.0 - fa) * fb),
        (i1 * m + j0, fa * (1.0 - fb)),
        (i1 * m + j1, fa * fb),
    ]
}

fn plane_dims<T: Real>(grid: &Tensor<T>) -> Result<(usize, usize)> {
    match *grid.shape() {
        [m, m2, c] if m == m2 => Ok((m, c)),
        ref s => Err(Error::dim(format!("feature plane must be [M, M, C], got {s:?}"))),
    }
}

/// Feature at `(a, b)` of one `[M, M, C]` plane, without a tape.
pub fn sample_plane_value<T: Real>(grid: &Tensor<T>, a: f64, b: f64) -> Result<Vec<T>> {
    let (m, c) = plane_dims(grid)?;
    let mut out = vec![T::zero(); c];
    for (node, w) in stencil(a, b, m) {
        let w = T::of(w);
        for (o, &g) in out.iter_mut().zip(&grid.data()[node * c..(node + 1) * c]) {
            *o += w * g;
        }
    }
    Ok(out)
}

/// Projection of `p` onto `plane`'s in-plane axes.
pub fn project(plane: Plane, p: [f64; 3]) -> (f64, f64) {
    let (a, b, _) = plane.axes();
    (p[a], p[b])
}

struct Lookup<T> {
    nodes: Vec<[usize; 4]>,
    weights: Vec<[T; 4]>,
}

impl<T: Real> Lookup<T> {
    fn new(coords: impl Iterator<Item = (f64, f64)>, m: usize) -> Self {
        let (mut nodes, mut weights) = (Vec::new(), Vec::new());
        for (a, b) in coords {
            let s = stencil(a, b, m);
            nodes.push(s.map(|(n, _)| n));
            weights.push(s.map(|(_, w)| T::of(w)));
        }
        Self { nodes, weights }
    }

    fn gather_into(&self, grid: &[T], c: usize, out: &mut [T]) {
        for (p, (nodes, ws)) in self.nodes.iter().zip(&self.weights).enumerate() {
            let row = &mut out[p * c..(p + 1) * c];
            for (&n, &w) in nodes.iter().zip(ws) {
                for (o, &g) in row.iter_mut().zip(&grid[n * c..(n + 1) * c]) {
                    *o += w * g;
                }
            }
        }
    }

    fn scatter_into(&self, g: &[T], c: usize, grad: &mut [T]) {
        for (p, (nodes, ws)) in self.nodes.iter().zip(&self.weights).enumerate() {
            let row = &g[p * c..(p + 1) * c];
            for (&n, &w) in nodes.iter().zip(ws) {
                for (acc, &gi) in grad[n * c..(n + 1) * c].iter_mut().zip(row) {
                    *acc += w * gi;
                }
            }
        }
    }
}

impl<T: Real> Tape<T> {
    /// Bilinear samples of an `[M, M, C]` plane at in-plane coordinates,
    /// as a `[P, C]` matrix.
    pub fn sample_plane(&self, grid: Var, coords: &[(f64, f64)]) -> Result<Var> {
        let gv = self.value(grid);
        let (m, c) = plane_dims(&gv)?;
        if coords.is_empty() {
            return Err(Error::dim("sample_plane needs at least one coordinate"));
        }
        let lookup = Lookup::<T>::new(coords.iter().copied(), m);
        let mut out = vec![T::zero(); coords.len() * c];
        lookup.gather_into(gv.data(), c, &mut out);
        let result = Tensor::from_parts(vec![coords.len(), c], out);
        Ok(self.push_op(result, &[grid], move |g, sink| {
            sink.add(grid, |gg| lookup.scatter_into(g, c, gg));
        }))
    }

    /// `f_xy + f_yz + f_zx` at each point: the three planes sampled at the
    /// point's projections `(x, y)`, `(y, z)`, `(z, x)`. Returns `[P, C]`.
    pub fn point_features(&self, planes: [Var; 3], points: &[[f64; 3]]) -> Result<Var> {
        let values = planes.map(|p| self.value(p));
        let (m, c) = plane_dims(&values[0])?;
        if values.iter().any(|v| v.shape() != values[0].shape()) {
            return Err(Error::dim("feature planes differ in shape"));
        }
        if points.is_empty() {
            return Err(Error::dim("point_features needs at least one point"));
        }
        let lookups: [Lookup<T>; 3] = Plane::ALL.map(|plane| Lookup::new(points.iter().map(|&p| project(plane, p)), m));
        let mut out = vec![T::zero(); points.len() * c];
        for (l, v) in lookups.iter().zip(&values) {
            l.gather_into(v.data(), c, &mut out);
        }
        drop(values);
        let result = Tensor::from_parts(vec![points.len(), c], out);
        Ok(self.push_op(result, &planes, move |g, sink| {
            for (l, &p) in lookups.iter().zip(&planes) {
                sink.add(p, |gg| l.scatter_into(g, c, gg));
            }
        }))
    }
}
