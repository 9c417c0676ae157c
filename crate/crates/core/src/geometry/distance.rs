//! Pairwise line-distance matrices used as attention biases.

use rayon::prelude::*;

use super::plucker::{line_distance, PluckerLine};
use crate::real::Real;
use crate::tensor::Tensor;

/// Row-major `rows`×`cols` distances; columns flagged as summary tokens
/// hold exactly zero.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceBias {
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    cls: Vec<bool>,
}

/// Distances from every query line to every key. `None` keys are summary
/// tokens without geometry and get a zero column.
pub fn distance_matrix(queries: &[PluckerLine], keys: &[Option<PluckerLine>]) -> DistanceBias {
    let cols = keys.len();
    let mut values = vec![0.0; queries.len() * cols];
    if cols > 0 {
        values.par_chunks_mut(cols).zip(queries.par_iter()).for_each(|(row, q)| {
            for (out, k) in row.iter_mut().zip(keys) {
                *out = k.as_ref().map_or(0.0, |k| line_distance(q, k));
            }
        });
    }
    DistanceBias {
        rows: queries.len(),
        cols,
        values,
        cls: keys.iter().map(Option::is_none).collect(),
    }
}

impl DistanceBias {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn cls_flags(&self) -> &[bool] {
        &self.cls
    }

    pub fn get(&self, q: usize, k: usize) -> f64 {
        self.values[q * self.cols + k]
    }

    pub fn to_tensor<T: Real>(&self) -> Tensor<T> {
        Tensor::from_parts(vec![self.rows, self.cols], self.values.iter().map(|&v| T::of(v)).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::lines::grid_lines;

    #[test]
    fn self_distances_are_symmetric_with_zero_diagonal() {
        let lines = grid_lines(3);
        let keys: Vec<_> = lines.iter().copied().map(Some).collect();
        let d = distance_matrix(&lines, &keys);
        for i in 0..d.rows() {
            assert_eq!(d.get(i, i), 0.0);
            for j in 0..d.cols() {
                assert!((d.get(i, j) - d.get(j, i)).abs() <= 1e-12);
                assert!(d.get(i, j) >= 0.0);
            }
        }
    }

    #[test]
    fn summary_columns_are_zero() {
        let lines = grid_lines(2);
        let d = distance_matrix(&lines, &[None, None]);
        assert!(d.values().iter().all(|&v| v == 0.0));
        assert_eq!(d.cls_flags(), &[true, true]);
        let mixed = distance_matrix(&lines, &[None, Some(lines[5])]);
        assert!((0..12).all(|q| mixed.get(q, 0) == 0.0));
        assert!((0..12).any(|q| mixed.get(q, 1) > 0.0));
    }
}
