//! Query-line set: one line per cell of each feature plane, orthogonal to
//! that plane, spanning the `[-1, 1]³` scene box.

use super::plucker::{PluckerLine, Vec3};

/// Feature planes in token order. Each names its two in-plane axes `(a, b)`
/// and the axis its lines run along.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Plane {
    Xy,
    Yz,
    Zx,
}

impl Plane {
    pub const ALL: [Plane; 3] = [Plane::Xy, Plane::Yz, Plane::Zx];

    /// Indices of the `(a, b, normal)` world axes.
    pub fn axes(self) -> (usize, usize, usize) {
        match self {
            Plane::Xy => (0, 1, 2),
            Plane::Yz => (1, 2, 0),
            Plane::Zx => (2, 0, 1),
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Plane::Xy => "xy",
            Plane::Yz => "yz",
            Plane::Zx => "zx",
        }
    }
}

/// Center of cell `i` of an `n`-cell split of `[-1, 1]`.
pub fn cell_center(i: usize, n: usize) -> f64 {
    -1.0 + 2.0 * (i as f64 + 0.5) / n as f64
}

/// Flat token index of cell `(i, j)` of `plane` for an `n`×`n` grid; `i`
/// runs along the plane's first axis.
pub fn token_index(plane: Plane, i: usize, j: usize, n: usize) -> usize {
    plane.index() * n * n + i * n + j
}

/// Inverse of [`token_index`].
pub fn token_cell(index: usize, n: usize) -> (Plane, usize, usize) {
    let plane = Plane::ALL[index / (n * n)];
    let rem = index % (n * n);
    (plane, rem / n, rem % n)
}

/// The `3n²` grid lines in token order.
pub fn grid_lines(n: usize) -> Vec<PluckerLine> {
    let mut lines = Vec::with_capacity(3 * n * n);
    for plane in Plane::ALL {
        let (a, b, normal) = plane.axes();
        let mut d = Vec3::zeros();
        d[normal] = 1.0;
        for i in 0..n {
            for j in 0..n {
                let mut o = Vec3::zeros();
                o[a] = cell_center(i, n);
                o[b] = cell_center(j, n);
                lines.push(PluckerLine::from_parts(d, o.cross(&d)));
            }
        }
    }
    lines
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_cell_gives_axes() {
        let lines = grid_lines(1);
        let dirs: Vec<Vec3> = lines.iter().map(PluckerLine::direction).collect();
        assert_eq!(dirs, vec![Vec3::z(), Vec3::x(), Vec3::y()]);
        assert!(lines.iter().all(|l| l.moment() == Vec3::zeros()));
    }

    #[test]
    fn two_cells_at_half() {
        let lines = grid_lines(2);
        assert_eq!(lines.len(), 12);
        for l in &lines {
            let p = l.closest_point_to_origin();
            let nonzero: Vec<f64> = p.iter().copied().filter(|v| *v != 0.0).collect();
            assert_eq!(nonzero.len(), 2);
            assert!(nonzero.iter().all(|v| v.abs() == 0.5));
        }
        // xy plane, i = 1 (x = +0.5), j = 0 (y = -0.5)
        let p = lines[token_index(Plane::Xy, 1, 0, 2)].closest_point_to_origin();
        assert_eq!(p, Vec3::new(0.5, -0.5, 0.0));
        let p = lines[token_index(Plane::Zx, 0, 1, 2)].closest_point_to_origin();
        assert_eq!(p, Vec3::new(0.5, 0.0, -0.5));
    }

    #[test]
    fn every_line_crosses_the_box() {
        for n in 1..6 {
            for l in grid_lines(n) {
                let p = l.closest_point_to_origin();
                assert!(p.iter().all(|v| v.abs() < 1.0));
            }
        }
    }

    #[test]
    fn index_round_trip() {
        let n = 5;
        for k in 0..3 * n * n {
            let (plane, i, j) = token_cell(k, n);
            assert_eq!(token_index(plane, i, j, n), k);
        }
    }

    #[test]
    fn deterministic() {
        assert_eq!(grid_lines(7), grid_lines(7));
    }
}
