//! Lines in Plücker coordinates `(d, m)` with unit `d` and moment `m = o × d`.

use nalgebra::Vector3;

use super::compensated::{cross, dot, dot2, norm, Dot2, V3};
use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Threshold on `‖d1 × d2‖` of the plain two-branch rule
/// ([`line_distance_with_threshold`]).
pub const EPS_PAR: f64 = 1e-9;

/// Cutoff on `‖d1 × d2‖` used by [`line_distance`]: below it the directions
/// agree to rounding and the pair is treated as parallel.
pub const PARALLEL_CUTOFF: f64 = 1e-14;

/// Smallest direction norm accepted when building a line from a ray.
pub const MIN_DIRECTION_NORM: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PluckerLine {
    d: V3,
    m: V3,
}

impl PluckerLine {
    /// Line through `origin` along `direction`.
    pub fn from_ray(origin: Vec3, direction: Vec3) -> Result<Self> {
        let n = norm(direction.into());
        if !(n > MIN_DIRECTION_NORM) || !n.is_finite() {
            return Err(Error::DegenerateRay(n));
        }
        let d = [direction.x / n, direction.y / n, direction.z / n];
        Ok(Self {
            d,
            m: cross(origin.into(), d),
        })
    }

    /// Builds a line from raw coordinates without normalizing. Callers
    /// guarantee `‖d‖ = 1` and `d·m = 0`.
    pub fn from_parts(d: Vec3, m: Vec3) -> Self {
        Self { d: d.into(), m: m.into() }
    }

    pub fn direction(&self) -> Vec3 {
        self.d.into()
    }

    pub fn moment(&self) -> Vec3 {
        self.m.into()
    }

    /// `(d, m)` as a 6-vector.
    pub fn coords(&self) -> [f64; 6] {
        let [a, b, c] = self.d;
        let [x, y, z] = self.m;
        [a, b, c, x, y, z]
    }

    /// Point on the line closest to the world origin.
    pub fn closest_point_to_origin(&self) -> Vec3 {
        let p = cross(self.d, self.m);
        let s = dot(self.d, self.d);
        Vec3::new(p[0] / s, p[1] / s, p[2] / s)
    }
}

/// Shortest distance between two lines.
///
/// Non-parallel pairs use `|d1·m2 + d2·m1| / ‖d1 × d2‖`, evaluated with
/// compensated arithmetic so it stays accurate for nearly parallel pairs;
/// pairs whose directions agree to rounding use `‖d1 × (m1 − (d1·d2) m2)‖`.
pub fn line_distance(a: &PluckerLine, b: &PluckerLine) -> f64 {
    line_distance_with_threshold(a, b, PARALLEL_CUTOFF)
}

/// Two-branch rule with an explicit parallel threshold on `‖d1 × d2‖`.
///
/// For `0 < ‖d1 × d2‖ ≤ eps` the parallel formula is not the limit of the
/// skew distance (that limit is the offset along the common normal), so a
/// large `eps` trades accuracy on nearly parallel pairs for nothing.
pub fn line_distance_with_threshold(a: &PluckerLine, b: &PluckerLine, eps: f64) -> f64 {
    let c = cross(a.d, b.d);
    let s = norm(c);
    if s > eps {
        skew_distance(a, b, s)
    } else {
        parallel_distance(a, b)
    }
}

/// Skew-branch formula with the denominator supplied. The reciprocal
/// product `d1·m2 + d2·m1` cancels heavily for nearly parallel lines, so it
/// is accumulated in doubled precision and the rounding residue of each
/// moment along its own direction (zero for exact lines) is removed.
pub(crate) fn skew_distance(a: &PluckerLine, b: &PluckerLine, cross_norm: f64) -> f64 {
    let mut num = Dot2::default();
    num.add_dot(a.d, b.m);
    num.add_dot(b.d, a.m);
    let residue_a = dot2(a.d, a.m) / dot(a.d, a.d);
    let residue_b = dot2(b.d, b.m) / dot(b.d, b.d);
    let dd = dot2(a.d, b.d);
    num.add_product(-dd, residue_a + residue_b);
    num.value().abs() / cross_norm
}

pub(crate) fn parallel_distance(a: &PluckerLine, b: &PluckerLine) -> f64 {
    let dd = dot(a.d, b.d);
    let diff = [a.m[0] - dd * b.m[0], a.m[1] - dd * b.m[1], a.m[2] - dd * b.m[2]];
    norm(cross(a.d, diff))
}
