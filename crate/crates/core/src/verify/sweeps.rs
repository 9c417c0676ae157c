//! Randomized property sweeps over the geometry routines.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::oracle::line_distance_exact;
use crate::geometry::{PluckerLine, Vec3};

/// Ray pair `(o1, d1, o2, d2)` with unit directions.
pub type RayPair = (Vec3, Vec3, Vec3, Vec3);

fn unit(rng: &mut impl Rng) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

fn point(rng: &mut impl Rng, extent: f64) -> Vec3 {
    Vec3::new(
        rng.random_range(-extent..extent),
        rng.random_range(-extent..extent),
        rng.random_range(-extent..extent),
    )
}

/// Tilts `d` by `angle` radians towards a random perpendicular direction.
fn tilt(rng: &mut impl Rng, d: Vec3, angle: f64) -> Vec3 {
    let u = d.cross(&unit(rng)).normalize();
    (d * angle.cos() + u * angle.sin()).normalize()
}

/// Mixed population: generic skew pairs, nearly parallel and nearly
/// anti-parallel pairs whose angle straddles the parallel threshold, exactly
/// parallel pairs and intersecting pairs.
pub fn random_ray_pairs(n: usize, seed: u64) -> Vec<RayPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let o1 = point(&mut rng, 2.0);
            let d1 = unit(&mut rng);
            match i % 10 {
                0..=3 => (o1, d1, point(&mut rng, 2.0), unit(&mut rng)),
                4..=6 => {
                    let angle = 10f64.powf(rng.random_range(-13.0..-5.0));
                    let sign = if i % 10 == 6 { -1.0 } else { 1.0 };
                    (o1, d1, point(&mut rng, 2.0), sign * tilt(&mut rng, d1, angle))
                }
                7 => {
                    let sign = if rng.random_bool(0.5) { -1.0 } else { 1.0 };
                    (o1, d1, point(&mut rng, 2.0), sign * d1)
                }
                _ => {
                    let meet = o1 + d1 * rng.random_range(-2.0..2.0);
                    let d2 = unit(&mut rng);
                    (o1, d1, meet + d2 * rng.random_range(-2.0..2.0), d2)
                }
            }
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct SweepReport {
    pub pairs: usize,
    pub max_abs_err: f64,
    pub worst: Option<RayPair>,
}

/// Compares `distance` on the Plücker form of each pair with the exact
/// closest-point oracle on the same stored origins and directions.
pub fn line_distance_sweep(distance: impl Fn(&PluckerLine, &PluckerLine) -> f64, pairs: &[RayPair]) -> SweepReport {
    let mut report = SweepReport {
        pairs: pairs.len(),
        max_abs_err: 0.0,
        worst: None,
    };
    for &(o1, d1, o2, d2) in pairs {
        let (Ok(l1), Ok(l2)) = (PluckerLine::from_ray(o1, d1), PluckerLine::from_ray(o2, d2)) else {
            continue;
        };
        // the oracle sees exactly the stored (normalized) directions
        let exact = line_distance_exact(o1.into(), l1.direction().into(), o2.into(), l2.direction().into());
        let err = (distance(&l1, &l2) - exact).abs();
        if !(err <= report.max_abs_err) {
            report.max_abs_err = if err.is_nan() { f64::INFINITY } else { err };
            report.worst = Some((o1, d1, o2, d2));
        }
    }
    report
}

/// Largest change of the Plücker coordinates when the origin slides along
/// the ray, and largest `|d·m|`, over `n` random rays.
pub fn origin_invariance_sweep(n: usize, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut shift_err = 0.0f64;
    let mut incidence = 0.0f64;
    for _ in 0..n {
        let o = point(&mut rng, 2.0);
        let dir = unit(&mut rng) * rng.random_range(0.1..10.0);
        let a = PluckerLine::from_ray(o, dir).expect("non-degenerate ray");
        let s = rng.random_range(-5.0..5.0);
        let b = PluckerLine::from_ray(o + a.direction() * s, dir).expect("non-degenerate ray");
        for (x, y) in a.coords().iter().zip(b.coords()) {
            shift_err = shift_err.max((x - y).abs());
        }
        incidence = incidence.max(a.direction().dot(&a.moment()).abs());
    }
    (shift_err, incidence)
}
