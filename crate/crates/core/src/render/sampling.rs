//! Ray–box clipping and sample placement.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Vec3;

/// Half-extent of the scene box `[-1, 1]³`.
pub const BOX_HALF: f64 = 1.0;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RaySampling {
    /// Samples per ray (`r`).
    pub samples: usize,
    /// Jitter samples inside their strata (training); midpoints otherwise.
    pub jitter: bool,
    pub background: [f64; 3],
}

impl Default for RaySampling {
    fn default() -> Self {
        Self {
            samples: 64,
            jitter: false,
            background: [1.0; 3],
        }
    }
}

impl RaySampling {
    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::Config("render.samples must be at least 1".into()));
        }
        if self.background.iter().any(|c| !(0.0..=1.0).contains(c)) {
            return Err(Error::Config("render.background channels must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Slab intersection of a ray with `[-1, 1]³`; `t_near` is clamped to 0 for
/// origins inside the box. `None` when the ray misses or only grazes it.
pub fn ray_box_clip(origin: Vec3, direction: Vec3) -> Option<(f64, f64)> {
    let mut near = f64::NEG_INFINITY;
    let mut far = f64::INFINITY;
    for k in 0..3 {
        let (o, d) = (origin[k], direction[k]);
        if d == 0.0 {
            if o.abs() > BOX_HALF {
                return None;
            }
            continue;
        }
        let t1 = (-BOX_HALF - o) / d;
        let t2 = (BOX_HALF - o) / d;
        near = near.max(t1.min(t2));
        far = far.min(t1.max(t2));
    }
    let near = near.max(0.0);
    (near < far).then_some((near, far))
}

/// Sample distances in `r` equal strata of `[near, far]` (midpoints, or
/// uniformly jittered), with segment lengths `t_{i+1} − t_i` and
/// `far − t_r` for the last.
pub fn stratified<R: rand::RngCore + ?Sized>(near: f64, far: f64, r: usize, jitter: Option<&mut R>) -> (Vec<f64>, Vec<f64>) {
    let step = (far - near) / r as f64;
    let ts: Vec<f64> = match jitter {
        Some(rng) => (0..r).map(|i| near + (i as f64 + rng.random::<f64>()) * step).collect(),
        None => (0..r).map(|i| near + (i as f64 + 0.5) * step).collect(),
    };
    let mut deltas: Vec<f64> = ts.windows(2).map(|w| w[1] - w[0]).collect();
    deltas.push(far - ts[r - 1]);
    // jitter can collapse neighbouring samples; keep lengths positive
    let floor = step * 1e-9;
    deltas.iter_mut().for_each(|d| *d = d.max(floor));
    (ts, deltas)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn clip_cases() {
        assert_eq!(ray_box_clip(Vec3::new(0.0, 0.0, -2.0), Vec3::z()), Some((1.0, 3.0)));
        assert_eq!(ray_box_clip(Vec3::new(0.0, 5.0, 0.0), Vec3::z()), None);
        let (near, far) = ray_box_clip(Vec3::new(0.2, 0.3, 0.1), Vec3::x()).unwrap();
        assert_eq!(near, 0.0);
        assert!((far - 0.8).abs() < 1e-15);
        assert_eq!(ray_box_clip(Vec3::new(0.0, 0.0, 2.0), Vec3::z()), None);
    }

    #[test]
    fn strata() {
        let (ts, ds) = stratified::<ChaCha8Rng>(1.0, 3.0, 4, None);
        assert_eq!(ts, vec![1.25, 1.75, 2.25, 2.75]);
        assert_eq!(ds, vec![0.5, 0.5, 0.5, 0.25]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (ts, ds) = stratified(0.0, 1.0, 8, Some(&mut rng));
        for (i, t) in ts.iter().enumerate() {
            assert!(*t >= i as f64 / 8.0 && *t < (i + 1) as f64 / 8.0);
        }
        assert!(ds.iter().all(|d| *d > 0.0));
    }
}
