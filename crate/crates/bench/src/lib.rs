//! Fixtures shared by the criterion benches.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use linefield_core::data::{generate_scene, SceneInstance, Split, SynthSpec};
use linefield_core::geometry::{PluckerLine, Vec3};
use linefield_core::model::ModelConfig;
use linefield_core::render::RaySampling;
use linefield_core::train::TrainConfig;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_lines(n: usize, seed: u64) -> Vec<PluckerLine> {
    let mut r = rng(seed);
    let v = |r: &mut ChaCha8Rng| Vec3::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0), r.random_range(-1.0..1.0));
    (0..n)
        .map(|_| loop {
            let (o, d) = (v(&mut r), v(&mut r));
            if let Ok(l) = PluckerLine::from_ray(o, d) {
                break l;
            }
        })
        .collect()
}

/// The desk-scale configuration of the single-scene overfit run.
pub fn desk_config() -> TrainConfig {
    TrainConfig {
        model: ModelConfig {
            layers: 4,
            hidden: 64,
            grid: 8,
            triplane_dim: 16,
            ..ModelConfig::default()
        },
        render: RaySampling {
            samples: 64,
            jitter: true,
            ..RaySampling::default()
        },
        input_views: Some(vec![0, 4]),
        target_views: Some(vec![2, 6]),
        ..TrainConfig::default()
    }
}

pub fn desk_scene() -> SceneInstance {
    let spec = SynthSpec {
        min_primitives: 2,
        max_primitives: 2,
        views: 8,
        resolution: 64,
        ..SynthSpec::default()
    };
    generate_scene(&spec, 1, Split::Train).expect("valid spec").instance
}
