//! Single-scene overfit at desk scale: trains on two input and two target
//! views of one synthetic scene and prints PSNR per view.
//!
//! `cargo run --release -p linefield-core --example overfit -- [steps] [lr]`

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

use std::time::Instant;

use linefield_core::data::{generate_scene, psnr, Split, SynthSpec};
use linefield_core::model::{GridGeometry, ModelConfig};
use linefield_core::render::RaySampling;
use linefield_core::train::{reconstruct, run, NoPerceptual, RunOptions, TrainConfig};

fn main() -> linefield_core::Result<()> {
    let mut args = std::env::args().skip(1);
    let defaults = TrainConfig::default();
    let steps: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(defaults.steps);
    let lr: f64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(defaults.lr);

    let spec = SynthSpec {
        min_primitives: 2,
        max_primitives: 2,
        views: 8,
        resolution: 64,
        ..SynthSpec::default()
    };
    let scene = generate_scene(&spec, 1, Split::Train)?.instance;
    let inputs = vec![0, 4];
    let cfg = TrainConfig {
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
        steps,
        lr,
        input_views: Some(inputs.clone()),
        target_views: Some(vec![2, 6]),
        ..defaults
    };
    let t0 = Instant::now();
    let data = vec![scene.clone()];
    let state = run::<f64>(&data, &cfg, &NoPerceptual, RunOptions::default(), |r| {
        if r.step % 50 == 0 {
            eprintln!(
                "{:>5} lr {:.3e} loss {:.5} {:.1}s",
                r.step,
                r.lr,
                r.loss,
                t0.elapsed().as_secs_f64()
            );
        }
    })?;

    let grid = GridGeometry::<f64>::new(cfg.model.grid);
    let rec = reconstruct(&state.model, &grid, &scene, &inputs, cfg.pose_frame)?;
    let eval = RaySampling {
        samples: 64,
        ..RaySampling::default()
    };
    for (v, role) in [
        (0, "input"),
        (4, "input"),
        (2, "target"),
        (6, "target"),
        (1, "held out"),
        (3, "held out"),
    ] {
        let img = rec.render(v, &eval)?;
        println!("view {v} ({role}): {:.2} dB", psnr(&img, &scene.views[v].image)?);
    }
    println!("{:.1}s", t0.elapsed().as_secs_f64());
    Ok(())
}
