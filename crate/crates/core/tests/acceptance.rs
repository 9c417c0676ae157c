//! Acceptance suite: one PASS/FAIL line per criterion. Run with
//! `cargo test -p linefield-core --test acceptance -- --nocapture` to see
//! the report.

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

use std::io::Write;
use std::time::{Duration, Instant};

use nalgebra::{Rotation3, UnitQuaternion};

use linefield_core::data::{export_scene, extrapolated_subset, generate_scene, load_srn, psnr, ssim, SceneInstance, Split, SynthSpec};
use linefield_core::geometry::{line_distance, Camera, Mat3, Vec3};
use linefield_core::image::Image;
use linefield_core::model::{GridGeometry, Model, ModelConfig};
use linefield_core::render::RaySampling;
use linefield_core::tensor::checkpoint::Checkpoint;
use linefield_core::train::{load_state, reconstruct, run, NoPerceptual, RunDir, RunOptions, TrainConfig};
use linefield_core::verify::selfcheck::{
    attention_checks, compositing_checks, distance_checks, invariance_checks, model_gradient_checks, operation_gradient_checks,
    render_gradient_checks, Check,
};

struct Outcome {
    id: u8,
    title: &'static str,
    passed: bool,
    /// Soft criteria are reported and flagged but do not fail the suite.
    soft: bool,
    detail: String,
}

impl Outcome {
    fn line(&self) -> String {
        let tag = match (self.passed, self.soft) {
            (true, _) => "PASS",
            (false, false) => "FAIL",
            (false, true) => "FAIL (soft, flagged)",
        };
        format!("[{tag}] {:>2}. {}: {}", self.id, self.title, self.detail)
    }
}

fn from_checks(id: u8, title: &'static str, checks: &[Check], elapsed: Duration, limit: Duration) -> Outcome {
    let mut detail: Vec<String> = Vec::new();
    let worst = checks.iter().filter(|c| !c.passed).map(|c| c.to_string()).collect::<Vec<_>>();
    for c in checks.iter().filter(|c| !c.name.starts_with("grad/")) {
        detail.push(format!("{} {:.2e}≤{:.0e}", c.name, c.value, c.bound));
    }
    let grads: Vec<&Check> = checks.iter().filter(|c| c.name.starts_with("grad/")).collect();
    if !grads.is_empty() {
        let max = grads.iter().map(|c| c.value).fold(0.0, f64::max);
        detail.push(format!("{} gradient checks, max rel err {max:.2e}", grads.len()));
    }
    let in_time = elapsed <= limit;
    detail.push(format!("{:.2}s (limit {}s)", elapsed.as_secs_f64(), limit.as_secs()));
    detail.extend(worst);
    Outcome {
        id,
        title,
        passed: checks.iter().all(|c| c.passed) && in_time,
        soft: false,
        detail: detail.join("; "),
    }
}

fn criterion_1() -> Outcome {
    let t = Instant::now();
    let checks = distance_checks(line_distance, 10_000, 101);
    from_checks(
        1,
        "line distance vs least-squares oracle",
        &checks,
        t.elapsed(),
        Duration::from_secs(5),
    )
}

fn criterion_2() -> Outcome {
    let t = Instant::now();
    let checks = invariance_checks(1_000, 102);
    from_checks(2, "origin invariance and d·m = 0", &checks, t.elapsed(), Duration::from_secs(60))
}

fn criterion_3() -> Outcome {
    let t = Instant::now();
    let mut checks = operation_gradient_checks(103);
    checks.extend(render_gradient_checks(104));
    checks.extend(model_gradient_checks(105));
    from_checks(3, "gradient suite", &checks, t.elapsed(), Duration::from_secs(120))
}

fn criterion_4() -> Outcome {
    let t = Instant::now();
    let checks = attention_checks(100, 106);
    from_checks(
        4,
        "attention reduction and monotonicity",
        &checks,
        t.elapsed(),
        Duration::from_secs(60),
    )
}

fn criterion_5() -> Outcome {
    let t = Instant::now();
    let checks = compositing_checks(1_000, 107);
    from_checks(
        5,
        "compositing conservation and closed form",
        &checks,
        t.elapsed(),
        Duration::from_secs(60),
    )
}

const OVERFIT_TARGET_DB: f64 = 25.0;
const OVERFIT_HELDOUT_DB: f64 = 20.0;
const OVERFIT_LIMIT: Duration = Duration::from_secs(20 * 60);

fn criterion_6() -> Outcome {
    let spec = SynthSpec {
        min_primitives: 2,
        max_primitives: 2,
        views: 8,
        resolution: 64,
        ..SynthSpec::default()
    };
    let scene = generate_scene(&spec, 1, Split::Train).expect("scene").instance;
    let (inputs, targets, held_out) = (vec![0, 4], vec![2, 6], 1);
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
        steps: 2000,
        input_views: Some(inputs.clone()),
        target_views: Some(targets.clone()),
        ..TrainConfig::default()
    };
    let t = Instant::now();
    let data = vec![scene.clone()];
    let state = match run::<f64>(&data, &cfg, &NoPerceptual, RunOptions::default(), |_| {}) {
        Ok(s) => s,
        Err(e) => {
            return Outcome {
                id: 6,
                title: "single-scene overfit",
                passed: false,
                soft: false,
                detail: format!("training failed: {e}"),
            }
        }
    };
    let elapsed = t.elapsed();
    let grid = GridGeometry::<f64>::new(cfg.model.grid);
    let rec = reconstruct(&state.model, &grid, &scene, &inputs, cfg.pose_frame).expect("reconstruction");
    let eval = RaySampling {
        samples: 64,
        ..RaySampling::default()
    };
    let score = |v: usize| psnr(&rec.render(v, &eval).expect("render"), &scene.views[v].image).expect("psnr");
    let target_db: Vec<f64> = targets.iter().map(|&v| score(v)).collect();
    let held_db = score(held_out);
    let passed = target_db.iter().all(|&p| p >= OVERFIT_TARGET_DB) && held_db >= OVERFIT_HELDOUT_DB && elapsed <= OVERFIT_LIMIT;
    Outcome {
        id: 6,
        title: "single-scene overfit",
        passed,
        soft: false,
        detail: format!(
            "targets {:?} at {:.2?} dB (≥{OVERFIT_TARGET_DB}), held-out view {held_out} at {held_db:.2} dB (≥{OVERFIT_HELDOUT_DB}); \
             {} steps in {:.0}s on {} thread(s) (limit {}s)",
            targets,
            target_db,
            cfg.steps,
            elapsed.as_secs_f64(),
            rayon::current_num_threads(),
            OVERFIT_LIMIT.as_secs()
        ),
    }
}

const ABLATION_SCENES: u64 = 20;
const ABLATION_SEEDS: [u64; 3] = [0, 1, 2];
const ABLATION_STEPS: u64 = 1500;
const ABLATION_INPUTS: [usize; 2] = [0, 4];
const ABLATION_TARGETS: [usize; 4] = [1, 3, 5, 7];
/// Never supervised in any scene.
const ABLATION_HELD_OUT: [usize; 2] = [2, 6];

/// Mean PSNR over the held-out views of every training scene.
fn ablation_psnr(scenes: &[SceneInstance], bias: bool, seed: u64) -> f64 {
    let cfg = TrainConfig {
        model: ModelConfig {
            layers: 2,
            hidden: 32,
            heads: 4,
            grid: 4,
            triplane_dim: 8,
            image_dim: 32,
            field_hidden: 32,
            bias_enabled: bias,
            ..ModelConfig::default()
        },
        render: RaySampling {
            samples: 32,
            jitter: true,
            ..RaySampling::default()
        },
        steps: ABLATION_STEPS,
        warmup: 50,
        rays_per_view: 128,
        targets: ABLATION_TARGETS.len(),
        input_views: Some(ABLATION_INPUTS.to_vec()),
        target_views: Some(ABLATION_TARGETS.to_vec()),
        seed,
        ..TrainConfig::default()
    };
    let state = run::<f64>(scenes, &cfg, &NoPerceptual, RunOptions::default(), |_| {}).expect("ablation training");
    let grid = GridGeometry::<f64>::new(cfg.model.grid);
    let eval = RaySampling {
        samples: 32,
        ..RaySampling::default()
    };
    let mut total = 0.0;
    for scene in scenes {
        let rec = reconstruct(&state.model, &grid, scene, &ABLATION_INPUTS, cfg.pose_frame).expect("reconstruction");
        for v in ABLATION_HELD_OUT {
            total += psnr(&rec.render(v, &eval).expect("render"), &scene.views[v].image).expect("psnr");
        }
    }
    total / (scenes.len() * ABLATION_HELD_OUT.len()) as f64
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v[v.len() / 2]
}

fn criterion_7() -> Outcome {
    let spec = SynthSpec {
        views: 8,
        resolution: 32,
        ..SynthSpec::default()
    };
    let scenes: Vec<SceneInstance> = (1000..1000 + ABLATION_SCENES)
        .map(|s| generate_scene(&spec, s, Split::Train).expect("scene").instance)
        .collect();
    let t = Instant::now();
    let biased: Vec<f64> = ABLATION_SEEDS.iter().map(|&s| ablation_psnr(&scenes, true, s)).collect();
    let plain: Vec<f64> = ABLATION_SEEDS.iter().map(|&s| ablation_psnr(&scenes, false, s)).collect();
    let (mb, mp) = (median(biased.clone()), median(plain.clone()));
    Outcome {
        id: 7,
        title: "distance bias ablation direction",
        passed: mb >= mp,
        soft: true,
        detail: format!(
            "median held-out PSNR with bias {mb:.3} dB {biased:.3?}, without {mp:.3} dB {plain:.3?}; \
             {ABLATION_SCENES} scenes, views {ABLATION_HELD_OUT:?} never supervised, {} seeds, {ABLATION_STEPS} steps each, {:.0}s",
            ABLATION_SEEDS.len(),
            t.elapsed().as_secs_f64()
        ),
    }
}

fn ring(views: usize, elevation_deg: f64) -> Vec<Camera> {
    let k = Camera::intrinsics_from_fov(50.0, 16, 16);
    let e = elevation_deg.to_radians();
    (0..views)
        .map(|i| {
            let a = std::f64::consts::TAU * i as f64 / views as f64;
            let eye = 2.5 * Vec3::new(e.cos() * a.cos(), e.cos() * a.sin(), e.sin());
            Camera::look_at(eye, Vec3::zeros(), Vec3::z(), k, 16, 16).expect("camera")
        })
        .collect()
}

fn quaternion_angle(a: &Mat3, b: &Mat3) -> f64 {
    let qa = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(*a));
    let qb = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(*b));
    qa.angle_to(&qb).to_degrees()
}

fn criterion_8() -> Outcome {
    const VIEWS: usize = 24;
    let inputs = [0, VIEWS / 4];
    let mut notes = Vec::new();
    let mut passed = true;

    // level ring: the relative rotation is the azimuth step count × 15°
    let rots: Vec<Mat3> = ring(VIEWS, 0.0).iter().map(|c| *c.rotation()).collect();
    let expected: Vec<usize> = (0..VIEWS)
        .filter(|v| !inputs.contains(v))
        .filter(|&v| {
            inputs.iter().all(|&i| {
                let k = v.abs_diff(i);
                k.min(VIEWS - k) * 360 >= 90 * VIEWS
            })
        })
        .collect();
    let got = extrapolated_subset(&rots, &inputs);
    passed &= got == expected;
    notes.push(format!("level ring {got:?} vs enumerated {expected:?}"));

    // raised ring: enumerate with quaternion angles
    let rots: Vec<Mat3> = ring(VIEWS, 30.0).iter().map(|c| *c.rotation()).collect();
    let expected: Vec<usize> = (0..VIEWS)
        .filter(|v| !inputs.contains(v))
        .filter(|&v| inputs.iter().all(|&i| quaternion_angle(&rots[v], &rots[i]) >= 90.0))
        .collect();
    let got = extrapolated_subset(&rots, &inputs);
    passed &= got == expected;
    notes.push(format!("30° ring {got:?} vs enumerated {expected:?}"));
    Outcome {
        id: 8,
        title: "extrapolated view subset",
        passed,
        soft: false,
        detail: notes.join("; "),
    }
}

fn criterion_9() -> Outcome {
    let tmp = tempfile::tempdir().expect("tempdir");
    let mut notes = Vec::new();

    // checkpoint
    let cfg = ModelConfig {
        layers: 2,
        hidden: 16,
        heads: 2,
        grid: 2,
        triplane_dim: 4,
        image_dim: 8,
        field_hidden: 8,
        ..ModelConfig::default()
    };
    let model = Model::<f64>::new(cfg.clone(), 9).expect("model");
    let mut ckpt = Checkpoint::new();
    model.save_into(&mut ckpt);
    let path = tmp.path().join("model.ckpt");
    ckpt.save(&path).expect("save");
    let loaded = Model::<f64>::from_checkpoint(cfg, &Checkpoint::load(&path).expect("load")).expect("rebuild");
    let ckpt_ok = model.params.len() == loaded.params.len()
        && model.params.iter().zip(loaded.params.iter()).all(|((na, a), (nb, b))| {
            na == nb
                && a.tensor.shape() == b.tensor.shape()
                && a.tensor.data().iter().zip(b.tensor.data()).all(|(x, y)| x.to_bits() == y.to_bits())
        });
    notes.push(format!("checkpoint {} tensors bit-exact: {ckpt_ok}", model.params.len()));

    // SRN layout
    let spec = SynthSpec {
        views: 6,
        resolution: 16,
        ..SynthSpec::default()
    };
    let scenes: Vec<SceneInstance> = (0..3)
        .map(|s| generate_scene(&spec, s, Split::Test).expect("scene").instance)
        .collect();
    let root = tmp.path().join("srn");
    for s in &scenes {
        export_scene(&root, s).expect("export");
    }
    let back = load_srn(&root, Split::Test).expect("import");
    let srn_ok = back == scenes;
    notes.push(format!("SRN round trip of {} scenes exact: {srn_ok}", scenes.len()));

    // resume
    let data: Vec<SceneInstance> = (0..2)
        .map(|s| {
            generate_scene(
                &SynthSpec {
                    resolution: 16,
                    views: 6,
                    ..spec.clone()
                },
                s,
                Split::Train,
            )
            .expect("scene")
            .instance
        })
        .collect();
    let cfg = TrainConfig {
        model: ModelConfig {
            layers: 1,
            hidden: 12,
            heads: 2,
            grid: 2,
            triplane_dim: 4,
            image_dim: 8,
            ffn_ratio: 2,
            field_hidden: 8,
            ..ModelConfig::default()
        },
        render: RaySampling {
            samples: 8,
            jitter: true,
            ..RaySampling::default()
        },
        rays_per_view: 16,
        steps: 6,
        warmup: 1,
        ..TrainConfig::default()
    };
    let mut straight = Vec::new();
    let full = run::<f64>(&data, &cfg, &NoPerceptual, RunOptions::default(), |r| straight.push(r.clone())).expect("run");
    let dir = RunDir::new(tmp.path().join("run")).expect("run dir");
    let mut legs = Vec::new();
    let first = RunOptions {
        dir: Some(&dir),
        stop_at: Some(3),
        ..RunOptions::default()
    };
    run::<f64>(&data, &cfg, &NoPerceptual, first, |r| legs.push(r.clone())).expect("first leg");
    let state = load_state::<f64>(&cfg, dir.path.join("latest.ckpt")).expect("resume state");
    let second = RunOptions {
        resume: Some(state),
        dir: Some(&dir),
        stop_at: None,
    };
    let resumed = run::<f64>(&data, &cfg, &NoPerceptual, second, |r| legs.push(r.clone())).expect("second leg");
    let resume_ok = legs == straight
        && full.loss_ema.map(f64::to_bits) == resumed.loss_ema.map(f64::to_bits)
        && full
            .model
            .params
            .iter()
            .zip(resumed.model.params.iter())
            .all(|((_, a), (_, b))| a.tensor.data().iter().zip(b.tensor.data()).all(|(x, y)| x.to_bits() == y.to_bits()));
    notes.push(format!("resume after step 3 of {} bit-exact: {resume_ok}", cfg.steps));
    Outcome {
        id: 9,
        title: "format round trips",
        passed: ckpt_ok && srn_ok && resume_ok,
        soft: false,
        detail: notes.join("; "),
    }
}

const PSNR_TOL: f64 = 1e-4;
const SSIM_TOL: f64 = 1e-12;

fn criterion_10() -> Outcome {
    let base = Image::new(16, 16, (0..16 * 16 * 3).map(|i| ((i * 37) % 101) as f64 / 200.0).collect()).expect("image");
    let shifted = |d: f64| Image::new(16, 16, base.data().iter().map(|v| v + d).collect()).expect("image");
    let p1 = psnr(&base, &shifted(0.5)).expect("psnr");
    let p2 = psnr(&base, &shifted(0.1)).expect("psnr");
    let s = ssim(&base, &base).expect("ssim");
    let e1 = (p1 - 6.0206).abs();
    let e2 = (p2 - 20.0).abs();
    let e3 = (s - 1.0).abs();
    Outcome {
        id: 10,
        title: "metrics",
        passed: e1 <= PSNR_TOL && e2 <= PSNR_TOL && e3 <= SSIM_TOL,
        soft: false,
        detail: format!(
            "PSNR at MSE 0.25 {p1:.6} dB (err {e1:.1e}≤{PSNR_TOL:.0e}), at MSE 0.01 {p2:.6} dB (err {e2:.1e}), SSIM(a,a) err {e3:.1e}≤{SSIM_TOL:.0e}"
        ),
    }
}

#[test]
fn acceptance() {
    let criteria: [fn() -> Outcome; 10] = [
        criterion_1,
        criterion_2,
        criterion_3,
        criterion_4,
        criterion_5,
        criterion_6,
        criterion_7,
        criterion_8,
        criterion_9,
        criterion_10,
    ];
    // LINEFIELD_CRITERIA=6,9 runs a subset
    let only: Option<Vec<usize>> = std::env::var("LINEFIELD_CRITERIA")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let mut outcomes = Vec::new();
    writeln!(std::io::stdout().lock()).expect("stdout");
    for (i, c) in criteria.into_iter().enumerate() {
        if only.as_ref().is_some_and(|o| !o.contains(&(i + 1))) {
            continue;
        }
        let o = c();
        // straight to stdout so the report shows without --nocapture
        writeln!(std::io::stdout().lock(), "{}", o.line()).expect("stdout");
        outcomes.push(o);
    }
    let hard: Vec<u8> = outcomes.iter().filter(|o| !o.passed && !o.soft).map(|o| o.id).collect();
    assert!(hard.is_empty(), "criteria failed: {hard:?}");
}
