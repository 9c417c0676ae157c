use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use serde_json::json;

use linefield_core::data::{default_input_views, export_scene, generate_scene, load_srn, psnr, ssim, SceneInstance, Split};
use linefield_core::geometry::{Camera, Vec3};
use linefield_core::image::Image;
use linefield_core::model::{GridGeometry, Model, ModelConfig};
use linefield_core::render::render_image;
use linefield_core::tensor::checkpoint::Checkpoint;
use linefield_core::train::eval::RENDER_CHUNK;
use linefield_core::train::run::{CONFIG_FILE, LATEST};
use linefield_core::train::{
    canonical_cameras, load_state, reconstruct, run, score_views, summarize, NoPerceptual, RunDir, RunOptions, TrainConfig, ViewScore,
};
use linefield_core::verify::{selfcheck as run_selfcheck, SelfcheckSizes};
use linefield_core::Error;

use crate::config::RunConfig;
use crate::{CliError, ConfigArgs};

pub fn gen_data(cfg: &RunConfig) -> Result<(), CliError> {
    cfg.synth.validate()?;
    let root = &cfg.paths.dataset;
    let mut seed = cfg.gen.seed;
    for (split, count) in [
        (Split::Train, cfg.gen.train),
        (Split::Val, cfg.gen.val),
        (Split::Test, cfg.gen.test),
    ] {
        let dir = root.join(split.as_str());
        fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        for _ in 0..count {
            let scene = generate_scene(&cfg.synth, seed, split)?;
            export_scene(root, &scene.instance)?;
            seed += 1;
        }
        println!("{}: {count} scene(s) in {}", split.as_str(), dir.display());
    }
    cfg.echo(root)?;
    Ok(())
}

pub fn train(cfg: &RunConfig, resume: bool, log_every: u64) -> Result<(), CliError> {
    let data = load_srn(&cfg.paths.dataset, Split::Train)?;
    if data.is_empty() {
        return Err(Error::Data(format!("no training scenes under {}", cfg.paths.dataset.display())).into());
    }
    cfg.echo(&cfg.paths.output)?;
    let dir = RunDir::new(&cfg.paths.checkpoints)?;
    let state = if resume {
        Some(load_state::<f64>(&cfg.train, dir.path.join(LATEST))?)
    } else {
        None
    };
    let opts = RunOptions {
        resume: state,
        dir: Some(&dir),
        stop_at: None,
    };
    let every = log_every.max(1);
    let last = cfg.train.steps;
    let state = run::<f64>(&data, &cfg.train, &NoPerceptual, opts, |r| {
        if r.step % every == 0 || r.step == last {
            eprintln!("step {:>6}  lr {:.3e}  loss {:.6}", r.step, r.lr, r.loss);
        }
    })?;
    println!(
        "trained {} step(s) on {} scene(s); checkpoints in {}",
        state.step,
        data.len(),
        dir.path.display()
    );
    Ok(())
}

#[derive(Args, Debug)]
pub struct RenderArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// Defaults to `latest.ckpt` in the checkpoint directory.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long, default_value = "test")]
    split: String,
    /// Scene id within the split.
    #[arg(long)]
    scene: String,
    /// Views to render, comma separated.
    #[arg(long, value_delimiter = ',', conflicts_with = "orbit", required_unless_present = "orbit")]
    views: Vec<usize>,
    /// Render this many cameras evenly spaced on a ring instead.
    #[arg(long)]
    orbit: Option<usize>,
    /// Conditioning views, comma separated; overrides `eval.inputs`.
    #[arg(long, value_delimiter = ',')]
    inputs: Option<Vec<usize>>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[command(flatten)]
    config: ConfigArgs,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long, default_value = "test")]
    split: String,
    #[arg(long, value_delimiter = ',')]
    inputs: Option<Vec<usize>>,
    /// Score the ground truth against itself instead of rendering (checks
    /// the metric plumbing; no checkpoint is read).
    #[arg(long)]
    ground_truth: bool,
}

fn checkpoint_path(cfg: &RunConfig, arg: &Option<PathBuf>) -> PathBuf {
    arg.clone().unwrap_or_else(|| cfg.paths.checkpoints.join(LATEST))
}

/// Model config from the training echo next to the checkpoint when there is
/// one, otherwise from the run config.
fn load_model(cfg: &RunConfig, path: &Path) -> Result<Model<f64>, CliError> {
    let echo = path.parent().map(|p| p.join(CONFIG_FILE));
    let model_cfg: ModelConfig = match echo.filter(|p| p.is_file()) {
        Some(p) => {
            let text = fs::read_to_string(&p).map_err(|e| CliError::io(&p, e))?;
            let t: TrainConfig = serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
            t.model
        }
        None => cfg.model.clone(),
    };
    Ok(Model::from_checkpoint(model_cfg, &Checkpoint::load(path)?)?)
}

fn inputs_for(cfg: &RunConfig, arg: &Option<Vec<usize>>, scene: &SceneInstance) -> Result<Vec<usize>, CliError> {
    let inputs = arg
        .clone()
        .or_else(|| cfg.eval.inputs.clone())
        .unwrap_or_else(|| default_input_views(scene.views.len()));
    if inputs.is_empty() {
        return Err(CliError::Config("at least one input view is needed".into()));
    }
    if let Some(v) = inputs.iter().find(|&&v| v >= scene.views.len()) {
        return Err(Error::Data(format!("{} has {} views; input view {v} requested", scene.id, scene.views.len())).into());
    }
    Ok(inputs)
}

fn parse_split(s: &str) -> Result<Split, CliError> {
    Split::parse(s).map_err(|e| CliError::Argument(e.to_string()))
}

/// Cameras on a ring around the vertical axis through the origin, at the
/// radius and elevation of `like`.
fn orbit_cameras(like: &Camera, count: usize) -> Result<Vec<Camera>, CliError> {
    let c = like.center();
    let radius = c.norm();
    let elevation = (c.z / radius).clamp(-0.99, 0.99).asin();
    let start = c.y.atan2(c.x);
    (0..count)
        .map(|i| {
            let a = start + std::f64::consts::TAU * i as f64 / count as f64;
            let eye = radius * Vec3::new(elevation.cos() * a.cos(), elevation.cos() * a.sin(), elevation.sin());
            Camera::look_at(eye, Vec3::zeros(), Vec3::z(), *like.intrinsics(), like.width(), like.height()).map_err(CliError::from)
        })
        .collect()
}

fn write_png_with_sidecar(dir: &Path, stem: &str, img: &Image, meta: serde_json::Value) -> Result<(), CliError> {
    let png = dir.join(format!("{stem}.png"));
    img.save_png(&png)?;
    let side = dir.join(format!("{stem}.json"));
    fs::write(&side, meta.to_string() + "\n").map_err(|e| CliError::io(&side, e))?;
    Ok(())
}

/// `null` stands in for an infinite PSNR in JSON.
fn finite_or_null(x: f64) -> serde_json::Value {
    if x.is_finite() {
        json!(x)
    } else {
        serde_json::Value::Null
    }
}

pub fn render(args: &RenderArgs) -> Result<(), CliError> {
    let cfg = args.config.load()?;
    let split = parse_split(&args.split)?;
    let scenes = load_srn(&cfg.paths.dataset, split)?;
    let scene = scenes
        .iter()
        .find(|s| s.id == args.scene)
        .ok_or_else(|| Error::Data(format!("no scene {:?} in the {} split", args.scene, split.as_str())))?;
    if let Some(v) = args.views.iter().find(|&&v| v >= scene.views.len()) {
        return Err(CliError::Argument(format!(
            "view {v} does not exist; {} has {} views",
            scene.id,
            scene.views.len()
        )));
    }
    if args.orbit == Some(0) {
        return Err(CliError::Argument("--orbit needs at least one camera".into()));
    }
    let inputs = inputs_for(&cfg, &args.inputs, scene)?;
    let model = load_model(&cfg, &checkpoint_path(&cfg, &args.checkpoint))?;
    let grid = GridGeometry::<f64>::new(model.config.grid);
    let rec = reconstruct(&model, &grid, scene, &inputs, cfg.train.pose_frame)?;
    let sampling = &cfg.eval.sampling;
    sampling.validate()?;
    let out = cfg.paths.output.join("render").join(&scene.id);
    fs::create_dir_all(&out).map_err(|e| CliError::io(&out, e))?;
    if let Some(n) = args.orbit {
        let reference = &scene.views[inputs[0]].camera;
        let mut cams = vec![reference.clone()];
        cams.extend(orbit_cameras(reference, n)?);
        let canonical = canonical_cameras(&cams, 0, cfg.train.pose_frame)?;
        for (i, cam) in canonical[1..].iter().enumerate() {
            let img = render_image(&rec.field, cam, sampling, RENDER_CHUNK)?;
            let meta = json!({ "scene": scene.id, "orbit": i, "of": n });
            write_png_with_sidecar(&out, &format!("orbit_{i:03}"), &img, meta)?;
        }
        println!("{n} orbit view(s) in {}", out.display());
    } else {
        for &v in &args.views {
            let img = rec.render(v, sampling)?;
            let truth = &scene.views[v].image;
            let meta = json!({
                "scene": scene.id,
                "view": v,
                "psnr": finite_or_null(psnr(&img, truth)?),
                "ssim": ssim(&img, truth)?,
            });
            write_png_with_sidecar(&out, &format!("view_{v:03}"), &img, meta)?;
        }
        println!("{} view(s) in {}", args.views.len(), out.display());
    }
    cfg.echo(&cfg.paths.output)?;
    Ok(())
}

pub fn eval(args: &EvalArgs) -> Result<(), CliError> {
    let cfg = args.config.load()?;
    let split = parse_split(&args.split)?;
    let scenes = load_srn(&cfg.paths.dataset, split)?;
    if scenes.is_empty() {
        return Err(Error::Data(format!(
            "no scenes in the {} split under {}",
            split.as_str(),
            cfg.paths.dataset.display()
        ))
        .into());
    }
    let model = if args.ground_truth {
        None
    } else {
        Some(load_model(&cfg, &checkpoint_path(&cfg, &args.checkpoint))?)
    };
    cfg.eval.sampling.validate()?;
    let mut rows: Vec<(String, ViewScore)> = Vec::new();
    for scene in &scenes {
        let inputs = inputs_for(&cfg, &args.inputs, scene)?;
        let scores = match &model {
            None => score_views(scene, &inputs, |v| Ok(scene.views[v].image.clone()))?,
            Some(m) => {
                let grid = GridGeometry::<f64>::new(m.config.grid);
                let rec = reconstruct(m, &grid, scene, &inputs, cfg.train.pose_frame)?;
                score_views(scene, &inputs, |v| rec.render(v, &cfg.eval.sampling))?
            }
        };
        rows.extend(scores.into_iter().map(|s| (scene.id.clone(), s)));
    }
    let out = &cfg.paths.output;
    fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let mut csv = String::from("scene_id,view_id,psnr,ssim,is_extrapolated\n");
    for (id, s) in &rows {
        writeln!(csv, "{id},{},{},{},{}", s.view, s.psnr, s.ssim, s.extrapolated).expect("string write");
    }
    let per_view = out.join(format!("eval_{}.csv", split.as_str()));
    fs::write(&per_view, csv).map_err(|e| CliError::io(&per_view, e))?;

    let all = summarize(rows.iter().map(|(_, s)| s));
    let extra = summarize(rows.iter().map(|(_, s)| s).filter(|s| s.extrapolated));
    let mut summary = String::from("subset,views,psnr,ssim\n");
    for (name, s) in [("all", all), ("extrapolated", extra)] {
        writeln!(summary, "{name},{},{},{}", s.views, s.psnr, s.ssim).expect("string write");
        println!("{name:>12}: {:>4} views  PSNR {:.3}  SSIM {:.4}", s.views, s.psnr, s.ssim);
    }
    let sum_path = out.join(format!("eval_{}_summary.csv", split.as_str()));
    fs::write(&sum_path, summary).map_err(|e| CliError::io(&sum_path, e))?;
    cfg.echo(out)?;
    Ok(())
}

pub fn selfcheck(quick: bool, seed: u64) -> Result<(), CliError> {
    let sizes = if quick {
        SelfcheckSizes {
            line_pairs: 1_000,
            rays: 200,
            attention_trials: 20,
            composite_rays: 200,
        }
    } else {
        SelfcheckSizes::default()
    };
    let report = run_selfcheck(sizes, seed);
    println!("{report}");
    let failed = report.checks.iter().filter(|c| !c.passed).count();
    if failed > 0 {
        return Err(CliError::Selfcheck(failed));
    }
    Ok(())
}
