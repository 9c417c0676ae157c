use rand::seq::index;
use rand::seq::SliceRandom;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{PoseFrame, TrainConfig};
use super::loss::{reconstruction_loss, Perceptual};
use crate::data::SceneInstance;
use crate::error::{Error, Result};
use crate::geometry::{relative_poses, rotation_aligned_poses, Camera, Vec3};
use crate::model::{GridGeometry, Model, ViewInput};
use crate::real::Real;
use crate::render::{render_rays, FieldVars};
use crate::tensor::checkpoint::Checkpoint;
use crate::tensor::{OptimizerState, Tape, Tensor};

const EMA_DECAY: f64 = 0.98;

/// Model, optimizer and step counter. Randomness is derived from
/// `(seed, step)`, so no generator state needs saving.
pub struct TrainState<T: Real = f64> {
    pub step: u64,
    pub model: Model<T>,
    pub optim: OptimizerState<T>,
    /// Exponential moving average of the loss; `None` before the first step.
    pub loss_ema: Option<f64>,
}

impl<T: Real> TrainState<T> {
    pub fn new(config: &TrainConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            step: 0,
            model: Model::new(config.model.clone(), config.seed)?,
            optim: OptimizerState::new(config.optimizer()),
            loss_ema: None,
        })
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ckpt = Checkpoint::new();
        self.model.save_into(&mut ckpt);
        self.optim.save_into(&mut ckpt);
        ckpt.insert("train/step", &Tensor::<f64>::scalar(self.step as f64));
        ckpt.insert("train/loss_ema", &Tensor::<f64>::scalar(self.loss_ema.unwrap_or(f64::NAN)));
        ckpt
    }

    pub fn from_checkpoint(config: &TrainConfig, ckpt: &Checkpoint) -> Result<Self> {
        config.validate()?;
        let ema = ckpt.get::<f64>("train/loss_ema")?.item()?;
        Ok(Self {
            step: ckpt.get::<f64>("train/step")?.item()? as u64,
            model: Model::from_checkpoint(config.model.clone(), ckpt)?,
            optim: OptimizerState::load_from(config.optimizer(), ckpt)?,
            loss_ema: (!ema.is_nan()).then_some(ema),
        })
    }

    fn record_loss(&mut self, loss: f64) {
        self.loss_ema = Some(match self.loss_ema {
            Some(e) => EMA_DECAY * e + (1.0 - EMA_DECAY) * loss,
            None => loss,
        });
    }
}

/// Generator for optimizer step `step`.
pub fn step_rng(seed: u64, step: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(step);
    rng
}

/// Scene used for the `index`-th scene draw: scenes are visited in a fresh
/// permutation every epoch.
pub fn scene_order(seed: u64, index: u64, count: usize) -> usize {
    let epoch = index / count as u64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5EED_5CE7E);
    rng.set_stream(epoch);
    let mut perm: Vec<usize> = (0..count).collect();
    perm.shuffle(&mut rng);
    perm[(index % count as u64) as usize]
}

/// Input and target view indices for one step.
pub fn choose_views(count: usize, config: &TrainConfig, rng: &mut dyn RngCore) -> Result<(Vec<usize>, Vec<usize>)> {
    let (n, k) = (config.inputs, config.targets);
    if count < n + k {
        return Err(Error::Data(format!("scene has {count} views, a step needs {}", n + k)));
    }
    for v in config.input_views.iter().chain(&config.target_views).flatten() {
        if *v >= count {
            return Err(Error::Data(format!("view {v} requested but the scene has {count}")));
        }
    }
    let pick = |exclude: &[usize], m: usize, rng: &mut dyn RngCore| -> Vec<usize> {
        let pool: Vec<usize> = (0..count).filter(|v| !exclude.contains(v)).collect();
        index::sample(rng, pool.len(), m).into_iter().map(|i| pool[i]).collect()
    };
    let (inputs, targets) = match (&config.input_views, &config.target_views) {
        (Some(i), Some(t)) => (i.clone(), t.clone()),
        (Some(i), None) => {
            let t = pick(i, k, rng);
            (i.clone(), t)
        }
        (None, Some(t)) => (pick(t, n, rng), t.clone()),
        (None, None) => {
            let all = pick(&[], n + k, rng);
            (all[..n].to_vec(), all[n..].to_vec())
        }
    };
    let mut seen = inputs.clone();
    seen.extend(&targets);
    seen.sort_unstable();
    seen.dedup();
    if seen.len() != n + k {
        return Err(Error::Config("input and target views must be distinct".into()));
    }
    Ok((inputs, targets))
}

/// Cameras expressed in the frame anchored at `cameras[reference]`.
pub fn canonical_cameras(cameras: &[Camera], reference: usize, frame: PoseFrame) -> Result<Vec<Camera>> {
    let mut order = vec![reference];
    order.extend((0..cameras.len()).filter(|&i| i != reference));
    let ordered: Vec<Camera> = order.iter().map(|&i| cameras[i].clone()).collect();
    let moved = match frame {
        PoseFrame::RotationAligned => rotation_aligned_poses(&ordered)?,
        PoseFrame::Relative => relative_poses(&ordered)?,
    };
    let mut out = cameras.to_vec();
    for (slot, cam) in order.into_iter().zip(moved) {
        out[slot] = cam;
    }
    Ok(out)
}

/// Forward and backward for one scene; gradients are added to the
/// parameters, scaled by `weight`. Returns the unscaled loss.
#[allow(clippy::too_many_arguments)]
pub fn accumulate_scene<T: Real>(
    model: &mut Model<T>,
    grid: &GridGeometry<T>,
    scene: &SceneInstance,
    config: &TrainConfig,
    perceptual: &dyn Perceptual<T>,
    weight: f64,
    rng: &mut dyn RngCore,
) -> Result<f64> {
    if config.alpha > 0.0 && perceptual.is_zero() {
        return Err(Error::Config("alpha > 0 needs a perceptual term".into()));
    }
    let (inputs, targets) = choose_views(scene.views.len(), config, rng)?;
    let cams = canonical_cameras(&scene.cameras(), inputs[0], config.pose_frame)?;

    let tape = Tape::<T>::new();
    let b = model.params.bind(&tape);
    let views: Vec<ViewInput<'_>> = inputs
        .iter()
        .map(|&i| ViewInput {
            image: &scene.views[i].image,
            camera: &cams[i],
        })
        .collect();
    let enc = model.encode(&tape, &b, grid, &views)?;
    let field = FieldVars::from_bindings(enc.planes, &b)?;

    let supervised: Vec<usize> = inputs.iter().chain(&targets).copied().collect();
    let mut rays: Vec<(Vec3, Vec3)> = Vec::new();
    let mut truth = Vec::new();
    let mut counts = Vec::new();
    for &v in &supervised {
        let img = &scene.views[v].image;
        let (w, h) = (img.width(), img.height());
        let m = config.rays_per_view.min(w * h);
        let mut picks = index::sample(rng, w * h, m).into_vec();
        picks.sort_unstable();
        let mut t = Vec::with_capacity(m * 3);
        for p in picks {
            let (x, y) = (p % w, p / w);
            rays.push((cams[v].center(), cams[v].ray_direction(x as f64 + 0.5, y as f64 + 0.5)));
            t.extend(img.pixel(x, y).map(T::of));
        }
        truth.push(tape.constant(Tensor::new(vec![m, 3], t)?));
        counts.push(m);
    }
    let colors = render_rays(&tape, &field, &rays, &config.render, Some(rng))?;
    let mut rendered = Vec::with_capacity(counts.len());
    let mut start = 0;
    for m in counts {
        rendered.push(tape.slice_rows(colors, start, start + m)?);
        start += m;
    }
    let loss = reconstruction_loss(&tape, &rendered, &truth, config.alpha, perceptual)?;
    let value = tape.value(loss).item()?.as_f64();
    let scaled = tape.scale(loss, T::of(weight));
    let mut grads = tape.backward(scaled)?;
    model.params.accumulate(&b, &mut grads)?;
    Ok(value)
}

/// One optimizer step over `config.accumulate` scenes drawn from `dataset`.
/// Returns `(mean loss, learning rate)`.
fn at_step(e: Error, step: u64) -> Error {
    match e {
        Error::Numeric(m) => Error::Numeric(format!("{m} at step {step}")),
        other => other,
    }
}

pub fn train_step<T: Real>(
    state: &mut TrainState<T>,
    dataset: &[SceneInstance],
    grid: &GridGeometry<T>,
    config: &TrainConfig,
    perceptual: &dyn Perceptual<T>,
) -> Result<(f64, f64)> {
    if dataset.is_empty() {
        return Err(Error::Data("training needs at least one scene".into()));
    }
    let mut rng = step_rng(config.seed, state.step);
    let acc = config.accumulate;
    let mut total = 0.0;
    for micro in 0..acc {
        let draw = state.step * acc as u64 + micro as u64;
        let scene = &dataset[scene_order(config.seed, draw, dataset.len())];
        total += accumulate_scene(&mut state.model, grid, scene, config, perceptual, 1.0 / acc as f64, &mut rng)
            .map_err(|e| at_step(e, state.step + 1))?;
    }
    let loss = total / acc as f64;
    if !loss.is_finite() {
        return Err(Error::Numeric(format!("loss {loss} at step {}", state.step + 1)));
    }
    let lr = state.optim.step(&mut state.model.params).map_err(|e| at_step(e, state.step + 1))?;
    state.step += 1;
    state.record_loss(loss);
    Ok((loss, lr))
}
