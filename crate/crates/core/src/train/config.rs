use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelConfig;
use crate::render::RaySampling;
use crate::tensor::{AdamWConfig, LrSchedule};

/// Frame the scene is expressed in before encoding.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoseFrame {
    /// First input camera rotated to identity, centers kept about the
    /// scene origin.
    #[default]
    RotationAligned,
    /// First input camera at identity and at the origin.
    Relative,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub render: RaySampling,
    /// Input views per step (`n`).
    pub inputs: usize,
    /// Extra supervision views per step (`k`).
    pub targets: usize,
    /// Perceptual-term weight.
    pub alpha: f64,
    pub steps: u64,
    pub warmup: u64,
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub rays_per_view: usize,
    /// Scenes per optimizer step.
    pub accumulate: usize,
    pub seed: u64,
    /// Checkpoint interval in steps; 0 keeps only the final checkpoint.
    pub checkpoint_every: u64,
    /// Fixed input views instead of random ones.
    pub input_views: Option<Vec<usize>>,
    /// Fixed target views instead of random ones.
    pub target_views: Option<Vec<usize>>,
    pub pose_frame: PoseFrame,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            model: ModelConfig::default(),
            render: RaySampling {
                jitter: true,
                ..RaySampling::default()
            },
            inputs: 2,
            targets: 2,
            alpha: 0.0,
            steps: 2000,
            warmup: 100,
            lr: 3e-4,
            weight_decay: 0.05,
            beta1: 0.9,
            beta2: 0.95,
            rays_per_view: 256,
            accumulate: 1,
            seed: 0,
            checkpoint_every: 0,
            input_views: None,
            target_views: None,
            pose_frame: PoseFrame::RotationAligned,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.render.validate()?;
        let fail = |m: &str| Err(Error::Config(format!("train: {m}")));
        if self.inputs == 0 {
            return fail("inputs must be at least 1");
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return fail("alpha must be finite and non-negative");
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) || !(self.weight_decay >= 0.0) {
            return fail("lr and weight_decay must be non-negative");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return fail("betas must lie in [0, 1)");
        }
        if self.rays_per_view == 0 || self.accumulate == 0 {
            return fail("rays_per_view and accumulate must be positive");
        }
        if let Some(v) = &self.input_views {
            if v.len() != self.inputs {
                return fail("input_views must list exactly `inputs` views");
            }
        }
        if let Some(v) = &self.target_views {
            if v.len() != self.targets {
                return fail("target_views must list exactly `targets` views");
            }
        }
        Ok(())
    }

    pub fn optimizer(&self) -> AdamWConfig {
        AdamWConfig {
            lr: self.lr,
            beta1: self.beta1,
            beta2: self.beta2,
            eps: 1e-8,
            weight_decay: self.weight_decay,
            schedule: LrSchedule::WarmupCosine {
                warmup: self.warmup,
                total: self.steps,
            },
        }
    }
}
