//! AdamW with decoupled weight decay and a warm-up + cosine schedule.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::Real;
use crate::tensor::checkpoint::Checkpoint;
use crate::tensor::{ParamStore, Tensor};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LrSchedule {
    Constant,
    /// Linear ramp from 0 over `warmup` steps, then cosine decay reaching 0
    /// at `total`.
    WarmupCosine {
        warmup: u64,
        total: u64,
    },
}

impl LrSchedule {
    pub fn factor(&self, step: u64) -> f64 {
        match *self {
            LrSchedule::Constant => 1.0,
            LrSchedule::WarmupCosine { warmup, total } => {
                if step < warmup {
                    step as f64 / warmup as f64
                } else if total <= warmup {
                    1.0
                } else {
                    let p = ((step - warmup) as f64 / (total - warmup) as f64).min(1.0);
                    0.5 * (1.0 + (std::f64::consts::PI * p).cos())
                }
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamWConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub schedule: LrSchedule,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self {
            lr: 4e-4,
            beta1: 0.9,
            beta2: 0.95,
            eps: 1e-8,
            weight_decay: 0.05,
            schedule: LrSchedule::Constant,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
struct Moments<T: Real> {
    first: Vec<T>,
    second: Vec<T>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState<T: Real = f64> {
    pub config: AdamWConfig,
    step: u64,
    moments: IndexMap<String, Moments<T>>,
}

impl<T: Real> OptimizerState<T> {
    pub fn new(config: AdamWConfig) -> Self {
        Self {
            config,
            step: 0,
            moments: IndexMap::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn current_lr(&self) -> f64 {
        self.config.lr * self.config.schedule.factor(self.step)
    }

    /// Applies one update from the gradients stored on `params`, then clears
    /// them. Returns the learning rate used.
    pub fn step(&mut self, params: &mut ParamStore<T>) -> Result<f64> {
        let lr = self.current_lr();
        let c = self.config;
        let t = (self.step + 1) as i32;
        let bc1 = 1.0 - c.beta1.powi(t);
        let bc2 = 1.0 - c.beta2.powi(t);
        let (b1, b2) = (T::of(c.beta1), T::of(c.beta2));
        let (ob1, ob2) = (T::of(1.0 - c.beta1), T::of(1.0 - c.beta2));
        let (ibc1, ibc2) = (T::of(1.0 / bc1), T::of(1.0 / bc2));
        let (lr_t, eps, wd) = (T::of(lr), T::of(c.eps), T::of(lr * c.weight_decay));

        for (name, param) in params.iter_mut() {
            let Some(grad) = param.tensor.grad().map(<[T]>::to_vec) else {
                continue;
            };
            let n = param.tensor.numel();
            let mom = self.moments.entry(name.to_string()).or_insert_with(|| Moments {
                first: vec![T::zero(); n],
                second: vec![T::zero(); n],
            });
            if mom.first.len() != n {
                return Err(Error::dim(format!(
                    "optimizer moments for {name} have {} elements, parameter has {n}",
                    mom.first.len()
                )));
            }
            let decay = param.decay;
            let data = param.tensor.data_mut();
            for i in 0..n {
                let g = grad[i];
                mom.first[i] = b1 * mom.first[i] + ob1 * g;
                mom.second[i] = b2 * mom.second[i] + ob2 * g * g;
                let update = (mom.first[i] * ibc1) / ((mom.second[i] * ibc2).sqrt() + eps);
                if decay {
                    data[i] -= wd * data[i];
                }
                data[i] -= lr_t * update;
            }
        }
        params.zero_grads();
        self.step += 1;
        Ok(lr)
    }

    /// Writes step counter and moments under `optim/…`.
    pub fn save_into(&self, ckpt: &mut Checkpoint) {
        ckpt.insert("optim/step", &Tensor::<f64>::scalar(self.step as f64));
        for (name, m) in &self.moments {
            let n = m.first.len();
            ckpt.insert(&format!("optim/m/{name}"), &Tensor::from_parts(vec![n], m.first.clone()));
            ckpt.insert(&format!("optim/v/{name}"), &Tensor::from_parts(vec![n], m.second.clone()));
        }
    }

    pub fn load_from(config: AdamWConfig, ckpt: &Checkpoint) -> Result<Self> {
        let step = ckpt.get::<f64>("optim/step")?.item()? as u64;
        let mut moments = IndexMap::new();
        for name in ckpt.names() {
            if let Some(param) = name.strip_prefix("optim/m/") {
                let first = ckpt.get::<T>(name)?.into_data();
                let second = ckpt.get::<T>(&format!("optim/v/{param}"))?.into_data();
                moments.insert(param.to_string(), Moments { first, second });
            }
        }
        Ok(Self { config, step, moments })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_store(p: f64) -> ParamStore<f64> {
        let mut s = ParamStore::new();
        s.insert("p", Tensor::scalar(p), true);
        s
    }

    fn constant(lr: f64, wd: f64) -> AdamWConfig {
        AdamWConfig {
            lr,
            weight_decay: wd,
            ..AdamWConfig::default()
        }
    }

    #[test]
    fn zero_gradient_without_decay_is_a_no_op() {
        let mut store = scalar_store(1.5);
        let mut opt = OptimizerState::new(constant(0.1, 0.0));
        for _ in 0..3 {
            store.get_mut("p").unwrap().set_grad(vec![0.0]).unwrap();
            opt.step(&mut store).unwrap();
        }
        assert_eq!(store.get("p").unwrap().data(), &[1.5]);
    }

    #[test]
    fn positive_gradient_descends() {
        let mut store = scalar_store(1.0);
        let mut opt = OptimizerState::new(constant(0.1, 0.0));
        store.get_mut("p").unwrap().set_grad(vec![1.0]).unwrap();
        opt.step(&mut store).unwrap();
        assert!(store.get("p").unwrap().data()[0] < 1.0);
    }

    #[test]
    fn converges_on_convex_quadratic() {
        let mut store = scalar_store(0.0);
        let mut opt = OptimizerState::new(constant(0.05, 0.0));
        for _ in 0..100 {
            let p = store.get("p").unwrap().data()[0];
            store.get_mut("p").unwrap().set_grad(vec![2.0 * (p - 3.0)]).unwrap();
            opt.step(&mut store).unwrap();
        }
        let p = store.get("p").unwrap().data()[0];
        assert!((p - 3.0).abs() < 0.1, "p = {p}");
    }

    #[test]
    fn decay_is_decoupled_from_gradient() {
        let mut store = scalar_store(2.0);
        let mut opt = OptimizerState::new(constant(0.1, 0.5));
        store.get_mut("p").unwrap().set_grad(vec![0.0]).unwrap();
        opt.step(&mut store).unwrap();
        // moments stay zero, so only the decay term moves p
        assert!((store.get("p").unwrap().data()[0] - 2.0 * (1.0 - 0.05)).abs() < 1e-15);
    }

    #[test]
    fn schedule_shape() {
        let s = LrSchedule::WarmupCosine { warmup: 10, total: 110 };
        assert_eq!(s.factor(0), 0.0);
        assert!((s.factor(5) - 0.5).abs() < 1e-15);
        assert!((s.factor(10) - 1.0).abs() <= 1e-12);
        assert!((s.factor(60) - 0.5).abs() < 1e-12);
        assert!(s.factor(110).abs() < 1e-15);
        assert!(s.factor(500).abs() < 1e-15);
        for k in 10..110 {
            assert!(s.factor(k + 1) <= s.factor(k));
        }
    }
}
