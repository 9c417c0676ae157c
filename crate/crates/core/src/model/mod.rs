//! Images and cameras to triplane features.
//!
//! Parameter names:
//! `embed/proj/{weight,bias}`, `embed/cls`, `query/proj/{weight,bias}` or
//! `query/tokens`, `layer{i}/{self,cross}/{norm/{gain,bias},q,k,v,out}/…`,
//! `layer{i}/{self,cross}/gamma_raw`, `layer{i}/ffn/{norm/…,fc1,fc2}/…`,
//! `upsample/kernel`, `field/{fc1,fc2}/{weight,bias}`.

pub mod attention;
pub mod config;
pub mod decoder;
pub mod embed;
pub mod triplane;

use std::rc::Rc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use attention::{attention_weights, biased_attention, DistancePenalty};
pub use config::ModelConfig;
pub use decoder::{decoder_forward, Biases};
pub use embed::{image_tokens, patch_embed, patchify, query_tokens, TokenSet};
pub use triplane::tokens_to_triplane;

use crate::error::{Error, Result};
use crate::geometry::{distance_matrix, grid_lines, Camera, DistanceBias, PluckerLine};
use crate::image::Image;
use crate::real::Real;
use crate::tensor::checkpoint::Checkpoint;
use crate::tensor::ops::softplus;
use crate::tensor::{Bindings, ParamStore, Tape, Tensor};

/// `γ_raw` giving `softplus(γ_raw) = 1`.
pub fn unit_gamma_raw() -> f64 {
    (std::f64::consts::E - 1.0).ln()
}

/// Grid lines and their pairwise distances for one grid size.
#[derive(Clone, Debug)]
pub struct GridGeometry<T: Real = f64> {
    pub lines: Vec<PluckerLine>,
    pub distances: DistanceBias,
    tensor: Rc<Tensor<T>>,
}

impl<T: Real> GridGeometry<T> {
    pub fn new(n: usize) -> Self {
        let lines = grid_lines(n);
        let keys: Vec<_> = lines.iter().copied().map(Some).collect();
        let distances = distance_matrix(&lines, &keys);
        let tensor = Rc::new(distances.to_tensor());
        Self { lines, distances, tensor }
    }

    pub fn tensor(&self) -> &Rc<Tensor<T>> {
        &self.tensor
    }
}

/// One posed input image.
#[derive(Clone, Copy, Debug)]
pub struct ViewInput<'a> {
    pub image: &'a Image,
    pub camera: &'a Camera,
}

/// Feature planes of one encoded scene, on the tape.
#[derive(Clone, Debug)]
pub struct Encoded {
    pub planes: [crate::tensor::Var; 3],
    pub image: TokenSet,
    pub queries: TokenSet,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model<T: Real = f64> {
    pub config: ModelConfig,
    pub params: ParamStore<T>,
}

impl<T: Real> Model<T> {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut s = ParamStore::new();
        let c = &config;
        let dense = |s: &mut ParamStore<T>, name: &str, fan_in: usize, fan_out: usize, gain: f64, rng: &mut ChaCha8Rng| {
            let std = gain / (fan_in as f64).sqrt();
            s.insert(format!("{name}/weight"), Tensor::randn([fan_in, fan_out], std, rng), true);
            s.insert(format!("{name}/bias"), Tensor::zeros([fan_out]), false);
        };
        let norm = |s: &mut ParamStore<T>, prefix: &str, d: usize| {
            s.insert(format!("{prefix}/norm/gain"), Tensor::full([d], T::one()), false);
            s.insert(format!("{prefix}/norm/bias"), Tensor::zeros([d]), false);
        };
        let residual_gain = 1.0 / (2.0 * c.layers as f64).sqrt();

        dense(&mut s, "embed/proj", 3 * c.patch * c.patch, c.image_dim, 1.0, &mut rng);
        s.insert("embed/cls", Tensor::randn([c.image_dim], 0.02, &mut rng), false);
        if c.grid_line_input {
            let eye = Tensor::from_fn([6, c.hidden], |i| if i / c.hidden == i % c.hidden { T::one() } else { T::zero() });
            s.insert("query/proj/weight", eye, true);
            s.insert("query/proj/bias", Tensor::zeros([c.hidden]), false);
        } else {
            s.insert("query/tokens", Tensor::randn([c.query_count(), c.hidden], 1.0, &mut rng), false);
        }
        let h = c.hidden;
        for l in 0..c.layers {
            for (kind, key_dim) in [("self", h), ("cross", c.key_dim())] {
                let p = format!("layer{l}/{kind}");
                norm(&mut s, &p, h);
                dense(&mut s, &format!("{p}/q"), h, h, 1.0, &mut rng);
                dense(&mut s, &format!("{p}/k"), key_dim, h, 1.0, &mut rng);
                dense(&mut s, &format!("{p}/v"), key_dim, h, 1.0, &mut rng);
                dense(&mut s, &format!("{p}/out"), h, h, residual_gain, &mut rng);
                s.insert(format!("{p}/gamma_raw"), Tensor::scalar(T::of(unit_gamma_raw())), false);
            }
            let p = format!("layer{l}/ffn");
            norm(&mut s, &p, h);
            dense(&mut s, &format!("{p}/fc1"), h, c.ffn_ratio * h, 1.0, &mut rng);
            dense(&mut s, &format!("{p}/fc2"), c.ffn_ratio * h, h, residual_gain, &mut rng);
        }
        s.insert(
            "upsample/kernel",
            Tensor::randn([h, c.triplane_dim, 2, 2], 1.0 / (h as f64).sqrt(), &mut rng),
            true,
        );
        dense(&mut s, "field/fc1", c.triplane_dim, c.field_hidden, 1.0, &mut rng);
        dense(&mut s, "field/fc2", c.field_hidden, 4, 1.0, &mut rng);
        s.get_mut("field/fc2/bias")?.data_mut()[3] = T::of(c.density_bias_init);

        let mut model = Self { config, params: s };
        model.apply_trainable_flags()?;
        Ok(model)
    }

    fn apply_trainable_flags(&mut self) -> Result<()> {
        let names: Vec<String> = self.params.names().map(str::to_string).collect();
        for name in names {
            let frozen = (self.config.freeze_embedder && name.starts_with("embed/"))
                || (!self.config.gamma_learnable && name.ends_with("/gamma_raw"));
            self.params.set_trainable(&name, !frozen)?;
        }
        Ok(())
    }

    /// Rebuilds a model from stored parameters; names and shapes must match
    /// the configuration exactly.
    pub fn from_checkpoint(config: ModelConfig, ckpt: &Checkpoint) -> Result<Self> {
        let mut model = Self::new(config, 0)?;
        let names: Vec<String> = model.params.names().map(str::to_string).collect();
        for name in names {
            let stored: Tensor<T> = ckpt.get(&name)?;
            let slot = model.params.get_mut(&name)?;
            if stored.shape() != slot.shape() {
                return Err(Error::Format(format!(
                    "{name}: stored shape {:?}, model expects {:?}",
                    stored.shape(),
                    slot.shape()
                )));
            }
            slot.data_mut().copy_from_slice(stored.data());
        }
        Ok(model)
    }

    pub fn save_into(&self, ckpt: &mut Checkpoint) {
        for (name, p) in self.params.iter() {
            ckpt.insert(name, &p.tensor);
        }
    }

    /// `(γ_self, γ_cross)` per block.
    pub fn gammas(&self) -> Vec<(f64, f64)> {
        (0..self.config.layers)
            .map(|l| {
                let g = |kind: &str| {
                    self.params
                        .get(&format!("layer{l}/{kind}/gamma_raw"))
                        .map(|t| softplus(t.data()[0].as_f64()))
                        .unwrap_or(0.0)
                };
                (g("self"), g("cross"))
            })
            .collect()
    }

    /// Image tokens of all views, grid-line queries, the transformer and the
    /// upsampling, recorded on `tape`.
    pub fn encode(&self, tape: &Tape<T>, b: &Bindings, grid: &GridGeometry<T>, views: &[ViewInput<'_>]) -> Result<Encoded> {
        let cfg = &self.config;
        if views.is_empty() {
            return Err(Error::contract("encoding needs at least one view"));
        }
        let mut token_vars = Vec::with_capacity(views.len());
        let mut lines = Vec::new();
        for v in views {
            let e = cfg.patch_grid(v.image.width(), v.image.height())?;
            if (v.camera.width(), v.camera.height()) != (v.image.width(), v.image.height()) {
                return Err(Error::contract("camera and image sizes differ"));
            }
            let set = image_tokens(tape, b, v.image, &v.camera.patch_rays(e)?, cfg)?;
            token_vars.push(set.tokens);
            lines.extend(set.lines);
        }
        let image = TokenSet {
            tokens: tape.concat_rows(&token_vars)?,
            lines,
        };
        let queries = query_tokens(tape, b, &grid.lines, cfg)?;
        let biases = Biases {
            grid_grid: Rc::clone(grid.tensor()),
            grid_image: Rc::new(distance_matrix(&grid.lines, &image.lines).to_tensor()),
        };
        let out = decoder_forward(tape, b, cfg, queries.tokens, image.tokens, &biases)?;
        let planes = tokens_to_triplane(tape, out, b.get("upsample/kernel")?, cfg)?;
        Ok(Encoded { planes, image, queries })
    }
}
