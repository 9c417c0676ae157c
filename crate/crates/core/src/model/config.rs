use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sizes and switches of the image-to-triplane network.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    /// Transformer blocks.
    pub layers: usize,
    /// Token width of the grid-line queries (`d_D`).
    pub hidden: usize,
    pub heads: usize,
    /// Cells per side of the internal token grid (`N`); planes have `2N`.
    pub grid: usize,
    /// Feature width of the triplane (`d_T`).
    pub triplane_dim: usize,
    /// Side of the square image patches (`P`).
    pub patch: usize,
    /// Width of image tokens before the line coordinates are appended.
    pub image_dim: usize,
    /// Feed-forward expansion factor.
    pub ffn_ratio: usize,
    /// Hidden width of the point decoder MLP.
    pub field_hidden: usize,
    /// Subtract `γ·D` from attention logits.
    pub bias_enabled: bool,
    /// Append each patch ray's `(d, m)` to its image token.
    pub plucker_encoding: bool,
    /// Train `γ`; otherwise it stays at 1.
    pub gamma_learnable: bool,
    /// Derive query tokens from grid-line coordinates; otherwise free tokens.
    pub grid_line_input: bool,
    /// Keep the patch embedder at its random initialization.
    pub freeze_embedder: bool,
    /// Initial pre-activation bias of the density output.
    pub density_bias_init: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            layers: 8,
            hidden: 64,
            heads: 8,
            grid: 8,
            triplane_dim: 16,
            patch: 8,
            image_dim: 64,
            ffn_ratio: 4,
            field_hidden: 64,
            bias_enabled: true,
            plucker_encoding: true,
            gamma_learnable: true,
            grid_line_input: true,
            freeze_embedder: false,
            density_bias_init: 0.0,
        }
    }
}

impl ModelConfig {
    /// Full-size network: 8 blocks of width 512, 14-pixel patches and
    /// 64×64 feature planes.
    pub fn full_size() -> Self {
        Self {
            layers: 8,
            hidden: 512,
            grid: 32,
            patch: 14,
            ..Self::default()
        }
    }

    /// Side of the feature planes (`M = 2N`).
    pub fn plane_size(&self) -> usize {
        2 * self.grid
    }

    pub fn query_count(&self) -> usize {
        3 * self.grid * self.grid
    }

    pub fn head_dim(&self) -> usize {
        self.hidden / self.heads
    }

    /// Width of image tokens as seen by cross-attention.
    pub fn key_dim(&self) -> usize {
        self.image_dim + if self.plucker_encoding { 6 } else { 0 }
    }

    pub fn validate(&self) -> Result<()> {
        let sizes = [
            ("layers", self.layers),
            ("hidden", self.hidden),
            ("heads", self.heads),
            ("grid", self.grid),
            ("triplane_dim", self.triplane_dim),
            ("patch", self.patch),
            ("image_dim", self.image_dim),
            ("ffn_ratio", self.ffn_ratio),
            ("field_hidden", self.field_hidden),
        ];
        if let Some((name, _)) = sizes.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("model.{name} must be positive")));
        }
        if !self.hidden.is_multiple_of(self.heads) {
            return Err(Error::Config(format!(
                "model.hidden {} is not divisible by model.heads {}",
                self.hidden, self.heads
            )));
        }
        if self.grid_line_input && self.hidden < 6 {
            return Err(Error::Config("model.hidden must be at least 6 to hold line coordinates".into()));
        }
        if !self.density_bias_init.is_finite() {
            return Err(Error::Config("model.density_bias_init must be finite".into()));
        }
        Ok(())
    }

    /// Patches per image side for a square `size`×`size` image.
    pub fn patch_grid(&self, width: usize, height: usize) -> Result<usize> {
        if width != height || !width.is_multiple_of(self.patch) {
            return Err(Error::Geometry(format!(
                "{width}x{height} image does not tile into {p}x{p} patches on a square grid",
                p = self.patch
            )));
        }
        Ok(width / self.patch)
    }
}
