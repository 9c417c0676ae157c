//! Triplane features to color and density, and ray rendering.

use rand::RngCore;

use super::sampling::{ray_box_clip, stratified, RaySampling};
use crate::error::{Error, Result};
use crate::geometry::{Camera, Vec3};
use crate::image::Image;
use crate::real::Real;
use crate::tensor::{Bindings, Tape, Tensor, Var};

/// Feature planes and point-decoder weights as plain tensors.
#[derive(Clone, Debug, PartialEq)]
pub struct TriplaneField<T: Real = f64> {
    /// `T_xy`, `T_yz`, `T_zx`, each `[M, M, d_T]`.
    pub planes: [Tensor<T>; 3],
    pub fc1_weight: Tensor<T>,
    pub fc1_bias: Tensor<T>,
    pub fc2_weight: Tensor<T>,
    pub fc2_bias: Tensor<T>,
}

/// The same field recorded on a tape.
#[derive(Clone, Copy, Debug)]
pub struct FieldVars {
    pub planes: [Var; 3],
    pub fc1: (Var, Var),
    pub fc2: (Var, Var),
}

impl FieldVars {
    /// Planes produced on the tape plus decoder weights from `b`.
    pub fn from_bindings(planes: [Var; 3], b: &Bindings) -> Result<Self> {
        Ok(Self {
            planes,
            fc1: (b.get("field/fc1/weight")?, b.get("field/fc1/bias")?),
            fc2: (b.get("field/fc2/weight")?, b.get("field/fc2/bias")?),
        })
    }
}

impl<T: Real> TriplaneField<T> {
    /// Reads the current values of an on-tape field.
    pub fn from_tape(tape: &Tape<T>, f: &FieldVars) -> Self {
        let v = |x: Var| (*tape.value(x)).clone().with_requires_grad(false);
        Self {
            planes: f.planes.map(v),
            fc1_weight: v(f.fc1.0),
            fc1_bias: v(f.fc1.1),
            fc2_weight: v(f.fc2.0),
            fc2_bias: v(f.fc2.1),
        }
    }

    /// Records the field as constants.
    pub fn bind(&self, tape: &Tape<T>) -> FieldVars {
        let c = |t: &Tensor<T>| tape.constant(t.clone());
        FieldVars {
            planes: [c(&self.planes[0]), c(&self.planes[1]), c(&self.planes[2])],
            fc1: (c(&self.fc1_weight), c(&self.fc1_bias)),
            fc2: (c(&self.fc2_weight), c(&self.fc2_bias)),
        }
    }
}

/// MLP on `[P, d_T]` features: sigmoid RGB `[P, 3]` and softplus density
/// `[P, 1]`.
pub fn decode_points<T: Real>(tape: &Tape<T>, f: &FieldVars, features: Var) -> Result<(Var, Var)> {
    let h = tape.linear(features, f.fc1.0, Some(f.fc1.1))?;
    let h = tape.gelu(h);
    let out = tape.linear(h, f.fc2.0, Some(f.fc2.1))?;
    if tape.shape(out).last() != Some(&4) {
        return Err(Error::dim("point decoder must produce 4 outputs"));
    }
    let rgb = tape.slice_cols(out, 0, 3)?;
    let rgb = tape.sigmoid(rgb);
    let sigma = tape.slice_cols(out, 3, 4)?;
    let sigma = tape.softplus(sigma);
    Ok((rgb, sigma))
}

/// Renders rays `(origin, unit direction)` to `[rays, 3]`. Rays that miss
/// the scene box get the background color.
pub fn render_rays<T: Real>(
    tape: &Tape<T>,
    f: &FieldVars,
    rays: &[(Vec3, Vec3)],
    sampling: &RaySampling,
    mut rng: Option<&mut dyn RngCore>,
) -> Result<Var> {
    if rays.is_empty() {
        return Err(Error::dim("no rays to render"));
    }
    let r = sampling.samples;
    let bg = sampling.background.map(T::of);
    let mut hits = Vec::new();
    let mut points = Vec::new();
    let mut deltas = Vec::new();
    for (i, &(o, d)) in rays.iter().enumerate() {
        let Some((near, far)) = ray_box_clip(o, d) else { continue };
        let (ts, ds) = match rng.as_deref_mut() {
            Some(g) if sampling.jitter => stratified(near, far, r, Some(g)),
            _ => stratified::<dyn RngCore>(near, far, r, None),
        };
        hits.push(i);
        for t in ts {
            let p = o + d * t;
            points.push([p.x.clamp(-1.0, 1.0), p.y.clamp(-1.0, 1.0), p.z.clamp(-1.0, 1.0)]);
        }
        deltas.extend(ds.into_iter().map(T::of));
    }
    if hits.is_empty() {
        let data = bg.iter().copied().cycle().take(rays.len() * 3).collect();
        return Ok(tape.constant(Tensor::new(vec![rays.len(), 3], data)?));
    }
    let feats = tape.point_features(f.planes, &points)?;
    let (rgb, sigma) = decode_points(tape, f, feats)?;
    let colors = tape.composite(rgb, sigma, r, &deltas, bg)?;
    if hits.len() == rays.len() {
        return Ok(colors);
    }
    tape.scatter_rows(colors, &hits, rays.len(), &bg)
}

/// Full-frame render at pixel centers, `chunk` rays per tape.
pub fn render_image<T: Real>(field: &TriplaneField<T>, camera: &Camera, sampling: &RaySampling, chunk: usize) -> Result<Image> {
    let (w, h) = (camera.width(), camera.height());
    let rays: Vec<(Vec3, Vec3)> = (0..h)
        .flat_map(|y| (0..w).map(move |x| (x, y)))
        .map(|(x, y)| (camera.center(), camera.ray_direction(x as f64 + 0.5, y as f64 + 0.5)))
        .collect();
    let sampling = RaySampling {
        jitter: false,
        ..sampling.clone()
    };
    let mut data = Vec::with_capacity(w * h * 3);
    for part in rays.chunks(chunk.max(1)) {
        let tape = Tape::new();
        let vars = field.bind(&tape);
        let out = render_rays(&tape, &vars, part, &sampling, None)?;
        data.extend(tape.value(out).data().iter().map(|v| v.as_f64()));
    }
    Image::new(w, h, data)
}
