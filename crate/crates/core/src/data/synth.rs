//! Procedural scenes of flat-colored boxes and spheres, rendered by exact
//! ray casting.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::scene::{SceneInstance, Split, View};
use crate::error::{Error, Result};
use crate::geometry::{Camera, Vec3};
use crate::image::Image;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrimitiveKind {
    Box,
    Sphere,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CameraLayout {
    /// Evenly spaced azimuths at a fixed elevation.
    Ring { elevation_deg: f64 },
    /// Independent uniform directions on the sphere.
    Sphere,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub min_primitives: usize,
    pub max_primitives: usize,
    pub kinds: Vec<PrimitiveKind>,
    pub palette: Vec<[u8; 3]>,
    /// Primitives lie inside `[-bounds, bounds]³`.
    pub bounds: f64,
    pub min_size: f64,
    pub max_size: f64,
    pub camera_radius: f64,
    pub fov_deg: f64,
    pub layout: CameraLayout,
    pub views: usize,
    pub resolution: usize,
    pub background: [f64; 3],
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            min_primitives: 1,
            max_primitives: 3,
            kinds: vec![PrimitiveKind::Box, PrimitiveKind::Sphere],
            palette: vec![
                [220, 50, 47],
                [38, 139, 210],
                [133, 153, 0],
                [181, 137, 0],
                [108, 113, 196],
                [42, 161, 152],
                [211, 54, 130],
                [88, 110, 117],
            ],
            bounds: 0.7,
            min_size: 0.15,
            max_size: 0.4,
            camera_radius: 2.5,
            fov_deg: 50.0,
            layout: CameraLayout::Ring { elevation_deg: 30.0 },
            views: 24,
            resolution: 64,
            background: [1.0; 3],
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Config(format!("synth: {m}")));
        if self.min_primitives > self.max_primitives {
            return fail("min_primitives exceeds max_primitives");
        }
        if self.max_primitives > 0 && (self.kinds.is_empty() || self.palette.is_empty()) {
            return fail("primitives need at least one kind and one palette color");
        }
        if !(self.bounds > 0.0 && self.bounds <= 1.0) {
            return fail("bounds must lie in (0, 1]");
        }
        if !(self.min_size > 0.0 && self.min_size <= self.max_size && self.max_size < self.bounds) {
            return fail("sizes must satisfy 0 < min_size <= max_size < bounds");
        }
        if !(self.camera_radius > 3f64.sqrt()) {
            return fail("camera_radius must place cameras outside the [-1, 1]³ box");
        }
        if !(self.fov_deg > 0.0 && self.fov_deg < 180.0) {
            return fail("fov_deg must lie in (0, 180)");
        }
        if self.views == 0 || self.resolution == 0 {
            return fail("views and resolution must be positive");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Primitive {
    Box { center: Vec3, half: Vec3, color: [u8; 3] },
    Sphere { center: Vec3, radius: f64, color: [u8; 3] },
}

impl Primitive {
    pub fn color(&self) -> [f64; 3] {
        let c = match self {
            Primitive::Box { color, .. } | Primitive::Sphere { color, .. } => color,
        };
        c.map(|v| f64::from(v) / 255.0)
    }

    /// Nearest intersection distance with `t > 0`.
    pub fn hit(&self, o: Vec3, d: Vec3) -> Option<f64> {
        match *self {
            Primitive::Box { center, half, .. } => {
                let (mut near, mut far) = (f64::NEG_INFINITY, f64::INFINITY);
                for k in 0..3 {
                    let (lo, hi) = (center[k] - half[k], center[k] + half[k]);
                    if d[k] == 0.0 {
                        if o[k] < lo || o[k] > hi {
                            return None;
                        }
                        continue;
                    }
                    let (t1, t2) = ((lo - o[k]) / d[k], (hi - o[k]) / d[k]);
                    near = near.max(t1.min(t2));
                    far = far.min(t1.max(t2));
                }
                if near > far || far <= 0.0 {
                    None
                } else if near > 0.0 {
                    Some(near)
                } else {
                    Some(far)
                }
            }
            Primitive::Sphere { center, radius, .. } => {
                let oc = o - center;
                let b = oc.dot(&d);
                let c = oc.norm_squared() - radius * radius;
                let disc = b * b - c * d.norm_squared();
                if disc < 0.0 {
                    return None;
                }
                let s = disc.sqrt();
                let dd = d.norm_squared();
                let t1 = (-b - s) / dd;
                let t2 = (-b + s) / dd;
                [t1, t2].into_iter().find(|&t| t > 0.0)
            }
        }
    }
}

/// Color seen along a ray: the nearest primitive's flat color, else the
/// background.
pub fn cast(primitives: &[Primitive], o: Vec3, d: Vec3, background: [f64; 3]) -> [f64; 3] {
    primitives
        .iter()
        .filter_map(|p| p.hit(o, d).map(|t| (t, p)))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .map_or(background, |(_, p)| p.color())
}

/// Analytic render at pixel centers.
pub fn render_analytic(primitives: &[Primitive], camera: &Camera, background: [f64; 3]) -> Image {
    let (w, h) = (camera.width(), camera.height());
    let mut img = Image::filled(w, h, background);
    for y in 0..h {
        for x in 0..w {
            let d = camera.ray_direction(x as f64 + 0.5, y as f64 + 0.5);
            img.set_pixel(x, y, cast(primitives, camera.center(), d, background));
        }
    }
    img
}

/// Cameras looking at the origin.
pub fn cameras(spec: &SynthSpec, rng: &mut impl Rng) -> Result<Vec<Camera>> {
    let k = Camera::intrinsics_from_fov(spec.fov_deg, spec.resolution, spec.resolution);
    (0..spec.views)
        .map(|i| {
            let dir = match spec.layout {
                CameraLayout::Ring { elevation_deg } => {
                    let e = elevation_deg.to_radians();
                    let a = 2.0 * std::f64::consts::PI * i as f64 / spec.views as f64;
                    Vec3::new(e.cos() * a.cos(), e.cos() * a.sin(), e.sin())
                }
                CameraLayout::Sphere => loop {
                    let v = Vec3::new(
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                        rng.random_range(-1.0..1.0),
                    );
                    let n = v.norm();
                    if n > 1e-3 && n <= 1.0 {
                        break v / n;
                    }
                },
            };
            let up = if dir.z.abs() > 0.99 { Vec3::y() } else { Vec3::z() };
            Camera::look_at(dir * spec.camera_radius, Vec3::zeros(), up, k, spec.resolution, spec.resolution)
        })
        .collect()
}

pub fn primitives(spec: &SynthSpec, rng: &mut impl Rng) -> Vec<Primitive> {
    let count = rng.random_range(spec.min_primitives..=spec.max_primitives);
    let mut colors = spec.palette.clone();
    colors.shuffle(rng);
    (0..count)
        .map(|i| {
            let color = colors[i % colors.len()];
            let kind = spec.kinds[rng.random_range(0..spec.kinds.len())];
            let mut size = || rng.random_range(spec.min_size..=spec.max_size);
            match kind {
                PrimitiveKind::Box => {
                    let half = Vec3::new(size(), size(), size());
                    let center = Vec3::from_fn(|k, _| rng.random_range(-spec.bounds + half[k]..=spec.bounds - half[k]));
                    Primitive::Box { center, half, color }
                }
                PrimitiveKind::Sphere => {
                    let radius = size();
                    let lim = spec.bounds - radius;
                    let center = Vec3::from_fn(|_, _| rng.random_range(-lim..=lim));
                    Primitive::Sphere { center, radius, color }
                }
            }
        })
        .collect()
}

/// A generated scene with its primitives.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthScene {
    pub primitives: Vec<Primitive>,
    pub instance: SceneInstance,
}

pub fn generate_scene(spec: &SynthSpec, seed: u64, split: Split) -> Result<SynthScene> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let prims = primitives(spec, &mut rng);
    let cams = cameras(spec, &mut rng)?;
    let views = cams
        .into_iter()
        .map(|camera| View {
            image: render_analytic(&prims, &camera, spec.background),
            camera,
        })
        .collect();
    Ok(SynthScene {
        primitives: prims,
        instance: SceneInstance {
            id: format!("scene_{seed:08}"),
            split,
            views,
        },
    })
}
