use super::config::PoseFrame;
use super::step::canonical_cameras;
use crate::data::{extrapolated_subset, psnr, ssim, SceneInstance};
use crate::error::{Error, Result};
use crate::geometry::{Camera, Mat3};
use crate::image::Image;
use crate::model::{GridGeometry, Model, ViewInput};
use crate::real::Real;
use crate::render::{render_image, FieldVars, RaySampling, TriplaneField};
use crate::tensor::Tape;

/// Rays per tape when rendering full frames.
pub const RENDER_CHUNK: usize = 1024;

/// Field predicted from a scene's input views, with every camera of the
/// scene in the frame the field lives in.
pub struct Reconstruction<T: Real = f64> {
    pub field: TriplaneField<T>,
    pub cameras: Vec<Camera>,
}

pub fn reconstruct<T: Real>(
    model: &Model<T>,
    grid: &GridGeometry<T>,
    scene: &SceneInstance,
    inputs: &[usize],
    frame: PoseFrame,
) -> Result<Reconstruction<T>> {
    let Some(&first) = inputs.first() else {
        return Err(Error::Config("at least one input view is needed".into()));
    };
    if let Some(v) = inputs.iter().find(|&&v| v >= scene.views.len()) {
        return Err(Error::Data(format!("input view {v} is out of range for {}", scene.id)));
    }
    let cameras = canonical_cameras(&scene.cameras(), first, frame)?;
    let tape = Tape::<T>::new();
    let b = model.params.bind(&tape);
    let views: Vec<ViewInput<'_>> = inputs
        .iter()
        .map(|&i| ViewInput {
            image: &scene.views[i].image,
            camera: &cameras[i],
        })
        .collect();
    let enc = model.encode(&tape, &b, grid, &views)?;
    let vars = FieldVars::from_bindings(enc.planes, &b)?;
    Ok(Reconstruction {
        field: TriplaneField::from_tape(&tape, &vars),
        cameras,
    })
}

impl<T: Real> Reconstruction<T> {
    pub fn render(&self, view: usize, sampling: &RaySampling) -> Result<Image> {
        let cam = self
            .cameras
            .get(view)
            .ok_or_else(|| Error::Data(format!("view {view} is out of range")))?;
        render_image(&self.field, cam, sampling, RENDER_CHUNK)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ViewScore {
    pub view: usize,
    pub psnr: f64,
    pub ssim: f64,
    pub extrapolated: bool,
}

/// Scores every non-input view of `scene` rendered by `render`.
pub fn score_views(scene: &SceneInstance, inputs: &[usize], mut render: impl FnMut(usize) -> Result<Image>) -> Result<Vec<ViewScore>> {
    let rotations: Vec<Mat3> = scene.views.iter().map(|v| *v.camera.rotation()).collect();
    let extra = extrapolated_subset(&rotations, inputs);
    (0..scene.views.len())
        .filter(|v| !inputs.contains(v))
        .map(|v| {
            let img = render(v)?;
            let truth = &scene.views[v].image;
            Ok(ViewScore {
                view: v,
                psnr: psnr(&img, truth)?,
                ssim: ssim(&img, truth)?,
                extrapolated: extra.contains(&v),
            })
        })
        .collect()
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Summary {
    pub views: usize,
    pub psnr: f64,
    pub ssim: f64,
}

/// Mean PSNR and SSIM; infinite PSNRs make the mean infinite.
pub fn summarize<'a>(scores: impl IntoIterator<Item = &'a ViewScore>) -> Summary {
    let mut s = Summary::default();
    for v in scores {
        s.views += 1;
        s.psnr += v.psnr;
        s.ssim += v.ssim;
    }
    if s.views > 0 {
        s.psnr /= s.views as f64;
        s.ssim /= s.views as f64;
    } else {
        s.psnr = f64::NAN;
        s.ssim = f64::NAN;
    }
    s
}
