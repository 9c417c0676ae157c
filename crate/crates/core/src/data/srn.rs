//! SRN on-disk layout.
//!
//! ```text
//! <root>/<split>/<instance>/intrinsics.txt
//! <root>/<split>/<instance>/pose/000000.txt   16 reals, row-major camera-to-world
//! <root>/<split>/<instance>/rgb/000000.png
//! ```
//!
//! `intrinsics.txt` is read as `f cx cy 0` on the first line and `H W` on the
//! last, with the barycenter and optional scale lines in between ignored.
//! Intrinsics are rescaled when the stored images are not `H × W`.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::SVD;

use super::scene::{SceneInstance, Split, View};
use crate::error::{Error, Result};
use crate::geometry::{Camera, Mat3, Vec3};
use crate::image::Image;

/// Rotations further than this from orthonormal are rejected instead of
/// projected back onto SO(3).
const ROTATION_REPAIR_LIMIT: f64 = 1e-3;

fn ingest(path: &Path, message: impl Into<String>) -> Error {
    Error::ingest(path, message)
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| ingest(path, format!("cannot read: {e}")))
}

fn parse_reals(path: &Path, line: &str) -> Result<Vec<f64>> {
    line.split_whitespace()
        .map(|w| w.parse::<f64>().map_err(|_| ingest(path, format!("not a number: {w:?}"))))
        .collect()
}

pub struct Intrinsics {
    pub focal: f64,
    pub cx: f64,
    pub cy: f64,
    pub height: usize,
    pub width: usize,
}

pub fn parse_intrinsics(path: &Path, text: &str) -> Result<Intrinsics> {
    let lines: Vec<&str> = text.lines().filter(|l| !l.trim().is_empty()).collect();
    if lines.len() < 2 {
        return Err(ingest(path, format!("expected at least 2 non-empty lines, found {}", lines.len())));
    }
    let head = parse_reals(path, lines[0])?;
    if head.len() < 3 {
        return Err(ingest(path, "first line must hold focal, cx, cy"));
    }
    let size = parse_reals(path, lines[lines.len() - 1])?;
    let valid = size.len() == 2 && size.iter().all(|&v| v >= 1.0 && v.fract() == 0.0);
    if !valid {
        return Err(ingest(path, "last line must hold integer height and width"));
    }
    if !(head[0] > 0.0 && head[0].is_finite()) {
        return Err(ingest(path, "focal length must be positive"));
    }
    Ok(Intrinsics {
        focal: head[0],
        cx: head[1],
        cy: head[2],
        height: size[0] as usize,
        width: size[1] as usize,
    })
}

pub fn format_intrinsics(k: &Mat3, width: usize, height: usize) -> String {
    format!("{} {} {} 0.\n0. 0. 0.\n1.\n{} {}\n", k[(0, 0)], k[(0, 2)], k[(1, 2)], height, width)
}

fn parse_pose(path: &Path) -> Result<(Mat3, Vec3)> {
    let vals = parse_reals(path, &read_text(path)?)?;
    if vals.len() != 16 {
        return Err(ingest(path, format!("expected 16 numbers, found {}", vals.len())));
    }
    let r = Mat3::from_fn(|i, j| vals[4 * i + j]);
    let t = Vec3::new(vals[3], vals[7], vals[11]);
    if vals[12..] != [0.0, 0.0, 0.0, 1.0] {
        return Err(ingest(path, "last row must be 0 0 0 1"));
    }
    let err = (r.transpose() * r - Mat3::identity()).abs().max();
    if !(err <= ROTATION_REPAIR_LIMIT) || r.determinant() <= 0.0 {
        return Err(ingest(path, format!("not a rotation (orthonormality error {err:.3e})")));
    }
    if err > 1e-9 {
        // text poses are often rounded; snap to the nearest rotation
        let svd = SVD::new(r, true, true);
        let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
        return Ok((u * vt, t));
    }
    Ok((r, t))
}

pub fn format_pose(camera: &Camera) -> String {
    let (r, t) = (camera.rotation(), camera.center());
    let mut s = String::new();
    for i in 0..3 {
        s.push_str(&format!("{} {} {} {}\n", r[(i, 0)], r[(i, 1)], r[(i, 2)], t[i]));
    }
    s.push_str("0 0 0 1\n");
    s
}

fn sorted_files(dir: &Path, ext: &str) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| ingest(dir, format!("cannot list: {e}")))?;
    let mut out = Vec::new();
    for entry in entries {
        let p = entry.map_err(|e| ingest(dir, e.to_string()))?.path();
        if p.extension().is_some_and(|e| e.eq_ignore_ascii_case(ext)) {
            out.push(p);
        }
    }
    out.sort();
    Ok(out)
}

/// Loads one instance folder.
pub fn load_instance(dir: &Path, split: Split) -> Result<SceneInstance> {
    let ipath = dir.join("intrinsics.txt");
    let intr = parse_intrinsics(&ipath, &read_text(&ipath)?)?;
    let poses = sorted_files(&dir.join("pose"), "txt")?;
    let images = sorted_files(&dir.join("rgb"), "png")?;
    if poses.len() != images.len() {
        return Err(ingest(dir, format!("{} pose files but {} images", poses.len(), images.len())));
    }
    let mut views = Vec::with_capacity(poses.len());
    for (pp, ip) in poses.iter().zip(&images) {
        if pp.file_stem() != ip.file_stem() {
            return Err(ingest(ip, format!("does not pair with {}", pp.display())));
        }
        let image = Image::load_png(ip)?;
        let (w, h) = (image.width(), image.height());
        let (sx, sy) = (w as f64 / intr.width as f64, h as f64 / intr.height as f64);
        let k = Mat3::new(
            intr.focal * sx,
            0.0,
            intr.cx * sx,
            0.0,
            intr.focal * sy,
            intr.cy * sy,
            0.0,
            0.0,
            1.0,
        );
        let (r, t) = parse_pose(pp)?;
        let camera = Camera::new(k, r, t, w, h).map_err(|e| ingest(pp, e.to_string()))?;
        views.push(View { image, camera });
    }
    let id = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let scene = SceneInstance { id, split, views };
    scene.validate().map_err(|e| ingest(dir, e.to_string()))?;
    Ok(scene)
}

/// Loads every instance under `root/<split>`, sorted by folder name. A
/// missing split folder yields no scenes.
pub fn load_srn(root: impl AsRef<Path>, split: Split) -> Result<Vec<SceneInstance>> {
    let root = root.as_ref();
    if !root.is_dir() {
        return Err(ingest(root, "dataset root is not a directory"));
    }
    let dir = root.join(split.as_str());
    if !dir.is_dir() {
        return Ok(Vec::new());
    }
    let mut dirs = Vec::new();
    for entry in fs::read_dir(&dir).map_err(|e| ingest(&dir, format!("cannot list: {e}")))? {
        let p = entry.map_err(|e| ingest(&dir, e.to_string()))?.path();
        if p.is_dir() {
            dirs.push(p);
        }
    }
    dirs.sort();
    dirs.iter().map(|d| load_instance(d, split)).collect()
}

/// Writes `scene` under `root/<split>/<id>`. Images are stored as 8-bit PNG,
/// so only quantized images round-trip exactly.
pub fn export_scene(root: impl AsRef<Path>, scene: &SceneInstance) -> Result<PathBuf> {
    scene.validate()?;
    let dir = root.as_ref().join(scene.split.as_str()).join(&scene.id);
    for sub in ["pose", "rgb"] {
        let p = dir.join(sub);
        fs::create_dir_all(&p).map_err(Error::io(&p))?;
    }
    if let Some(first) = scene.views.first() {
        let c = &first.camera;
        let p = dir.join("intrinsics.txt");
        fs::write(&p, format_intrinsics(c.intrinsics(), c.width(), c.height())).map_err(Error::io(&p))?;
    }
    for (i, v) in scene.views.iter().enumerate() {
        let p = dir.join("pose").join(format!("{i:06}.txt"));
        fs::write(&p, format_pose(&v.camera)).map_err(Error::io(&p))?;
        v.image.save_png(dir.join("rgb").join(format!("{i:06}.png")))?;
    }
    Ok(dir)
}
