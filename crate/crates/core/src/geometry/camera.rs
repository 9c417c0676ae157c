//! Pinhole cameras in the x-right, y-down, z-forward convention.

use nalgebra::Matrix3;

use super::plucker::{PluckerLine, Vec3};
use crate::error::{Error, Result};

pub type Mat3 = Matrix3<f64>;

const ORTHO_TOL: f64 = 1e-9;

/// `r` maps camera coordinates to world coordinates; `t` is the camera
/// center in the world.
#[derive(Clone, Debug, PartialEq)]
pub struct Camera {
    k: Mat3,
    k_inv: Mat3,
    r: Mat3,
    t: Vec3,
    width: usize,
    height: usize,
}

impl Camera {
    pub fn new(k: Mat3, r: Mat3, t: Vec3, width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Geometry(format!("image size {width}x{height}")));
        }
        let lower = [k[(1, 0)], k[(2, 0)], k[(2, 1)]];
        if lower.iter().any(|&v| v != 0.0) || !(k[(0, 0)] > 0.0) || !(k[(1, 1)] > 0.0) {
            return Err(Error::Intrinsics);
        }
        let k_inv = k.try_inverse().ok_or(Error::Intrinsics)?;
        if !k_inv.iter().all(|v| v.is_finite()) {
            return Err(Error::Intrinsics);
        }
        check_rotation(&r)?;
        if !t.iter().all(|v| v.is_finite()) {
            return Err(Error::Geometry("non-finite camera center".into()));
        }
        Ok(Self {
            k,
            k_inv,
            r,
            t,
            width,
            height,
        })
    }

    /// Square-pixel intrinsics with horizontal field of view `fov_deg` and
    /// the principal point at the image center.
    pub fn intrinsics_from_fov(fov_deg: f64, width: usize, height: usize) -> Mat3 {
        let f = 0.5 * width as f64 / (0.5 * fov_deg.to_radians()).tan();
        Mat3::new(f, 0.0, 0.5 * width as f64, 0.0, f, 0.5 * height as f64, 0.0, 0.0, 1.0)
    }

    /// Camera at `eye` looking at `target`, image "up" aligned with `up`.
    pub fn look_at(eye: Vec3, target: Vec3, up: Vec3, k: Mat3, width: usize, height: usize) -> Result<Self> {
        let forward = (target - eye)
            .try_normalize(1e-12)
            .ok_or_else(|| Error::Geometry("eye coincides with target".into()))?;
        let right = forward
            .cross(&up)
            .try_normalize(1e-12)
            .ok_or_else(|| Error::Geometry("up vector parallel to viewing direction".into()))?;
        let down = forward.cross(&right);
        let r = Mat3::from_columns(&[right, down, forward]);
        Self::new(k, r, eye, width, height)
    }

    pub fn intrinsics(&self) -> &Mat3 {
        &self.k
    }

    pub fn rotation(&self) -> &Mat3 {
        &self.r
    }

    pub fn center(&self) -> Vec3 {
        self.t
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Same intrinsics and image size with a new pose.
    pub fn with_pose(&self, r: Mat3, t: Vec3) -> Result<Self> {
        Self::new(self.k, r, t, self.width, self.height)
    }

    /// Ray through pixel coordinate `(u, v)`: origin at the camera center,
    /// direction `R K⁻¹ (u, v, 1)` normalized.
    pub fn pixel_ray(&self, u: f64, v: f64) -> Result<(Vec3, Vec3)> {
        if !(0.0..=self.width as f64).contains(&u) || !(0.0..=self.height as f64).contains(&v) {
            return Err(Error::Geometry(format!(
                "pixel ({u}, {v}) outside {}x{} image",
                self.width, self.height
            )));
        }
        Ok((self.t, self.ray_direction(u, v)))
    }

    /// Unchecked variant of [`Camera::pixel_ray`] direction for hot loops.
    pub fn ray_direction(&self, u: f64, v: f64) -> Vec3 {
        let cam = self.k_inv * Vec3::new(u, v, 1.0);
        (self.r * cam).normalize()
    }

    pub fn pixel_line(&self, u: f64, v: f64) -> Result<PluckerLine> {
        let (o, d) = self.pixel_ray(u, v)?;
        PluckerLine::from_ray(o, d)
    }

    /// One line per cell of an `e`×`e` patch grid, through the patch center
    /// `((col + 0.5) pw, (row + 0.5) ph)`, in row-major order.
    pub fn patch_rays(&self, e: usize) -> Result<Vec<PluckerLine>> {
        if e == 0 || !self.width.is_multiple_of(e) || !self.height.is_multiple_of(e) {
            return Err(Error::Geometry(format!(
                "{}x{} image does not split into a {e}x{e} patch grid",
                self.width, self.height
            )));
        }
        let pw = (self.width / e) as f64;
        let ph = (self.height / e) as f64;
        let mut lines = Vec::with_capacity(e * e);
        for row in 0..e {
            for col in 0..e {
                lines.push(self.pixel_line((col as f64 + 0.5) * pw, (row as f64 + 0.5) * ph)?);
            }
        }
        Ok(lines)
    }

    /// Pixel coordinates of a world point, or `None` behind the camera.
    pub fn project(&self, p: Vec3) -> Option<(f64, f64)> {
        let cam = self.r.transpose() * (p - self.t);
        if cam.z <= 0.0 {
            return None;
        }
        let h = self.k * cam;
        Some((h.x / h.z, h.y / h.z))
    }
}

pub(crate) fn check_rotation(r: &Mat3) -> Result<()> {
    let err = (r.transpose() * r - Mat3::identity()).abs().max();
    let det = r.determinant();
    if !(err <= ORTHO_TOL) || !((det - 1.0).abs() <= ORTHO_TOL) {
        return Err(Error::Geometry(format!(
            "rotation is not orthonormal (|RᵀR - I| = {err:e}, det = {det})"
        )));
    }
    Ok(())
}
