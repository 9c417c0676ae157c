//! Pose canonicalization and rotation comparison.

use super::camera::{Camera, Mat3};
use crate::error::Result;

/// Expresses every pose in the frame of the first camera: camera 0 becomes
/// identity rotation at the origin.
pub fn relative_poses(cameras: &[Camera]) -> Result<Vec<Camera>> {
    let Some(first) = cameras.first() else {
        return Ok(Vec::new());
    };
    let r0t = first.rotation().transpose();
    let t0 = first.center();
    cameras
        .iter()
        .map(|c| c.with_pose(r0t * c.rotation(), r0t * (c.center() - t0)))
        .collect()
}

/// Rotates every pose about the scene origin so that camera 0 has identity
/// rotation; camera centers keep their distance to the origin, so the scene
/// stays inside the `[-1, 1]³` box that the feature planes cover.
pub fn rotation_aligned_poses(cameras: &[Camera]) -> Result<Vec<Camera>> {
    let Some(first) = cameras.first() else {
        return Ok(Vec::new());
    };
    let r0t = first.rotation().transpose();
    cameras.iter().map(|c| c.with_pose(r0t * c.rotation(), r0t * c.center())).collect()
}

/// Geodesic angle between two rotations in degrees.
pub fn rotation_angle(r1: &Mat3, r2: &Mat3) -> f64 {
    let c = (((r1.transpose() * r2).trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    c.acos().to_degrees()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;
    use nalgebra::{Rotation3, Unit};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_unit(rng: &mut impl Rng) -> Unit<Vec3> {
        Unit::new_normalize(Vec3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        ))
    }

    fn random_camera(rng: &mut impl Rng) -> Camera {
        let r = *Rotation3::from_axis_angle(&random_unit(rng), rng.random_range(0.0..3.0)).matrix();
        let t = Vec3::new(
            rng.random_range(-3.0..3.0),
            rng.random_range(-3.0..3.0),
            rng.random_range(-3.0..3.0),
        );
        Camera::new(Camera::intrinsics_from_fov(45.0, 16, 16), r, t, 16, 16).unwrap()
    }

    #[test]
    fn first_camera_becomes_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let c = random_camera(&mut rng);
        for cams in [vec![c.clone()], vec![c.clone(), c.clone()]] {
            for rel in relative_poses(&cams).unwrap() {
                assert!((rel.rotation() - Mat3::identity()).abs().max() < 1e-12);
                assert!(rel.center().norm() < 1e-12);
            }
        }
    }

    #[test]
    fn composing_with_first_pose_recovers_originals() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let cams = vec![random_camera(&mut rng), random_camera(&mut rng)];
            let rel = relative_poses(&cams).unwrap();
            let (r0, t0) = (cams[0].rotation(), cams[0].center());
            for (orig, r) in cams.iter().zip(&rel) {
                let rot = r0 * r.rotation();
                let t = r0 * r.center() + t0;
                assert!((rot - orig.rotation()).abs().max() <= 1e-10);
                assert!((t - orig.center()).abs().max() <= 1e-10);
            }
        }
    }

    #[test]
    fn aligned_poses_preserve_center_radius() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cams: Vec<Camera> = (0..4).map(|_| random_camera(&mut rng)).collect();
        let aligned = rotation_aligned_poses(&cams).unwrap();
        assert!((aligned[0].rotation() - Mat3::identity()).abs().max() < 1e-12);
        for (a, c) in aligned.iter().zip(&cams) {
            assert!((a.center().norm() - c.center().norm()).abs() < 1e-12);
        }
    }

    #[test]
    fn angles() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let id = Mat3::identity();
        assert_eq!(rotation_angle(&id, &id), 0.0);
        let quarter = *Rotation3::from_axis_angle(&random_unit(&mut rng), std::f64::consts::FRAC_PI_2).matrix();
        assert!((rotation_angle(&id, &quarter) - 90.0).abs() < 1e-12);
        for _ in 0..100 {
            let r = *Rotation3::from_axis_angle(&random_unit(&mut rng), rng.random_range(0.0..3.0)).matrix();
            let theta = rng.random_range(1.0..179.0);
            let step = *Rotation3::from_axis_angle(&random_unit(&mut rng), f64::to_radians(theta)).matrix();
            assert!((rotation_angle(&r, &(r * step)) - theta).abs() <= 1e-9);
        }
    }
}
