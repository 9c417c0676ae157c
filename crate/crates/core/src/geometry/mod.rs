//! Line geometry, cameras and distance biases.

pub mod camera;
mod compensated;
pub mod distance;
pub mod lines;
pub mod plucker;
pub mod pose;

pub use camera::{Camera, Mat3};
pub use distance::{distance_matrix, DistanceBias};
pub use lines::{grid_lines, token_cell, token_index, Plane};
pub use plucker::{line_distance, line_distance_with_threshold, PluckerLine, Vec3, EPS_PAR, PARALLEL_CUTOFF};
pub use pose::{relative_poses, rotation_aligned_poses, rotation_angle};
