//! Volume rendering of triplane fields inside the `[-1, 1]³` box.

pub mod composite;
pub mod field;
pub mod plane;
pub mod sampling;

pub use composite::{composite, Composite};
pub use field::{decode_points, render_image, render_rays, FieldVars, TriplaneField};
pub use plane::{project, sample_plane_value};
pub use sampling::{ray_box_clip, stratified, RaySampling};
