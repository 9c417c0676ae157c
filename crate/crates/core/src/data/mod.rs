pub mod metrics;
pub mod scene;
pub mod srn;
pub mod synth;

pub use metrics::{default_input_views, extrapolated_subset, mse, psnr, ssim};
pub use scene::{SceneInstance, Split, View};
pub use srn::{export_scene, load_instance, load_srn};
pub use synth::{generate_scene, CameraLayout, Primitive, PrimitiveKind, SynthScene, SynthSpec};
