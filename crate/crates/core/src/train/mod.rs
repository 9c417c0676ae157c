//! Loss, training step, run loop and evaluation.

pub mod config;
pub mod eval;
pub mod loss;
pub mod run;
pub mod step;

pub use config::{PoseFrame, TrainConfig};
pub use eval::{reconstruct, score_views, summarize, Reconstruction, Summary, ViewScore};
pub use loss::{reconstruction_loss, NoPerceptual, Perceptual};
pub use run::{load_state, run, LogRow, RunDir, RunOptions};
pub use step::{canonical_cameras, choose_views, train_step, TrainState};
