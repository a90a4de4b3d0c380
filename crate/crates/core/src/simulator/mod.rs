//! Synthetic ground truth: scenes, the log-intensity threshold event model,
//! and offset-invariant PSNR for scoring reconstructions.

mod events;
mod psnr;
mod scene;

pub use events::{generate_events, jitter_timestamps};
pub use psnr::psnr_aligned;
pub use scene::{render_scene, GroundTruthVideo, SceneKind, SceneParams, Texture};
