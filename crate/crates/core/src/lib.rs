//! Swarm tracking from aerial soft segmentation masks.
//!
//! A particle filter follows a swarm on the image plane. Particles are moved by
//! the image motion that the drone's own egomotion induces (from fused GPS/IMU
//! poses) and are reweighted by per-frame soft masks. Tracks are lifted to the
//! world frame by intersecting viewing rays with the water surface, and the
//! particle cloud's outline is recovered with alpha shapes.

pub mod baseline;
pub mod filter;
pub mod fusion;
pub mod geometry;
pub mod io;
pub mod mask;
pub mod metrics;
pub mod pipeline;
pub mod shape;
pub mod synth;

mod error;

pub use error::{Error, Result};
pub use filter::{ParticleSet, TrackResult, Tracker, TrackerConfig};
pub use fusion::{FusionState, NoiseConfig, SensorRecord};
pub use geometry::{CameraMotion, CameraPose, ImagePoint, Intrinsics, PixelPoint, WorldPoint};
pub use mask::{BinaryMask, SoftMask};
pub use shape::AlphaShape;

/// Crate version, written next to pipeline outputs.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
