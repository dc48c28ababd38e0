//! Interactive recoloring of pre-trained Gaussian Splatting scenes.
//!
//! A selection painted on one view is lifted to a world-space point cloud,
//! reprojected onto every training view, and used to tint the training
//! targets. Only the spherical-harmonics color coefficients are then refit,
//! so scene geometry never changes.
//!
//! Module map:
//! - [`scene`]: gaussians, cameras, PLY checkpoints, camera manifests, synthetic fixtures.
//! - [`render`]: projection, alpha blending, transmittance depth, pixel layouts.
//! - [`grad`]: L1 + SSIM photometric loss and hand-written SH gradients.
//! - [`stereo`]: rendered stereo pairs, ZNCC block matching, horizontal + vertical depth.
//! - [`selection`]: mask painting, unprojection, outlier filtering, reprojection.
//! - [`optimizer`]: edited dataset, Adam, background refit loop.
//! - [`service`]: session state machine, wire protocol, headless edit pipeline.

pub mod error;
pub mod grad;
pub mod image;
pub mod optimizer;
pub mod render;
pub mod scene;
pub mod selection;
pub mod service;
pub mod stereo;

pub use error::{Error, Result};
pub use image::{DepthMap, Image};
pub use scene::{Camera, CameraIntrinsics, CameraPose, Gaussian, Scene, TrainingView};
