use rayon::prelude::*;

use super::raster::Frame;
use super::RenderConfig;
use crate::image::DepthMap;
use crate::scene::{Camera, Scene};

/// Transmittance threshold for the gaussian depth heuristic.
pub const DEFAULT_DEPTH_TAU: f64 = 0.5;

/// Rough depth map: per pixel, the view depth of the gaussian whose blend
/// first pushes transmittance below `tau`; `+inf` where that never happens.
pub fn depth_from_gaussians(scene: &Scene, camera: &Camera, tau: f64, config: &RenderConfig) -> DepthMap {
    let frame = Frame::prepare(scene, camera, config);
    let (w, h) = (frame.width, frame.height);
    let mut depth = DepthMap::new(w, h);
    if w == 0 {
        return depth;
    }
    let fill = |(y, row): (usize, &mut [f64])| {
        for (x, d) in row.iter_mut().enumerate() {
            *d = frame.depth_at(x, y, tau, config);
        }
    };
    if config.parallel {
        depth.data_mut().par_chunks_mut(w).enumerate().for_each(fill);
    } else {
        depth.data_mut().chunks_mut(w).enumerate().for_each(fill);
    }
    depth
}
