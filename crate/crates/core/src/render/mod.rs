//! CPU splat renderer: EWA projection, global depth sort, front-to-back
//! alpha blending, and the transmittance-threshold depth map.

pub mod bench;
pub mod depth;
pub mod project;
pub mod raster;
pub mod sh;

pub use bench::{bench_layouts, BenchReport, BenchRow};
pub use depth::{depth_from_gaussians, DEFAULT_DEPTH_TAU};
pub use project::{compute_covariance, project_gaussian, ProjectedGaussian};
pub use raster::{render, render_forward, render_layout, ForwardState, PixelLayout};
pub use sh::{color_activation, eval_sh, sh_basis};

/// Rasterizer constants, all inherited from the reference 3DGS rasterizer.
#[derive(Clone, Debug, PartialEq)]
pub struct RenderConfig {
    pub background: [f64; 3],
    /// Gaussians at view depth `<=` this are culled.
    pub near_clip: f64,
    pub alpha_max: f64,
    /// Contributions with a smaller alpha are skipped.
    pub alpha_min: f64,
    /// Traversal stops before transmittance would fall below this.
    pub transmittance_min: f64,
    /// Added to the diagonal of every 2D covariance.
    pub dilation: f64,
    /// Footprint (in standard deviations) used for viewport culling.
    pub cull_sigma: f64,
    pub tile_size: usize,
    /// Rows are shaded on the rayon pool. Output is bit-identical either way.
    pub parallel: bool,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            background: [0.0; 3],
            near_clip: 0.2,
            alpha_max: 0.99,
            alpha_min: 1.0 / 255.0,
            transmittance_min: 1e-4,
            dilation: 0.3,
            cull_sigma: 3.0,
            tile_size: 16,
            parallel: true,
        }
    }
}
