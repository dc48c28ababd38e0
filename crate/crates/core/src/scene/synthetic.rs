//! Seeded desk-scale scenes with a ring of cameras looking at the origin.
//!
//! Every training image is produced by this crate's own renderer, so an
//! unedited fixture has zero photometric loss.

use std::str::FromStr;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ply::{decode_opacity, decode_scale};
use super::{CameraIntrinsics, CameraPose, Gaussian, Scene, ShCoeffs, TrainingView, SH_COEFFS};
use crate::error::{Error, Result};
use crate::render::{render, sh::SH_C0, RenderConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RecipeKind {
    /// `grid x grid` flat gaussians on the `z = 0` plane, jittered checkerboard colors.
    Plane,
    /// Two colored clusters on the x axis.
    TwoBlobs,
    /// A checkerboard floor with a spherical shell of gaussians above it.
    OrbitRoom,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Recipe {
    pub kind: RecipeKind,
    /// Plane side length in gaussians (plane and floor).
    pub grid: usize,
    /// Gaussians per blob / on the sphere.
    pub cluster: usize,
    pub views: usize,
    pub width: usize,
    pub height: usize,
    /// Horizontal field of view in radians.
    pub fov_x: f64,
}

impl Recipe {
    pub fn new(kind: RecipeKind) -> Self {
        let (grid, cluster) = match kind {
            RecipeKind::Plane => (10, 0),
            RecipeKind::TwoBlobs => (0, 10),
            RecipeKind::OrbitRoom => (12, 40),
        };
        Self { kind, grid, cluster, views: 8, width: 64, height: 64, fov_x: 50f64.to_radians() }
    }

    pub fn named(name: &str) -> Result<Self> {
        name.parse()
    }

    pub fn with_resolution(mut self, width: usize, height: usize) -> Self {
        self.width = width;
        self.height = height;
        self
    }

    pub fn with_views(mut self, views: usize) -> Self {
        self.views = views;
        self
    }

    pub fn with_grid(mut self, grid: usize) -> Self {
        self.grid = grid;
        self
    }
}

impl FromStr for Recipe {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let kind = match s {
            "plane" => RecipeKind::Plane,
            "two-blobs" => RecipeKind::TwoBlobs,
            "orbit-room" => RecipeKind::OrbitRoom,
            other => {
                return Err(Error::Config(format!(
                    "unknown recipe '{other}' (expected plane, two-blobs or orbit-room)"
                )))
            }
        };
        Ok(Self::new(kind))
    }
}

/// A unit gaussian at the origin: identity rotation, unit scale, opacity 0.5, grey.
pub fn default_gaussian() -> Gaussian {
    Gaussian {
        position: [0.0; 3],
        rotation: [1.0, 0.0, 0.0, 0.0],
        scale: [1.0; 3],
        opacity: 0.5,
        sh: [[0.0; 3]; SH_COEFFS],
    }
}

/// SH block whose degree-0 term evaluates to `rgb` after the `+0.5` activation.
pub fn sh_from_rgb(rgb: [f64; 3]) -> ShCoeffs {
    let mut sh = [[0.0; 3]; SH_COEFFS];
    for ch in 0..3 {
        sh[0][ch] = ((rgb[ch] - 0.5) / SH_C0) as f32;
    }
    sh
}

fn flat_gaussian(position: [f32; 3], log_scale: [f32; 3], logit: f32, rgb: [f64; 3]) -> Gaussian {
    Gaussian {
        position,
        rotation: [1.0, 0.0, 0.0, 0.0],
        scale: log_scale.map(decode_scale),
        opacity: decode_opacity(logit),
        sh: sh_from_rgb(rgb),
    }
}

fn checker_grid(rng: &mut ChaCha8Rng, grid: usize, extent: f32, z: f32) -> Vec<Gaussian> {
    let spacing = extent / grid as f32;
    let log_s = (spacing * 0.55).ln();
    let log_t = (spacing * 0.05).ln();
    let mut out = Vec::with_capacity(grid * grid);
    for j in 0..grid {
        for i in 0..grid {
            let x = (i as f32 + 0.5) * spacing - extent / 2.0;
            let y = (j as f32 + 0.5) * spacing - extent / 2.0;
            let base = if (i + j) % 2 == 0 { 0.78 } else { 0.28 };
            let rgb = [0, 1, 2].map(|_| base + rng.random_range(-0.15..0.15));
            out.push(flat_gaussian([x, y, z], [log_s, log_s, log_t], 3.0, rgb));
        }
    }
    out
}

fn unit_ball(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
        if v.norm_squared() <= 1.0 {
            return v;
        }
    }
}

fn random_rotation(rng: &mut ChaCha8Rng) -> [f32; 4] {
    loop {
        let q: [f64; 4] = [0; 4].map(|_| rng.random_range(-1.0..1.0));
        let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        if n > 0.1 && n <= 1.0 {
            return q.map(|v| (v / n) as f32);
        }
    }
}

fn blob(rng: &mut ChaCha8Rng, center: Vector3<f64>, count: usize, base: [f64; 3]) -> Vec<Gaussian> {
    (0..count)
        .map(|_| {
            let p = center + unit_ball(rng) * 0.22;
            let log_scale = [0; 3].map(|_| (rng.random_range(0.06f32..0.11)).ln());
            let rgb = base.map(|c| c + rng.random_range(-0.06..0.06));
            let mut g = flat_gaussian(
                [p.x as f32, p.y as f32, p.z as f32],
                log_scale,
                rng.random_range(1.5f32..3.0),
                rgb,
            );
            g.rotation = random_rotation(rng);
            // mild view dependence, small enough to keep activations positive
            for k in 1..SH_COEFFS {
                for ch in 0..3 {
                    g.sh[k][ch] = rng.random_range(-0.04f32..0.04);
                }
            }
            g
        })
        .collect()
}

fn sphere_shell(rng: &mut ChaCha8Rng, center: Vector3<f64>, radius: f64, count: usize) -> Vec<Gaussian> {
    (0..count)
        .map(|_| {
            let dir = loop {
                let v = unit_ball(rng);
                if v.norm() > 0.2 {
                    break v.normalize();
                }
            };
            let p = center + dir * radius;
            let rgb = [rng.random_range(0.2..0.9), rng.random_range(0.2..0.9), rng.random_range(0.2..0.9)];
            let mut g = flat_gaussian([p.x as f32, p.y as f32, p.z as f32], [(0.08f32).ln(); 3], 2.5, rgb);
            g.rotation = random_rotation(rng);
            g
        })
        .collect()
}

fn ring_cameras(recipe: &Recipe, radius: f64, height: f64, phase: f64) -> Vec<(CameraIntrinsics, CameraPose)> {
    let intrinsics = CameraIntrinsics::from_fov(recipe.width, recipe.height, recipe.fov_x);
    (0..recipe.views)
        .map(|k| {
            let theta = phase + std::f64::consts::TAU * k as f64 / recipe.views as f64;
            let position = Vector3::new(radius * theta.cos(), radius * theta.sin(), height);
            let pose = CameraPose::look_at(position, Vector3::zeros(), Vector3::z()).expect("ring camera is not vertical");
            (intrinsics, pose)
        })
        .collect()
}

/// Builds the scene for `recipe` and renders one training image per ring camera.
pub fn generate_synthetic_scene(seed: u64, recipe: &Recipe) -> Result<(Scene, Vec<TrainingView>)> {
    if recipe.views < 2 {
        return Err(Error::Config(format!("recipe needs at least 2 cameras, got {}", recipe.views)));
    }
    if recipe.width == 0 || recipe.height == 0 {
        return Err(Error::Config("recipe resolution must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (gaussians, cameras) = match recipe.kind {
        RecipeKind::Plane => {
            if recipe.grid == 0 {
                return Err(Error::Config("plane recipe needs a positive grid size".into()));
            }
            let g = checker_grid(&mut rng, recipe.grid, 2.0, 0.0);
            (g, ring_cameras(recipe, 0.5, 1.6, 0.3))
        }
        RecipeKind::TwoBlobs => {
            let mut g = blob(&mut rng, Vector3::new(0.7, 0.0, 0.0), recipe.cluster, [0.75, 0.58, 0.5]);
            g.extend(blob(&mut rng, Vector3::new(-0.7, 0.0, 0.0), recipe.cluster, [0.35, 0.5, 0.78]));
            (g, ring_cameras(recipe, 3.0, 1.0, 0.4))
        }
        RecipeKind::OrbitRoom => {
            let mut g = checker_grid(&mut rng, recipe.grid.max(1), 3.0, -0.45);
            g.extend(sphere_shell(&mut rng, Vector3::zeros(), 0.35, recipe.cluster));
            (g, ring_cameras(recipe, 2.6, 1.4, 0.2))
        }
    };
    let scene = Scene::new(gaussians);
    let config = RenderConfig::default();
    let views = cameras
        .into_iter()
        .enumerate()
        .map(|(id, (intrinsics, pose))| TrainingView {
            id: id as u32,
            intrinsics,
            pose,
            image: render(&scene, &crate::scene::Camera::new(intrinsics, pose), &config),
        })
        .collect();
    Ok((scene, views))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plane_count() {
        let (scene, views) = generate_synthetic_scene(1, &Recipe::new(RecipeKind::Plane)).unwrap();
        assert_eq!(scene.len(), 100);
        assert_eq!(views.len(), 8);
        scene.validate().unwrap();
    }

    #[test]
    fn deterministic() {
        for name in ["plane", "two-blobs", "orbit-room"] {
            let recipe = Recipe::named(name).unwrap().with_resolution(24, 20);
            let a = generate_synthetic_scene(9, &recipe).unwrap();
            let b = generate_synthetic_scene(9, &recipe).unwrap();
            assert_eq!(a, b, "{name}");
            let c = generate_synthetic_scene(10, &recipe).unwrap();
            assert_ne!(a.0, c.0, "{name}");
        }
    }

    #[test]
    fn unknown_recipe() {
        assert!(matches!(Recipe::named("cube"), Err(Error::Config(_))));
    }

    #[test]
    fn too_few_views() {
        let recipe = Recipe::new(RecipeKind::TwoBlobs).with_views(1);
        assert!(matches!(generate_synthetic_scene(0, &recipe), Err(Error::Config(_))));
    }

    #[test]
    fn images_match_renders() {
        let (scene, views) = generate_synthetic_scene(4, &Recipe::new(RecipeKind::TwoBlobs)).unwrap();
        for v in &views {
            let img = render(&scene, &v.camera(), &RenderConfig::default());
            let max = img.data().iter().zip(v.image.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert_eq!(max, 0.0);
        }
    }
}
