//! Scene and camera data model plus on-disk formats.

pub mod cameras;
pub mod ply;
pub mod synthetic;

use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3};

use crate::error::{Error, Result};
use crate::image::Image;

pub use cameras::{load_cameras, parse_manifest, save_cameras, ManifestEntry};
pub use ply::{load_scene_ply, read_scene_ply, save_scene_ply, write_scene_ply};
pub use synthetic::{generate_synthetic_scene, Recipe, RecipeKind};

/// Number of SH coefficients per channel for degree 3.
pub const SH_COEFFS: usize = 16;
pub const MAX_SH_DEGREE: usize = 3;

/// SH coefficients, `sh[k][channel]` with `k = l*l + l + m`.
pub type ShCoeffs = [[f32; 3]; SH_COEFFS];

/// One splat primitive with activated (not log / logit) parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Gaussian {
    pub position: [f32; 3],
    /// Unit quaternion `(w, x, y, z)`.
    pub rotation: [f32; 4],
    /// Per-axis standard deviations, strictly positive.
    pub scale: [f32; 3],
    /// In `(0, 1)`.
    pub opacity: f32,
    pub sh: ShCoeffs,
}

impl Gaussian {
    pub fn position(&self) -> Vector3<f64> {
        Vector3::new(self.position[0] as f64, self.position[1] as f64, self.position[2] as f64)
    }

    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        let [w, x, y, z] = self.rotation.map(f64::from);
        UnitQuaternion::from_quaternion(Quaternion::new(w, x, y, z)).to_rotation_matrix().into_inner()
    }

    pub fn scale(&self) -> Vector3<f64> {
        Vector3::new(self.scale[0] as f64, self.scale[1] as f64, self.scale[2] as f64)
    }

    /// True when every non-SH field matches `other` bit for bit.
    pub fn same_geometry(&self, other: &Gaussian) -> bool {
        let bits = |v: &[f32]| v.iter().map(|f| f.to_bits()).collect::<Vec<_>>();
        bits(&self.position) == bits(&other.position)
            && bits(&self.rotation) == bits(&other.rotation)
            && bits(&self.scale) == bits(&other.scale)
            && self.opacity.to_bits() == other.opacity.to_bits()
    }

    pub fn validate(&self, index: usize) -> Result<()> {
        let data = |message: String| Error::Data { index, message };
        let finite = self.position.iter().chain(&self.rotation).chain(&self.scale).all(|v| v.is_finite())
            && self.opacity.is_finite()
            && self.sh.iter().flatten().all(|v| v.is_finite());
        if !finite {
            return Err(data("non-finite parameter".into()));
        }
        let norm = self.rotation.iter().map(|&q| (q as f64).powi(2)).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-5 {
            return Err(data(format!("quaternion norm {norm}")));
        }
        if self.scale.iter().any(|&s| s <= 0.0) {
            return Err(data("scale must be positive".into()));
        }
        if !(self.opacity > 0.0 && self.opacity < 1.0) {
            return Err(data(format!("opacity {} outside (0, 1)", self.opacity)));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub gaussians: Vec<Gaussian>,
    /// Active SH degree, `0..=3`.
    pub sh_degree: usize,
}

impl Scene {
    pub fn new(gaussians: Vec<Gaussian>) -> Self {
        Self { gaussians, sh_degree: MAX_SH_DEGREE }
    }

    pub fn len(&self) -> usize {
        self.gaussians.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gaussians.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.sh_degree > MAX_SH_DEGREE {
            return Err(Error::Config(format!("sh degree {} > {MAX_SH_DEGREE}", self.sh_degree)));
        }
        self.gaussians.iter().enumerate().try_for_each(|(i, g)| g.validate(i))
    }

    /// Center and radius of the bounding sphere of all gaussian means,
    /// centered on the axis-aligned bounding box.
    pub fn bounding_sphere(&self) -> (Vector3<f64>, f64) {
        if self.gaussians.is_empty() {
            return (Vector3::zeros(), 0.0);
        }
        let mut lo = Vector3::repeat(f64::INFINITY);
        let mut hi = Vector3::repeat(f64::NEG_INFINITY);
        for g in &self.gaussians {
            let p = g.position();
            lo = lo.inf(&p);
            hi = hi.sup(&p);
        }
        let center = (lo + hi) * 0.5;
        let radius = self.gaussians.iter().map(|g| (g.position() - center).norm()).fold(0.0, f64::max);
        (center, radius)
    }

    /// True when every gaussian keeps bit-identical geometry and opacity.
    pub fn same_geometry(&self, other: &Scene) -> bool {
        self.len() == other.len() && self.gaussians.iter().zip(&other.gaussians).all(|(a, b)| a.same_geometry(b))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraIntrinsics {
    /// Pinhole with the principal point at the image center and the given
    /// horizontal field of view in radians.
    pub fn from_fov(width: usize, height: usize, fov_x: f64) -> Self {
        let fx = width as f64 / (2.0 * (fov_x / 2.0).tan());
        Self { fx, fy: fx, cx: width as f64 / 2.0, cy: height as f64 / 2.0, width, height }
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(format!("focal lengths must be positive, got {} {}", self.fx, self.fy));
        }
        if self.width == 0 || self.height == 0 {
            return Err("image size must be positive".into());
        }
        if !(self.cx >= 0.0 && self.cx < self.width as f64 && self.cy >= 0.0 && self.cy < self.height as f64) {
            return Err(format!("principal point ({}, {}) outside the image", self.cx, self.cy));
        }
        Ok(())
    }
}

/// World-to-camera transform: `x_cam = rotation * x_world + translation`.
/// Camera axes follow the x-right, y-down, z-forward convention.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CameraPose {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl CameraPose {
    pub fn identity() -> Self {
        Self { rotation: Matrix3::identity(), translation: Vector3::zeros() }
    }

    /// Camera at `position` looking toward `target`, with `up` as the world
    /// up hint (must not be parallel to the view direction).
    pub fn look_at(position: Vector3<f64>, target: Vector3<f64>, up: Vector3<f64>) -> Option<Self> {
        let forward = (target - position).try_normalize(1e-12)?;
        let right = forward.cross(&up).try_normalize(1e-12)?;
        let down = forward.cross(&right);
        let rotation = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
        let translation = -(rotation * position);
        Some(Self { rotation, translation })
    }

    pub fn center(&self) -> Vector3<f64> {
        -(self.rotation.transpose() * self.translation)
    }

    #[inline]
    pub fn world_to_camera(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    #[inline]
    pub fn camera_to_world(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation.transpose() * (p - self.translation)
    }

    /// The same orientation with the center moved by `offset` expressed in
    /// this camera's own axes.
    pub fn shifted_in_view(&self, offset: Vector3<f64>) -> Self {
        Self { rotation: self.rotation, translation: self.translation - offset }
    }

    pub fn validate(&self, tol: f64) -> std::result::Result<(), String> {
        let r = &self.rotation;
        if !r.iter().chain(self.translation.iter()).all(|v| v.is_finite()) {
            return Err("non-finite pose".into());
        }
        let err = (r * r.transpose() - Matrix3::identity()).abs().max();
        if err > tol {
            return Err(format!("rotation is not orthonormal (max deviation {err:.3e})"));
        }
        let det = r.determinant();
        if (det - 1.0).abs() > tol {
            return Err(format!("rotation determinant {det:.6} is not +1"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Camera {
    pub intrinsics: CameraIntrinsics,
    pub pose: CameraPose,
}

impl Camera {
    pub fn new(intrinsics: CameraIntrinsics, pose: CameraPose) -> Self {
        Self { intrinsics, pose }
    }

    pub fn width(&self) -> usize {
        self.intrinsics.width
    }

    pub fn height(&self) -> usize {
        self.intrinsics.height
    }

    /// Pixel coordinates and view depth of a world point. Pixel `(i, j)`
    /// samples the image plane at exactly `(i, j)`.
    #[inline]
    pub fn project(&self, p: &Vector3<f64>) -> (f64, f64, f64) {
        let c = self.pose.world_to_camera(p);
        let k = &self.intrinsics;
        (k.fx * c.x / c.z + k.cx, k.fy * c.y / c.z + k.cy, c.z)
    }

    /// World point seen at pixel `(u, v)` with view depth `depth`.
    #[inline]
    pub fn unproject(&self, u: f64, v: f64, depth: f64) -> Vector3<f64> {
        let k = &self.intrinsics;
        let c = Vector3::new(depth * (u - k.cx) / k.fx, depth * (v - k.cy) / k.fy, depth);
        self.pose.camera_to_world(&c)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainingView {
    pub id: u32,
    pub intrinsics: CameraIntrinsics,
    pub pose: CameraPose,
    pub image: Image,
}

impl TrainingView {
    pub fn camera(&self) -> Camera {
        Camera::new(self.intrinsics, self.pose)
    }
}
