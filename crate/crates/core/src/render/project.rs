use nalgebra::{Matrix2x3, Matrix3, Quaternion, UnitQuaternion, Vector3};

use super::sh::{color_activation, eval_sh, sh_basis};
use super::RenderConfig;
use crate::scene::{Camera, Gaussian, SH_COEFFS};

/// A gaussian after projection onto one camera.
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectedGaussian {
    /// Index into the scene's gaussian list.
    pub index: usize,
    pub mean2d: [f64; 2],
    /// Dilated 2D covariance `(xx, xy, yy)`.
    pub cov2d: [f64; 3],
    /// Inverse of `cov2d`, `(xx, xy, yy)`.
    pub conic: [f64; 3],
    pub depth: f64,
    /// Post-activation color.
    pub color: [f64; 3],
    /// Per channel: whether the activation is in its linear region.
    pub active: [bool; 3],
    /// SH basis at the viewing direction, reused by the backward pass.
    pub basis: [f64; SH_COEFFS],
    pub opacity: f64,
}

impl ProjectedGaussian {
    /// `exp(-0.5 d^T conic d)` exponent at pixel `(x, y)`.
    #[inline]
    pub fn power_at(&self, x: f64, y: f64) -> f64 {
        let dx = self.mean2d[0] - x;
        let dy = self.mean2d[1] - y;
        let [a, b, c] = self.conic;
        -0.5 * (a * dx * dx + c * dy * dy) - b * dx * dy
    }
}

/// `R S S^T R^T` for a unit quaternion `(w, x, y, z)` and per-axis scales.
pub fn compute_covariance(rotation: [f64; 4], scale: [f64; 3]) -> Matrix3<f64> {
    let [w, x, y, z] = rotation;
    let r = UnitQuaternion::from_quaternion(Quaternion::new(w, x, y, z)).to_rotation_matrix().into_inner();
    let m = r * Matrix3::from_diagonal(&Vector3::from(scale));
    m * m.transpose()
}

/// Projects `g` onto `camera`. Returns `None` when the gaussian is culled:
/// too close or behind the camera, degenerate footprint, or a
/// `cull_sigma` footprint that misses the viewport.
pub fn project_gaussian(
    g: &Gaussian,
    index: usize,
    sh_degree: usize,
    camera: &Camera,
    config: &RenderConfig,
) -> Option<ProjectedGaussian> {
    let mean = g.position();
    let t = camera.pose.world_to_camera(&mean);
    if !(t.z > config.near_clip) {
        return None;
    }
    let k = &camera.intrinsics;
    let mean2d = [k.fx * t.x / t.z + k.cx, k.fy * t.y / t.z + k.cy];

    let sigma = compute_covariance(g.rotation.map(f64::from), g.scale.map(f64::from));
    let inv_z = 1.0 / t.z;
    let jacobian = Matrix2x3::new(
        k.fx * inv_z,
        0.0,
        -k.fx * t.x * inv_z * inv_z,
        0.0,
        k.fy * inv_z,
        -k.fy * t.y * inv_z * inv_z,
    );
    let m = jacobian * camera.pose.rotation;
    let cov = m * sigma * m.transpose();
    let a = cov[(0, 0)] + config.dilation;
    let b = cov[(0, 1)];
    let c = cov[(1, 1)] + config.dilation;
    let det = a * c - b * b;
    if !(det > 0.0) || !det.is_finite() {
        return None;
    }
    let conic = [c / det, -b / det, a / det];

    let rx = config.cull_sigma * a.sqrt();
    let ry = config.cull_sigma * c.sqrt();
    let (w, h) = (k.width as f64, k.height as f64);
    if mean2d[0] + rx < 0.0 || mean2d[0] - rx > w - 1.0 || mean2d[1] + ry < 0.0 || mean2d[1] - ry > h - 1.0 {
        return None;
    }

    let dir = (mean - camera.pose.center()).normalize();
    let raw = eval_sh(&g.sh, &dir, sh_degree);
    Some(ProjectedGaussian {
        index,
        mean2d,
        cov2d: [a, b, c],
        conic,
        depth: t.z,
        color: color_activation(raw),
        active: raw.map(|v| v + 0.5 > 0.0),
        basis: sh_basis(&dir, sh_degree),
        opacity: g.opacity as f64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::synthetic::default_gaussian;
    use crate::scene::{CameraIntrinsics, CameraPose};

    fn camera(fx: f64, w: usize, h: usize) -> Camera {
        Camera::new(
            CameraIntrinsics { fx, fy: fx, cx: w as f64 / 2.0, cy: h as f64 / 2.0, width: w, height: h },
            CameraPose::identity(),
        )
    }

    /// Brute-force `R diag(s) diag(s)^T R^T` with explicit index loops.
    fn covariance_oracle(r: [[f64; 3]; 3], s: [f64; 3]) -> [[f64; 3]; 3] {
        let mut out = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..3 {
                    out[i][j] += r[i][k] * s[k] * s[k] * r[j][k];
                }
            }
        }
        out
    }

    #[test]
    fn identity_covariance() {
        assert_eq!(compute_covariance([1.0, 0.0, 0.0, 0.0], [1.0; 3]), Matrix3::identity());
        let c = compute_covariance([1.0, 0.0, 0.0, 0.0], [2.0, 1.0, 1.0]);
        assert_eq!(c, Matrix3::from_diagonal(&Vector3::new(4.0, 1.0, 1.0)));
    }

    #[test]
    fn rotated_covariance_matches_oracle() {
        let half = std::f64::consts::FRAC_PI_4;
        let c = compute_covariance([half.cos(), 0.0, 0.0, half.sin()], [2.0, 1.0, 1.0]);
        let r = [[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]];
        let oracle = covariance_oracle(r, [2.0, 1.0, 1.0]);
        for i in 0..3 {
            for j in 0..3 {
                assert!((c[(i, j)] - oracle[i][j]).abs() < 1e-12);
            }
        }
        assert!((c[(0, 0)] - 1.0).abs() < 1e-12 && (c[(1, 1)] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn on_axis_projects_to_principal_point() {
        let mut g = default_gaussian();
        g.position = [0.0, 0.0, 1.0];
        g.scale = [0.01; 3];
        let cam = camera(100.0, 64, 48);
        let p = project_gaussian(&g, 0, 3, &cam, &RenderConfig::default()).unwrap();
        assert_eq!(p.mean2d, [32.0, 24.0]);
        assert_eq!(p.depth, 1.0);
    }

    #[test]
    fn behind_camera_is_culled() {
        let mut g = default_gaussian();
        g.position = [0.0, 0.0, -1.0];
        assert!(project_gaussian(&g, 0, 3, &camera(100.0, 64, 48), &RenderConfig::default()).is_none());
        g.position = [0.0, 0.0, 0.1];
        assert!(project_gaussian(&g, 0, 3, &camera(100.0, 64, 48), &RenderConfig::default()).is_none());
    }

    #[test]
    fn off_screen_is_culled() {
        let mut g = default_gaussian();
        g.position = [50.0, 0.0, 1.0];
        g.scale = [0.01; 3];
        assert!(project_gaussian(&g, 0, 3, &camera(100.0, 64, 48), &RenderConfig::default()).is_none());
    }

    #[test]
    fn isotropic_footprint_follows_jacobian() {
        let mut g = default_gaussian();
        g.position = [0.0, 0.0, 2.0];
        let p = project_gaussian(&g, 0, 3, &camera(100.0, 64, 64), &RenderConfig::default()).unwrap();
        // (fx / z)^2 on axis, plus the dilation
        let expected = (100.0f64 / 2.0).powi(2) + 0.3;
        assert!((p.cov2d[0] - expected).abs() < 1e-9);
        assert!((p.cov2d[2] - expected).abs() < 1e-9);
        assert!(p.cov2d[1].abs() < 1e-9);
    }

    #[test]
    fn doubling_resolution_doubles_mean() {
        let mut g = default_gaussian();
        g.position = [0.3, -0.2, 2.5];
        g.scale = [0.05; 3];
        let cfg = RenderConfig::default();
        let small = Camera::new(
            CameraIntrinsics { fx: 60.0, fy: 55.0, cx: 31.5, cy: 20.25, width: 64, height: 40 },
            CameraPose::identity(),
        );
        let mut big = small;
        let k = &mut big.intrinsics;
        (k.fx, k.fy, k.cx, k.cy, k.width, k.height) = (120.0, 110.0, 63.0, 40.5, 128, 80);
        let a = project_gaussian(&g, 0, 3, &small, &cfg).unwrap();
        let b = project_gaussian(&g, 0, 3, &big, &cfg).unwrap();
        assert!((b.mean2d[0] - 2.0 * a.mean2d[0]).abs() < 1e-9);
        assert!((b.mean2d[1] - 2.0 * a.mean2d[1]).abs() < 1e-9);
    }
}
