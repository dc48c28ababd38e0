//! Real spherical-harmonics basis up to degree 3, with the sign and
//! ordering conventions of the reference 3DGS rasterizer.

use nalgebra::Vector3;

use crate::scene::{ShCoeffs, SH_COEFFS};

pub const SH_C0: f64 = 0.282_094_791_773_878_14;
pub const SH_C1: f64 = 0.488_602_511_902_919_9;
pub const SH_C2: [f64; 5] = [
    1.092_548_430_592_079_2,
    -1.092_548_430_592_079_2,
    0.315_391_565_252_520_05,
    -1.092_548_430_592_079_2,
    0.546_274_215_296_039_6,
];
pub const SH_C3: [f64; 7] = [
    -0.590_043_589_926_643_5,
    2.890_611_442_640_554,
    -0.457_045_799_464_465_8,
    0.373_176_332_590_115_4,
    -0.457_045_799_464_465_8,
    1.445_305_721_320_277,
    -0.590_043_589_926_643_5,
];

/// Number of active coefficients for `degree`.
pub fn coeff_count(degree: usize) -> usize {
    (degree + 1) * (degree + 1)
}

/// Basis values `Y_k(dir)`; entries past the active degree are zero.
pub fn sh_basis(dir: &Vector3<f64>, degree: usize) -> [f64; SH_COEFFS] {
    let mut b = [0.0; SH_COEFFS];
    b[0] = SH_C0;
    if degree == 0 {
        return b;
    }
    let (x, y, z) = (dir.x, dir.y, dir.z);
    b[1] = -SH_C1 * y;
    b[2] = SH_C1 * z;
    b[3] = -SH_C1 * x;
    if degree == 1 {
        return b;
    }
    let (xx, yy, zz) = (x * x, y * y, z * z);
    let (xy, yz, xz) = (x * y, y * z, x * z);
    b[4] = SH_C2[0] * xy;
    b[5] = SH_C2[1] * yz;
    b[6] = SH_C2[2] * (2.0 * zz - xx - yy);
    b[7] = SH_C2[3] * xz;
    b[8] = SH_C2[4] * (xx - yy);
    if degree == 2 {
        return b;
    }
    b[9] = SH_C3[0] * y * (3.0 * xx - yy);
    b[10] = SH_C3[1] * xy * z;
    b[11] = SH_C3[2] * y * (4.0 * zz - xx - yy);
    b[12] = SH_C3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy);
    b[13] = SH_C3[4] * x * (4.0 * zz - xx - yy);
    b[14] = SH_C3[5] * z * (xx - yy);
    b[15] = SH_C3[6] * x * (xx - 3.0 * yy);
    b
}

/// Raw radiance `sum_k C_k Y_k(dir)` per channel (before activation).
pub fn eval_sh(coeffs: &ShCoeffs, dir: &Vector3<f64>, degree: usize) -> [f64; 3] {
    let basis = sh_basis(dir, degree);
    let mut out = [0.0; 3];
    for (k, y) in basis.iter().enumerate().take(coeff_count(degree.min(3))) {
        for ch in 0..3 {
            out[ch] += coeffs[k][ch] as f64 * y;
        }
    }
    out
}

/// `max(0, raw + 0.5)` per channel.
pub fn color_activation(raw: [f64; 3]) -> [f64; 3] {
    raw.map(|v| (v + 0.5).max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dirs() -> Vec<Vector3<f64>> {
        vec![
            Vector3::new(0.0, 0.0, 1.0),
            Vector3::new(0.3, -0.5, 0.8).normalize(),
            Vector3::new(-0.9, 0.1, 0.2).normalize(),
        ]
    }

    #[test]
    fn dc_only() {
        let mut c = [[0.0f32; 3]; SH_COEFFS];
        c[0] = [1.0, 1.0, 1.0];
        for d in dirs() {
            let v = eval_sh(&c, &d, 3);
            for ch in v {
                assert!((ch - 0.282_094_79).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn zero_coeffs() {
        let c = [[0.0f32; 3]; SH_COEFFS];
        assert_eq!(eval_sh(&c, &dirs()[1], 3), [0.0; 3]);
    }

    #[test]
    fn degree_one_is_odd() {
        let mut c = [[0.0f32; 3]; SH_COEFFS];
        c[1] = [0.3, -0.2, 0.7];
        c[2] = [0.1, 0.4, -0.6];
        c[3] = [-0.8, 0.5, 0.2];
        for d in dirs() {
            let a = eval_sh(&c, &d, 1);
            let b = eval_sh(&c, &(-d), 1);
            for ch in 0..3 {
                assert!((a[ch] + b[ch]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn higher_degrees_are_inactive_below_their_order() {
        let mut c = [[0.0f32; 3]; SH_COEFFS];
        c[9] = [5.0; 3];
        assert_eq!(eval_sh(&c, &dirs()[1], 2), [0.0; 3]);
        assert_ne!(eval_sh(&c, &dirs()[1], 3), [0.0; 3]);
    }

    #[test]
    fn basis_is_orthonormal_in_the_reference_sign_convention() {
        // Monte Carlo over a Fibonacci sphere: integral of Y_i Y_j = delta_ij.
        let n = 20_000;
        let mut gram = [[0.0f64; SH_COEFFS]; SH_COEFFS];
        let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
        for i in 0..n {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            let d = Vector3::new(r * phi.cos(), r * phi.sin(), z);
            let b = sh_basis(&d, 3);
            for a in 0..SH_COEFFS {
                for c in 0..SH_COEFFS {
                    gram[a][c] += b[a] * b[c] * 4.0 * std::f64::consts::PI / n as f64;
                }
            }
        }
        for a in 0..SH_COEFFS {
            for c in 0..SH_COEFFS {
                let expected = if a == c { 1.0 } else { 0.0 };
                assert!((gram[a][c] - expected).abs() < 2e-3, "{a} {c} {}", gram[a][c]);
            }
        }
    }

    #[test]
    fn activation() {
        assert_eq!(color_activation([0.0; 3]), [0.5; 3]);
        assert_eq!(color_activation([-1.0; 3]), [0.0; 3]);
        let v = color_activation([0.3, -0.6, 0.1]);
        assert!((v[0] - 0.8).abs() < 1e-15 && v[1] == 0.0 && (v[2] - 0.6).abs() < 1e-15);
    }
}
