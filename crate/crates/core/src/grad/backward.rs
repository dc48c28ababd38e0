use super::loss::GradientImage;
use crate::error::{Error, Result};
use crate::render::sh::coeff_count;
use crate::render::{render_forward, ForwardState, RenderConfig};
use crate::scene::{Camera, Scene, SH_COEFFS};

/// Loss gradient for every SH coefficient, `[gaussian][coefficient][channel]`.
/// Coefficients above the scene's degree are always zero.
#[derive(Clone, Debug, PartialEq)]
pub struct ShGradients {
    pub coeffs: Vec<[[f64; 3]; SH_COEFFS]>,
}

impl ShGradients {
    pub fn zeros(n: usize) -> Self {
        Self { coeffs: vec![[[0.0; 3]; SH_COEFFS]; n] }
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().flatten().flatten().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().flatten().flatten().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Renders `scene` from `camera` and backpropagates `grad` into the SH
/// coefficients. Geometry and opacity are treated as constants.
pub fn backward_sh(scene: &Scene, camera: &Camera, grad: &GradientImage, config: &RenderConfig) -> Result<ShGradients> {
    let state = render_forward(scene, camera, config);
    backward_sh_with_state(&state, scene, grad)
}

/// As [`backward_sh`], reusing the contribution lists of an earlier forward pass.
pub fn backward_sh_with_state(state: &ForwardState, scene: &Scene, grad: &GradientImage) -> Result<ShGradients> {
    let frame = &state.frame;
    if grad.width != frame.width || grad.height != frame.height || grad.data.len() != frame.width * frame.height * 3 {
        return Err(Error::Contract(format!(
            "gradient is {}x{} but the render is {}x{}",
            grad.width, grad.height, frame.width, frame.height
        )));
    }
    // d loss / d color, per projected gaussian
    let mut color_grad = vec![[0.0f64; 3]; frame.projected.len()];
    for p in 0..frame.width * frame.height {
        let g = &grad.data[p * 3..p * 3 + 3];
        for &(slot, weight) in state.pixel_contributions(p) {
            let acc = &mut color_grad[slot as usize];
            for ch in 0..3 {
                acc[ch] += g[ch] * weight;
            }
        }
    }
    let mut out = ShGradients::zeros(scene.len());
    let n_coeffs = coeff_count(scene.sh_degree.min(3));
    for (pg, cg) in frame.projected.iter().zip(&color_grad) {
        let dst = &mut out.coeffs[pg.index];
        for k in 0..n_coeffs {
            for ch in 0..3 {
                if pg.active[ch] {
                    dst[k][ch] = cg[ch] * pg.basis[k];
                }
            }
        }
    }
    Ok(out)
}
