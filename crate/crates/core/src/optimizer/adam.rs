use crate::error::{Error, Result};
use crate::grad::{ShGradients, DEFAULT_LAMBDA};
use crate::scene::{Scene, SH_COEFFS};

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerConfig {
    /// Learning rate of the degree-0 coefficient.
    pub lr_dc: f64,
    /// Learning rate of the 15 higher-order coefficients.
    pub lr_rest: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Weight of the SSIM term in the loss.
    pub lambda: f64,
    /// Background loop publishes a scene snapshot this often.
    pub snapshot_every: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            lr_dc: 0.0025,
            lr_rest: 0.0025 / 20.0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            lambda: DEFAULT_LAMBDA,
            snapshot_every: 10,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lr_dc > 0.0
            && self.lr_rest > 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0
            && (0.0..=1.0).contains(&self.lambda)
            && self.snapshot_every > 0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid optimizer configuration: {self:?}")))
        }
    }
}

/// First and second moments per SH coefficient.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub m: Vec<[[f64; 3]; SH_COEFFS]>,
    pub v: Vec<[[f64; 3]; SH_COEFFS]>,
    pub t: u64,
}

impl AdamState {
    pub fn new(n: usize) -> Self {
        Self { m: vec![[[0.0; 3]; SH_COEFFS]; n], v: vec![[[0.0; 3]; SH_COEFFS]; n], t: 0 }
    }
}

/// One bias-corrected Adam update of a scalar; returns the new value.
#[inline]
pub(crate) fn adam_update(theta: f64, g: f64, m: &mut f64, v: &mut f64, lr: f64, t: u64, cfg: &OptimizerConfig) -> f64 {
    *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
    *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
    let m_hat = *m / (1.0 - cfg.beta1.powf(t as f64));
    let v_hat = *v / (1.0 - cfg.beta2.powf(t as f64));
    theta - lr * m_hat / (v_hat.sqrt() + cfg.eps)
}

/// Applies one Adam step to every SH coefficient of `scene`. A non-finite
/// gradient rejects the step and leaves both scene and state untouched.
pub fn adam_step(scene: &mut Scene, grads: &ShGradients, state: &mut AdamState, cfg: &OptimizerConfig) -> Result<()> {
    let n = scene.len();
    if grads.coeffs.len() != n || state.m.len() != n || state.v.len() != n {
        return Err(Error::Contract(format!(
            "scene has {n} gaussians, gradients {} and state {}",
            grads.coeffs.len(),
            state.m.len()
        )));
    }
    if let Some(bad) = grads.coeffs.iter().position(|g| g.iter().flatten().any(|v| !v.is_finite())) {
        return Err(Error::Optimizer(format!("non-finite gradient for gaussian {bad}; step rejected")));
    }
    state.t += 1;
    let t = state.t;
    for (i, g) in scene.gaussians.iter_mut().enumerate() {
        for k in 0..SH_COEFFS {
            let lr = if k == 0 { cfg.lr_dc } else { cfg.lr_rest };
            for ch in 0..3 {
                let theta = g.sh[k][ch] as f64;
                let next = adam_update(theta, grads.coeffs[i][k][ch], &mut state.m[i][k][ch], &mut state.v[i][k][ch], lr, t, cfg);
                g.sh[k][ch] = next as f32;
            }
        }
    }
    Ok(())
}
