//! Photometric loss (L1 + D-SSIM) and its gradient with respect to the SH
//! color coefficients.

pub mod backward;
pub mod loss;
pub mod ssim;

pub use backward::{backward_sh, backward_sh_with_state, ShGradients};
pub use loss::{l1_loss, loss_and_grad, loss_grad_wrt_image, masked_l1, photometric_loss, GradientImage, LossBreakdown, DEFAULT_LAMBDA};
pub use ssim::{ssim, ssim_with_grad};
