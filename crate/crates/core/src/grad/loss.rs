use super::ssim::{ssim, ssim_with_grad};
use crate::error::{Error, Result};
use crate::image::Image;

/// Weight of the `1 - SSIM` term in the photometric loss.
pub const DEFAULT_LAMBDA: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossBreakdown {
    pub l1: f64,
    pub ssim: f64,
    pub total: f64,
}

impl LossBreakdown {
    fn new(l1: f64, ssim: f64, lambda: f64) -> Self {
        Self { l1, ssim, total: (1.0 - lambda) * l1 + lambda * (1.0 - ssim) }
    }
}

/// Dense per-pixel loss gradient, HWC ordered like [`Image`].
#[derive(Clone, Debug, PartialEq)]
pub struct GradientImage {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl GradientImage {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self { width, height, data: vec![0.0; width * height * 3] }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

fn check(pred: &Image, target: &Image) -> Result<()> {
    if pred.same_shape(target) {
        Ok(())
    } else {
        Err(Error::Contract(format!(
            "prediction is {}x{} but target is {}x{}",
            pred.width(),
            pred.height(),
            target.width(),
            target.height()
        )))
    }
}

/// Mean absolute error over all pixels and channels.
pub fn l1_loss(pred: &Image, target: &Image) -> Result<f64> {
    check(pred, target)?;
    let n = pred.data().len().max(1) as f64;
    Ok(pred.data().iter().zip(target.data()).map(|(a, b)| (a - b).abs()).sum::<f64>() / n)
}

/// L1 restricted to pixels where `mask` is set (row-major, one flag per pixel).
pub fn masked_l1(pred: &Image, target: &Image, mask: &[bool]) -> Result<f64> {
    check(pred, target)?;
    if mask.len() != pred.width() * pred.height() {
        return Err(Error::Contract(format!("mask has {} entries, image has {} pixels", mask.len(), pred.width() * pred.height())));
    }
    let (mut sum, mut count) = (0.0, 0usize);
    for (p, _) in mask.iter().enumerate().filter(|(_, m)| **m) {
        for ch in 0..3 {
            sum += (pred.data()[p * 3 + ch] - target.data()[p * 3 + ch]).abs();
        }
        count += 3;
    }
    Ok(if count == 0 { 0.0 } else { sum / count as f64 })
}

pub fn photometric_loss(pred: &Image, target: &Image, lambda: f64) -> Result<LossBreakdown> {
    let l1 = l1_loss(pred, target)?;
    Ok(LossBreakdown::new(l1, ssim(pred, target)?, lambda))
}

/// Loss value and its gradient with respect to `pred`.
///
/// The L1 subgradient at an exact match is 0, and the SSIM gradient is exactly
/// zero when the images agree, so a perfect reconstruction yields an all-zero
/// gradient.
pub fn loss_and_grad(pred: &Image, target: &Image, lambda: f64) -> Result<(LossBreakdown, GradientImage)> {
    let l1 = l1_loss(pred, target)?;
    let (s, ds) = ssim_with_grad(pred, target)?;
    let n = pred.data().len() as f64;
    let w = (1.0 - lambda) / n;
    let data = pred
        .data()
        .iter()
        .zip(target.data())
        .zip(&ds)
        .map(|((a, b), d)| {
            let sign = if a > b {
                1.0
            } else if a < b {
                -1.0
            } else {
                0.0
            };
            w * sign - lambda * d
        })
        .collect();
    let grad = GradientImage { width: pred.width(), height: pred.height(), data };
    Ok((LossBreakdown::new(l1, s, lambda), grad))
}

pub fn loss_grad_wrt_image(pred: &Image, target: &Image, lambda: f64) -> Result<GradientImage> {
    Ok(loss_and_grad(pred, target, lambda)?.1)
}
