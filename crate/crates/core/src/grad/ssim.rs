//! Windowed SSIM and its analytic gradient with respect to the prediction.
//!
//! 11x11 gaussian window (sigma 1.5), `C1 = 0.01^2`, `C2 = 0.03^2`. At the
//! borders the truncated window is renormalized, so constant images score 1
//! regardless of size. Channels are processed as separate planes.

use crate::error::{Error, Result};
use crate::image::{to_chw, Image};

pub const WINDOW_RADIUS: usize = 5;
pub const WINDOW_SIGMA: f64 = 1.5;
pub const C1: f64 = 0.01 * 0.01;
pub const C2: f64 = 0.03 * 0.03;

pub fn window_1d() -> [f64; 2 * WINDOW_RADIUS + 1] {
    let mut g = [0.0; 2 * WINDOW_RADIUS + 1];
    for (i, v) in g.iter_mut().enumerate() {
        let d = i as f64 - WINDOW_RADIUS as f64;
        *v = (-d * d / (2.0 * WINDOW_SIGMA * WINDOW_SIGMA)).exp();
    }
    let sum: f64 = g.iter().sum();
    g.map(|v| v / sum)
}

/// Zero-padded separable correlation of one plane with the window.
struct Blur {
    w: usize,
    h: usize,
    g: [f64; 2 * WINDOW_RADIUS + 1],
    scratch: Vec<f64>,
}

impl Blur {
    fn new(w: usize, h: usize) -> Self {
        Self { w, h, g: window_1d(), scratch: vec![0.0; w * h] }
    }

    fn apply(&mut self, src: &[f64], dst: &mut [f64]) {
        let (w, h, r) = (self.w, self.h, WINDOW_RADIUS as isize);
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for (i, gv) in self.g.iter().enumerate() {
                    let qx = x as isize + i as isize - r;
                    if qx >= 0 && (qx as usize) < w {
                        acc += gv * src[y * w + qx as usize];
                    }
                }
                self.scratch[y * w + x] = acc;
            }
        }
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                for (i, gv) in self.g.iter().enumerate() {
                    let qy = y as isize + i as isize - r;
                    if qy >= 0 && (qy as usize) < h {
                        acc += gv * self.scratch[qy as usize * w + x];
                    }
                }
                dst[y * w + x] = acc;
            }
        }
    }

    fn of(&mut self, src: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; src.len()];
        self.apply(src, &mut out);
        out
    }
}

fn check_shapes(pred: &Image, target: &Image) -> Result<()> {
    if !pred.same_shape(target) {
        return Err(Error::Contract(format!(
            "image shapes differ: {}x{} vs {}x{}",
            pred.width(),
            pred.height(),
            target.width(),
            target.height()
        )));
    }
    let min = 2 * WINDOW_RADIUS + 1;
    if pred.width() < min || pred.height() < min {
        return Err(Error::Contract(format!(
            "SSIM needs at least {min}x{min} pixels, got {}x{}",
            pred.width(),
            pred.height()
        )));
    }
    Ok(())
}

/// Per-pixel statistics of one plane pair.
struct PlaneTerms {
    ssim_sum: f64,
    /// Gradient of the summed SSIM map with respect to the prediction.
    grad: Option<Vec<f64>>,
}

fn plane(pred: &[f64], target: &[f64], blur: &mut Blur, norm: &[f64], want_grad: bool) -> PlaneTerms {
    let n = pred.len();
    let prod = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(u, v)| u * v).collect::<Vec<_>>();
    let mean = |blurred: Vec<f64>| blurred.iter().zip(norm).map(|(v, z)| v / z).collect::<Vec<_>>();
    let mu_y = mean(blur.of(pred));
    let mu_x = mean(blur.of(target));
    let e_yy = mean(blur.of(&prod(pred, pred)));
    let e_xx = mean(blur.of(&prod(target, target)));
    let e_xy = mean(blur.of(&prod(pred, target)));

    let mut ssim_sum = 0.0;
    let (mut k0, mut ku, mut kv) = if want_grad {
        (vec![0.0; n], vec![0.0; n], vec![0.0; n])
    } else {
        (Vec::new(), Vec::new(), Vec::new())
    };
    for p in 0..n {
        let (my, mx) = (mu_y[p], mu_x[p]);
        let s_yy = e_yy[p] - my * my;
        let s_xx = e_xx[p] - mx * mx;
        let s_xy = e_xy[p] - mx * my;
        let a = 2.0 * (mx * my) + C1;
        let b = 2.0 * s_xy + C2;
        let c = (mx * mx + my * my) + C1;
        let d = (s_xx + s_yy) + C2;
        let ac = a / c;
        let s = ac * (b / d);
        ssim_sum += s;
        if want_grad {
            // Written so every term cancels exactly when pred == target.
            let d_mu = 2.0 / c * (mx * (b / d) - my * s);
            let u = 2.0 / d * ac;
            let v = 2.0 / d * s;
            k0[p] = (d_mu + (v * my - u * mx)) / norm[p];
            ku[p] = u / norm[p];
            kv[p] = v / norm[p];
        }
    }
    let grad = want_grad.then(|| {
        let c0 = blur.of(&k0);
        let cu = blur.of(&ku);
        let cv = blur.of(&kv);
        (0..n).map(|q| c0[q] + (target[q] * cu[q] - pred[q] * cv[q])).collect()
    });
    PlaneTerms { ssim_sum, grad }
}

fn run(pred: &Image, target: &Image, want_grad: bool) -> Result<(f64, Option<Vec<f64>>)> {
    check_shapes(pred, target)?;
    let (w, h) = (pred.width(), pred.height());
    let n = w * h;
    let mut blur = Blur::new(w, h);
    let norm = blur.of(&vec![1.0; n]);
    let py = to_chw(pred);
    let px = to_chw(target);
    let total = (n * 3) as f64;
    let mut sum = 0.0;
    let mut grad = want_grad.then(|| vec![0.0; n * 3]);
    for ch in 0..3 {
        let terms = plane(&py[ch * n..(ch + 1) * n], &px[ch * n..(ch + 1) * n], &mut blur, &norm, want_grad);
        sum += terms.ssim_sum;
        if let (Some(out), Some(g)) = (grad.as_mut(), terms.grad) {
            for (i, v) in g.into_iter().enumerate() {
                out[i * 3 + ch] = v / total;
            }
        }
    }
    Ok((sum / total, grad))
}

/// Mean SSIM over all pixels and channels.
pub fn ssim(pred: &Image, target: &Image) -> Result<f64> {
    Ok(run(pred, target, false)?.0)
}

/// Mean SSIM and its gradient with respect to `pred`, HWC ordered.
pub fn ssim_with_grad(pred: &Image, target: &Image) -> Result<(f64, Vec<f64>)> {
    let (value, grad) = run(pred, target, true)?;
    Ok((value, grad.expect("gradient requested")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    /// Direct evaluation: explicit truncated window per pixel.
    fn ssim_oracle(pred: &Image, target: &Image) -> f64 {
        let (w, h) = (pred.width() as isize, pred.height() as isize);
        let r = WINDOW_RADIUS as isize;
        let mut total = 0.0;
        for ch in 0..3 {
            for y in 0..h {
                for x in 0..w {
                    let (mut z, mut sy, mut sx, mut syy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
                    for dy in -r..=r {
                        for dx in -r..=r {
                            let (qx, qy) = (x + dx, y + dy);
                            if qx < 0 || qy < 0 || qx >= w || qy >= h {
                                continue;
                            }
                            let wgt = (-((dx * dx + dy * dy) as f64) / (2.0 * 1.5 * 1.5)).exp();
                            let a = pred.pixel(qx as usize, qy as usize)[ch];
                            let b = target.pixel(qx as usize, qy as usize)[ch];
                            z += wgt;
                            sy += wgt * a;
                            sx += wgt * b;
                            syy += wgt * a * a;
                            sxx += wgt * b * b;
                            sxy += wgt * a * b;
                        }
                    }
                    let (my, mx) = (sy / z, sx / z);
                    let vy = syy / z - my * my;
                    let vx = sxx / z - mx * mx;
                    let cxy = sxy / z - mx * my;
                    total += (2.0 * mx * my + 0.0001) * (2.0 * cxy + 0.0009)
                        / ((mx * mx + my * my + 0.0001) * (vx + vy + 0.0009));
                }
            }
        }
        total / (3 * w * h) as f64
    }

    fn random_image(rng: &mut impl Rng, w: usize, h: usize) -> Image {
        Image::from_vec(w, h, (0..w * h * 3).map(|_| rng.random()).collect()).unwrap()
    }

    #[test]
    fn identical_images_score_one() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let img = random_image(&mut rng, 16, 13);
        assert!((ssim(&img, &img).unwrap() - 1.0).abs() < 1e-12);
        let flat = Image::filled(12, 11, [0.5; 3]);
        assert_eq!(ssim(&flat, &flat).unwrap(), 1.0);
    }

    #[test]
    fn matches_direct_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let a = random_image(&mut rng, 32, 32);
        let b = random_image(&mut rng, 32, 32);
        let fast = ssim(&a, &b).unwrap();
        let slow = ssim_oracle(&a, &b);
        assert!((fast - slow).abs() < 1e-6, "{fast} vs {slow}");
    }

    #[test]
    fn gradient_is_exactly_zero_at_identity() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let img = random_image(&mut rng, 14, 12);
        let (_, g) = ssim_with_grad(&img, &img).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let a = random_image(&mut rng, 13, 12);
        let b = random_image(&mut rng, 13, 12);
        let (_, g) = ssim_with_grad(&a, &b).unwrap();
        let h = 1e-5;
        for i in (0..a.data().len()).step_by(7) {
            let mut plus = a.clone();
            plus.data_mut()[i] += h;
            let mut minus = a.clone();
            minus.data_mut()[i] -= h;
            let fd = (ssim_oracle(&plus, &b) - ssim_oracle(&minus, &b)) / (2.0 * h);
            assert!((fd - g[i]).abs() <= 1e-6 * fd.abs().max(1e-3), "{i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn too_small_is_contract_violation() {
        let a = Image::new(10, 20);
        assert!(matches!(ssim(&a, &a), Err(Error::Contract(_))));
        let b = Image::new(20, 20);
        assert!(matches!(ssim(&b, &Image::new(20, 21)), Err(Error::Contract(_))));
    }
}
