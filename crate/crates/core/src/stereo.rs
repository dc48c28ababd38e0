//! Depth from rendered stereo pairs.
//!
//! A second camera is rendered at a small offset along the view's x (or y)
//! axis, disparities are found by ZNCC block matching with a left-right
//! consistency check, and converted with `depth = f * baseline / disparity`.
//! Running the horizontal and vertical passes and keeping the pointwise
//! minimum gives the "Stereo-HV" map.

use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::image::{encode_pfm, DepthMap, Image, RenderedImage};
use crate::render::{depth_from_gaussians, render, RenderConfig, DEFAULT_DEPTH_TAU};
use crate::scene::{Camera, Scene};

/// Marker for pixels without a trustworthy match.
pub const INVALID_DISPARITY: f64 = -1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StereoDirection {
    Horizontal,
    Vertical,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StereoPair {
    pub left: RenderedImage,
    pub right: RenderedImage,
    pub baseline: f64,
    pub direction: StereoDirection,
    /// Focal length along the baseline direction, in pixels.
    pub focal: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MatchConfig {
    /// Half window size; the window is `(2w + 1)^2`.
    pub window: usize,
    pub max_disparity: usize,
    /// Windows with a smaller intensity variance are not matched.
    pub variance_floor: f64,
    pub lr_tolerance: f64,
    /// Disparities at or below this convert to infinite depth.
    pub min_disparity: f64,
}

impl Default for MatchConfig {
    fn default() -> Self {
        Self { window: 5, max_disparity: 64, variance_floor: 1e-6, lr_tolerance: 1.0, min_disparity: 1e-3 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DisparityMap {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl DisparityMap {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn is_valid(&self, x: usize, y: usize) -> bool {
        self.get(x, y) >= 0.0
    }

    pub fn valid_count(&self) -> usize {
        self.data.iter().filter(|&&d| d >= 0.0).count()
    }

    pub fn to_pfm(&self) -> Vec<u8> {
        let samples: Vec<f32> = self.data.iter().map(|&d| d as f32).collect();
        encode_pfm(self.width, self.height, 1, &samples)
    }
}

/// Renders `camera` and a copy shifted by `beta` along its own +x
/// (horizontal) or +y (vertical) axis.
pub fn render_stereo_pair(
    scene: &Scene,
    camera: &Camera,
    beta: f64,
    direction: StereoDirection,
    config: &RenderConfig,
) -> Result<StereoPair> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::Contract(format!("stereo baseline must be positive, got {beta}")));
    }
    let (offset, focal) = match direction {
        StereoDirection::Horizontal => (Vector3::new(beta, 0.0, 0.0), camera.intrinsics.fx),
        StereoDirection::Vertical => (Vector3::new(0.0, beta, 0.0), camera.intrinsics.fy),
    };
    let right_cam = Camera::new(camera.intrinsics, camera.pose.shifted_in_view(offset));
    Ok(StereoPair {
        left: render(scene, camera, config),
        right: render(scene, &right_cam, config),
        baseline: beta,
        direction,
        focal,
    })
}

#[derive(Clone)]
struct Plane {
    w: usize,
    h: usize,
    data: Vec<f64>,
}

impl Plane {
    fn gray(img: &Image) -> Self {
        let data = img.data().chunks_exact(3).map(|p| 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2]).collect();
        Self { w: img.width(), h: img.height(), data }
    }

    fn transpose(&self) -> Self {
        let mut data = vec![0.0; self.data.len()];
        for y in 0..self.h {
            for x in 0..self.w {
                data[x * self.h + y] = self.data[y * self.w + x];
            }
        }
        Self { w: self.h, h: self.w, data }
    }

    fn flip_x(&self) -> Self {
        let mut data = self.data.clone();
        for row in data.chunks_exact_mut(self.w) {
            row.reverse();
        }
        Self { w: self.w, h: self.h, data }
    }
}

/// Summed-area table with a zero border row and column.
struct Integral {
    w: usize,
    sums: Vec<f64>,
}

impl Integral {
    fn new(w: usize, h: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let stride = w + 1;
        let mut sums = vec![0.0; stride * (h + 1)];
        for y in 0..h {
            let mut row = 0.0;
            for x in 0..w {
                row += f(x, y);
                sums[(y + 1) * stride + x + 1] = sums[y * stride + x + 1] + row;
            }
        }
        Self { w, sums }
    }

    /// Sum over the inclusive rectangle `[x0, x1] x [y0, y1]`.
    #[inline]
    fn rect(&self, x0: usize, y0: usize, x1: usize, y1: usize) -> f64 {
        let s = self.w + 1;
        self.sums[(y1 + 1) * s + x1 + 1] - self.sums[y0 * s + x1 + 1] - self.sums[(y1 + 1) * s + x0] + self.sums[y0 * s + x0]
    }
}

/// ZNCC score volume: `scores[d][y * w + x]` compares left `(x, y)` with
/// right `(x - d, y)`; `NaN` where undefined.
fn score_volume(left: &Plane, right: &Plane, cfg: &MatchConfig) -> Vec<Vec<f64>> {
    let (w, h, r) = (left.w, left.h, cfg.window);
    let min_count = ((r + 1) * (r + 1)) as f64;
    let il = Integral::new(w, h, |x, y| left.data[y * w + x]);
    let ill = Integral::new(w, h, |x, y| left.data[y * w + x].powi(2));
    (0..=cfg.max_disparity)
        .map(|d| {
            let mut out = vec![f64::NAN; w * h];
            if d >= w {
                return out;
            }
            // terms over left columns x >= d, paired with right column x - d
            let ir = Integral::new(w, h, |x, y| if x >= d { right.data[y * w + x - d] } else { 0.0 });
            let irr = Integral::new(w, h, |x, y| if x >= d { right.data[y * w + x - d].powi(2) } else { 0.0 });
            let ilr = Integral::new(w, h, |x, y| if x >= d { left.data[y * w + x] * right.data[y * w + x - d] } else { 0.0 });
            for y in 0..h {
                let (y0, y1) = (y.saturating_sub(r), (y + r).min(h - 1));
                for x in d..w {
                    let (x0, x1) = (x.saturating_sub(r).max(d), (x + r).min(w - 1));
                    let n = ((x1 - x0 + 1) * (y1 - y0 + 1)) as f64;
                    if n < min_count {
                        continue;
                    }
                    let sl = il.rect(x0, y0, x1, y1);
                    let sr = ir.rect(x0, y0, x1, y1);
                    let var_l = (ill.rect(x0, y0, x1, y1) - sl * sl / n) / n;
                    let var_r = (irr.rect(x0, y0, x1, y1) - sr * sr / n) / n;
                    if var_l < cfg.variance_floor || var_r < cfg.variance_floor {
                        continue;
                    }
                    let cov = (ilr.rect(x0, y0, x1, y1) - sl * sr / n) / n;
                    out[y * w + x] = cov / (var_l * var_r).sqrt();
                }
            }
            out
        })
        .collect()
}

/// Winner-take-all with parabolic refinement; `INVALID_DISPARITY` where no
/// disparity has a defined score.
fn best_disparities(volume: &[Vec<f64>], n: usize) -> Vec<f64> {
    let max_d = volume.len() - 1;
    (0..n)
        .map(|p| {
            let mut best: Option<(usize, f64)> = None;
            for (d, scores) in volume.iter().enumerate() {
                let s = scores[p];
                if s.is_nan() {
                    continue;
                }
                if best.is_none_or(|(_, b)| s > b) {
                    best = Some((d, s));
                }
            }
            let Some((d, s)) = best else { return INVALID_DISPARITY };
            if d == 0 || d == max_d {
                return d as f64;
            }
            let (a, c) = (volume[d - 1][p], volume[d + 1][p]);
            if a.is_nan() || c.is_nan() {
                return d as f64;
            }
            let curvature = a - 2.0 * s + c;
            if curvature >= 0.0 {
                return d as f64;
            }
            d as f64 + (0.5 * (a - c) / curvature).clamp(-0.5, 0.5)
        })
        .collect()
}

fn match_planes(left: &Plane, right: &Plane, cfg: &MatchConfig) -> Vec<f64> {
    let n = left.w * left.h;
    let dl = best_disparities(&score_volume(left, right, cfg), n);
    // right-to-left disparities via mirrored images
    let dr_flipped = best_disparities(&score_volume(&right.flip_x(), &left.flip_x(), cfg), n);
    let w = left.w;
    let dr = |x: usize, y: usize| dr_flipped[y * w + (w - 1 - x)];
    let mut out = dl;
    for y in 0..left.h {
        for x in 0..w {
            let d = out[y * w + x];
            if d < 0.0 {
                continue;
            }
            let xr = (x as f64 - d).round();
            let consistent = xr >= 0.0 && {
                let back = dr(xr as usize, y);
                back >= 0.0 && (back - d).abs() <= cfg.lr_tolerance
            };
            if !consistent {
                out[y * w + x] = INVALID_DISPARITY;
            }
        }
    }
    out
}

/// Dense disparity of `pair.left` against `pair.right`.
pub fn match_disparity(pair: &StereoPair, cfg: &MatchConfig) -> Result<DisparityMap> {
    if !pair.left.same_shape(&pair.right) {
        return Err(Error::Contract("stereo images differ in size".into()));
    }
    let (w, h) = (pair.left.width(), pair.left.height());
    let extent = match pair.direction {
        StereoDirection::Horizontal => w,
        StereoDirection::Vertical => h,
    };
    if cfg.max_disparity >= extent {
        return Err(Error::Contract(format!(
            "max disparity {} must be below the image extent {extent}",
            cfg.max_disparity
        )));
    }
    let (l, r) = (Plane::gray(&pair.left), Plane::gray(&pair.right));
    let data = match pair.direction {
        StereoDirection::Horizontal => match_planes(&l, &r, cfg),
        StereoDirection::Vertical => {
            let t = Plane { w: h, h: w, data: match_planes(&l.transpose(), &r.transpose(), cfg) };
            t.transpose().data
        }
    };
    Ok(DisparityMap { width: w, height: h, data })
}

/// `focal * beta / s`; invalid or near-zero disparities become `+inf`.
pub fn disparity_to_depth(disparity: &DisparityMap, focal: f64, beta: f64, min_disparity: f64) -> DepthMap {
    let data = disparity
        .data
        .iter()
        .map(|&s| if s > min_disparity { focal * beta / s } else { f64::INFINITY })
        .collect();
    DepthMap::from_vec(disparity.width, disparity.height, data).expect("same size")
}

/// Pointwise minimum of two depth maps.
pub fn aggregate_hv(h: &DepthMap, v: &DepthMap) -> Result<DepthMap> {
    if h.width() != v.width() || h.height() != v.height() {
        return Err(Error::Contract(format!(
            "depth maps differ in size: {}x{} vs {}x{}",
            h.width(),
            h.height(),
            v.width(),
            v.height()
        )));
    }
    let data = h.data().iter().zip(v.data()).map(|(a, b)| a.min(*b)).collect();
    DepthMap::from_vec(h.width(), h.height(), data)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum DepthMethod {
    Gaussians,
    #[default]
    StereoHv,
}

impl FromStr for DepthMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussians" => Ok(Self::Gaussians),
            "stereo-hv" => Ok(Self::StereoHv),
            other => Err(Error::Config(format!("unknown depth method '{other}' (expected gaussians or stereo-hv)"))),
        }
    }
}

impl fmt::Display for DepthMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Gaussians => "gaussians",
            Self::StereoHv => "stereo-hv",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DepthConfig {
    pub method: DepthMethod,
    /// Transmittance threshold for the gaussians heuristic.
    pub tau: f64,
    /// Stereo baseline; `None` picks [`default_baseline`].
    pub baseline: Option<f64>,
    pub matching: MatchConfig,
    pub render: RenderConfig,
}

impl Default for DepthConfig {
    fn default() -> Self {
        Self {
            method: DepthMethod::default(),
            tau: DEFAULT_DEPTH_TAU,
            baseline: None,
            matching: MatchConfig::default(),
            render: RenderConfig::default(),
        }
    }
}

/// 2% of the bounding-sphere radius of the gaussian centers.
pub fn default_baseline(scene: &Scene) -> f64 {
    let (_, radius) = scene.bounding_sphere();
    if radius > 0.0 && radius.is_finite() {
        0.02 * radius
    } else {
        0.01
    }
}

/// Horizontal and vertical stereo, aggregated, without hole filling.
pub fn stereo_hv_depth(scene: &Scene, camera: &Camera, cfg: &DepthConfig) -> Result<DepthMap> {
    let beta = cfg.baseline.unwrap_or_else(|| default_baseline(scene));
    let mut maps = Vec::with_capacity(2);
    for (direction, extent) in [
        (StereoDirection::Horizontal, camera.width()),
        (StereoDirection::Vertical, camera.height()),
    ] {
        let mut matching = cfg.matching.clone();
        matching.max_disparity = matching.max_disparity.min(extent.saturating_sub(1));
        let pair = render_stereo_pair(scene, camera, beta, direction, &cfg.render)?;
        let disparity = match_disparity(&pair, &matching)?;
        maps.push(disparity_to_depth(&disparity, pair.focal, beta, matching.min_disparity));
    }
    aggregate_hv(&maps[0], &maps[1])
}

/// Depth map by the configured method. Stereo holes fall back to the
/// gaussians heuristic.
pub fn estimate_depth(scene: &Scene, camera: &Camera, cfg: &DepthConfig) -> Result<DepthMap> {
    let rough = depth_from_gaussians(scene, camera, cfg.tau, &cfg.render);
    match cfg.method {
        DepthMethod::Gaussians => Ok(rough),
        DepthMethod::StereoHv => {
            let mut depth = stereo_hv_depth(scene, camera, cfg)?;
            for (d, r) in depth.data_mut().iter_mut().zip(rough.data()) {
                if !d.is_finite() {
                    *d = *r;
                }
            }
            Ok(depth)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::synthetic::{generate_synthetic_scene, Recipe};
    use crate::scene::{CameraIntrinsics, CameraPose};
    use nalgebra::Matrix3;
    use rand::{Rng, SeedableRng};

    fn texture(w: usize, h: usize, seed: u64) -> Image {
        // box-blurred noise: textured but smooth enough for sub-pixel peaks
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let noise: Vec<f64> = (0..w * h).map(|_| rng.random()).collect();
        let mut data = Vec::with_capacity(w * h * 3);
        for y in 0..h {
            for x in 0..w {
                let mut acc = 0.0;
                let mut n = 0.0;
                for dy in 0..2 {
                    for dx in 0..2 {
                        let (qx, qy) = ((x + dx) % w, (y + dy) % h);
                        acc += noise[qy * w + qx];
                        n += 1.0;
                    }
                }
                let v = acc / n;
                data.extend([v, v, v]);
            }
        }
        Image::from_vec(w, h, data).unwrap()
    }

    /// `right(x) = left(x + k)` with wraparound.
    fn shifted(img: &Image, k: usize, vertical: bool) -> Image {
        let (w, h) = (img.width(), img.height());
        let mut out = Image::new(w, h);
        for y in 0..h {
            for x in 0..w {
                let p = if vertical { img.pixel(x, (y + k) % h) } else { img.pixel((x + k) % w, y) };
                out.set_pixel(x, y, p);
            }
        }
        out
    }

    fn pair(left: Image, right: Image, direction: StereoDirection) -> StereoPair {
        StereoPair { left, right, baseline: 1.0, direction, focal: 1.0 }
    }

    fn interior_hits(d: &DisparityMap, k: f64, margin: usize) -> f64 {
        let mut hit = 0;
        let mut total = 0;
        for y in margin..d.height() - margin {
            for x in margin..d.width() - margin {
                total += 1;
                if (d.get(x, y) - k).abs() <= 0.5 {
                    hit += 1;
                }
            }
        }
        hit as f64 / total as f64
    }

    #[test]
    fn identical_images_have_zero_disparity() {
        let img = texture(40, 30, 1);
        let cfg = MatchConfig { max_disparity: 16, ..Default::default() };
        let d = match_disparity(&pair(img.clone(), img, StereoDirection::Horizontal), &cfg).unwrap();
        assert!(interior_hits(&d, 0.0, 5) >= 0.99);
    }

    #[test]
    fn recovers_integer_shifts() {
        let img = texture(64, 48, 2);
        let cfg = MatchConfig { max_disparity: 16, ..Default::default() };
        for k in 1..=8 {
            let d = match_disparity(&pair(img.clone(), shifted(&img, k, false), StereoDirection::Horizontal), &cfg).unwrap();
            // skip the wrap seam on the right and the unmatched band on the left
            let frac = interior_hits(&d, k as f64, 16);
            assert!(frac >= 0.95, "shift {k}: {frac}");
        }
    }

    #[test]
    fn vertical_pass_recovers_shift() {
        let img = texture(48, 64, 3);
        let cfg = MatchConfig { max_disparity: 12, ..Default::default() };
        let d = match_disparity(&pair(img.clone(), shifted(&img, 4, true), StereoDirection::Vertical), &cfg).unwrap();
        assert!(interior_hits(&d, 4.0, 12) >= 0.95);
    }

    #[test]
    fn textureless_is_invalid() {
        let flat = Image::filled(32, 32, [0.4; 3]);
        let d = match_disparity(&pair(flat.clone(), flat, StereoDirection::Horizontal), &MatchConfig { max_disparity: 8, ..Default::default() }).unwrap();
        assert_eq!(d.valid_count(), 0);
        assert!(d.data().iter().all(|&v| v == INVALID_DISPARITY));
    }

    #[test]
    fn disparity_range_must_fit() {
        let img = Image::new(16, 16);
        let p = pair(img.clone(), img, StereoDirection::Horizontal);
        assert!(matches!(match_disparity(&p, &MatchConfig::default()), Err(Error::Contract(_))));
    }

    #[test]
    fn depth_conversion() {
        let d = DisparityMap { width: 3, height: 1, data: vec![2.0, INVALID_DISPARITY, 0.0005] };
        let depth = disparity_to_depth(&d, 100.0, 0.1, 1e-3);
        assert!((depth.data()[0] - 5.0).abs() < 1e-12);
        assert_eq!(depth.data()[1], f64::INFINITY);
        assert_eq!(depth.data()[2], f64::INFINITY);
    }

    #[test]
    fn aggregate_is_pointwise_min() {
        let h = DepthMap::from_vec(3, 1, vec![3.0, 1.0, 4.0]).unwrap();
        let v = DepthMap::from_vec(3, 1, vec![2.5, f64::INFINITY, 4.0]).unwrap();
        assert_eq!(aggregate_hv(&h, &v).unwrap().data(), &[2.5, 1.0, 4.0]);
        assert!(aggregate_hv(&h, &DepthMap::new(2, 1)).is_err());
    }

    #[test]
    fn pair_cameras_and_convergence() {
        let (scene, views) = generate_synthetic_scene(3, &Recipe::named("two-blobs").unwrap().with_resolution(32, 32)).unwrap();
        let cam = views[0].camera();
        let cfg = RenderConfig::default();
        let diff = |beta| {
            let p = render_stereo_pair(&scene, &cam, beta, StereoDirection::Horizontal, &cfg).unwrap();
            p.left.data().iter().zip(p.right.data()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        };
        assert!(diff(0.01) < diff(0.1));
        assert!(render_stereo_pair(&scene, &cam, 0.0, StereoDirection::Vertical, &cfg).is_err());
        let shifted = cam.pose.shifted_in_view(Vector3::new(0.0, 0.1, 0.0));
        let delta = cam.pose.rotation * (shifted.center() - cam.pose.center());
        assert!((delta - Vector3::new(0.0, 0.1, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn plane_depth_recovery() {
        let recipe = Recipe::named("plane").unwrap();
        let (scene, _) = generate_synthetic_scene(7, &recipe).unwrap();
        let z0 = 1.6;
        let rotation = Matrix3::new(1.0, 0.0, 0.0, 0.0, -1.0, 0.0, 0.0, 0.0, -1.0);
        let pose = CameraPose { rotation, translation: Vector3::new(0.0, 0.0, z0) };
        let cam = Camera::new(CameraIntrinsics::from_fov(64, 64, recipe.fov_x), pose);
        let cfg = DepthConfig { baseline: Some(10.0 * z0 / cam.intrinsics.fx), ..Default::default() };
        let depth = stereo_hv_depth(&scene, &cam, &cfg).unwrap();
        let mut errors: Vec<f64> = depth.data().iter().filter(|d| d.is_finite()).map(|d| (d - z0).abs() / z0).collect();
        assert!(errors.len() as f64 >= 0.9 * (64 * 64) as f64, "{} finite", errors.len());
        errors.sort_by(f64::total_cmp);
        let median = errors[errors.len() / 2];
        assert!(median <= 0.02, "median relative error {median}");
        let full = estimate_depth(&scene, &cam, &cfg).unwrap();
        assert_eq!(full.finite_count(), 64 * 64);
    }

    #[test]
    fn method_names() {
        assert_eq!("gaussians".parse::<DepthMethod>().unwrap(), DepthMethod::Gaussians);
        assert_eq!(DepthMethod::StereoHv.to_string(), "stereo-hv");
        assert!("mono".parse::<DepthMethod>().is_err());
    }
}
