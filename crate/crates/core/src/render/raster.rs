use rayon::prelude::*;

use super::project::{project_gaussian, ProjectedGaussian};
use super::RenderConfig;
use crate::image::{Image, RenderedImage};
use crate::scene::{Camera, Scene};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PixelLayout {
    /// Interleaved per pixel.
    Hwc,
    /// One plane per channel.
    Chw,
}

/// Projected gaussians in ascending depth plus per-tile lists of the
/// gaussians whose alpha can reach the skip threshold inside the tile.
#[derive(Clone, Debug)]
pub struct Frame {
    pub width: usize,
    pub height: usize,
    /// Sorted by view depth, ties by scene index.
    pub projected: Vec<ProjectedGaussian>,
    tile_size: usize,
    tiles_x: usize,
    tiles: Vec<Vec<u32>>,
}

impl Frame {
    pub fn prepare(scene: &Scene, camera: &Camera, config: &RenderConfig) -> Self {
        let (width, height) = (camera.width(), camera.height());
        let mut projected: Vec<ProjectedGaussian> = scene
            .gaussians
            .iter()
            .enumerate()
            .filter_map(|(i, g)| project_gaussian(g, i, scene.sh_degree, camera, config))
            .collect();
        // stable: equal depths keep scene order
        projected.sort_by(|a, b| a.depth.total_cmp(&b.depth));

        let tile_size = config.tile_size.max(1);
        let tiles_x = width.div_ceil(tile_size);
        let tiles_y = height.div_ceil(tile_size);
        let mut tiles = vec![Vec::new(); tiles_x * tiles_y];
        for (slot, p) in projected.iter().enumerate() {
            let Some((x0, x1, y0, y1)) = support_rect(p, config, width, height) else {
                continue;
            };
            for ty in y0 / tile_size..=y1 / tile_size {
                for tx in x0 / tile_size..=x1 / tile_size {
                    tiles[ty * tiles_x + tx].push(slot as u32);
                }
            }
        }
        Self { width, height, projected, tile_size, tiles_x, tiles }
    }

    #[inline]
    fn tile_list(&self, x: usize, y: usize) -> &[u32] {
        &self.tiles[(y / self.tile_size) * self.tiles_x + x / self.tile_size]
    }

    /// Front-to-back blending at pixel `(x, y)`. Calls `visit(slot, alpha * T)`
    /// for every blended gaussian and returns the color before background
    /// compositing and the final transmittance.
    #[inline]
    pub fn shade(&self, x: usize, y: usize, config: &RenderConfig, mut visit: impl FnMut(usize, f64)) -> ([f64; 3], f64) {
        let (px, py) = (x as f64, y as f64);
        let mut t = 1.0;
        let mut c = [0.0; 3];
        for &slot in self.tile_list(x, y) {
            let g = &self.projected[slot as usize];
            let power = g.power_at(px, py);
            if power > 0.0 {
                continue;
            }
            let alpha = (g.opacity * power.exp()).min(config.alpha_max);
            if alpha < config.alpha_min {
                continue;
            }
            let next = t * (1.0 - alpha);
            if next < config.transmittance_min {
                break;
            }
            let weight = alpha * t;
            for ch in 0..3 {
                c[ch] += g.color[ch] * weight;
            }
            visit(slot as usize, weight);
            t = next;
        }
        (c, t)
    }

    /// Walks the same sequence as [`Frame::shade`] and returns the depth of
    /// the first gaussian whose blend drops transmittance below `tau`.
    #[inline]
    pub fn depth_at(&self, x: usize, y: usize, tau: f64, config: &RenderConfig) -> f64 {
        let (px, py) = (x as f64, y as f64);
        let mut t = 1.0;
        for &slot in self.tile_list(x, y) {
            let g = &self.projected[slot as usize];
            let power = g.power_at(px, py);
            if power > 0.0 {
                continue;
            }
            let alpha = (g.opacity * power.exp()).min(config.alpha_max);
            if alpha < config.alpha_min {
                continue;
            }
            let next = t * (1.0 - alpha);
            if next < tau {
                return g.depth;
            }
            if next < config.transmittance_min {
                break;
            }
            t = next;
        }
        f64::INFINITY
    }

    #[inline]
    fn pixel(&self, x: usize, y: usize, config: &RenderConfig) -> [f64; 3] {
        let (c, t) = self.shade(x, y, config, |_, _| {});
        [0, 1, 2].map(|ch| c[ch] + t * config.background[ch])
    }
}

/// Pixel rectangle (inclusive, clipped) outside of which the gaussian's
/// alpha is below `alpha_min`, padded by one pixel. `None` if empty.
fn support_rect(p: &ProjectedGaussian, config: &RenderConfig, width: usize, height: usize) -> Option<(usize, usize, usize, usize)> {
    if p.opacity < config.alpha_min || width == 0 || height == 0 {
        return None;
    }
    let k = 2.0 * (p.opacity / config.alpha_min).ln();
    let hx = (k * p.cov2d[0]).sqrt() + 1.0;
    let hy = (k * p.cov2d[2]).sqrt() + 1.0;
    let x0 = (p.mean2d[0] - hx).floor().max(0.0);
    let x1 = (p.mean2d[0] + hx).ceil().min(width as f64 - 1.0);
    let y0 = (p.mean2d[1] - hy).floor().max(0.0);
    let y1 = (p.mean2d[1] + hy).ceil().min(height as f64 - 1.0);
    if x0 > x1 || y0 > y1 {
        return None;
    }
    Some((x0 as usize, x1 as usize, y0 as usize, y1 as usize))
}

/// Renders into a flat buffer of the requested layout.
pub fn render_layout(scene: &Scene, camera: &Camera, config: &RenderConfig, layout: PixelLayout) -> Vec<f64> {
    let frame = Frame::prepare(scene, camera, config);
    let (w, h) = (frame.width, frame.height);
    let mut buf = vec![0.0; w * h * 3];
    if w == 0 || h == 0 {
        return buf;
    }
    match layout {
        PixelLayout::Hwc => {
            let shade_row = |(y, row): (usize, &mut [f64])| {
                for x in 0..w {
                    row[x * 3..x * 3 + 3].copy_from_slice(&frame.pixel(x, y, config));
                }
            };
            if config.parallel {
                buf.par_chunks_mut(w * 3).enumerate().for_each(shade_row);
            } else {
                buf.chunks_mut(w * 3).enumerate().for_each(shade_row);
            }
        }
        PixelLayout::Chw => {
            let (r, rest) = buf.split_at_mut(w * h);
            let (g, b) = rest.split_at_mut(w * h);
            let shade_row = |(y, ((r, g), b)): (usize, ((&mut [f64], &mut [f64]), &mut [f64]))| {
                for x in 0..w {
                    let [cr, cg, cb] = frame.pixel(x, y, config);
                    r[x] = cr;
                    g[x] = cg;
                    b[x] = cb;
                }
            };
            if config.parallel {
                r.par_chunks_mut(w)
                    .zip(g.par_chunks_mut(w))
                    .zip(b.par_chunks_mut(w))
                    .enumerate()
                    .for_each(shade_row);
            } else {
                r.chunks_mut(w).zip(g.chunks_mut(w)).zip(b.chunks_mut(w)).enumerate().for_each(shade_row);
            }
        }
    }
    buf
}

pub fn render(scene: &Scene, camera: &Camera, config: &RenderConfig) -> RenderedImage {
    let data = render_layout(scene, camera, config, PixelLayout::Hwc);
    Image::from_vec(camera.width(), camera.height(), data).expect("render buffer matches camera size")
}

/// A forward pass that keeps, for every pixel, the blended gaussians and
/// their `alpha * T` weights. The backward pass replays these exactly.
#[derive(Clone, Debug)]
pub struct ForwardState {
    pub frame: Frame,
    pub image: RenderedImage,
    /// `offsets[p]..offsets[p + 1]` indexes `contributions` for pixel `p`.
    pub offsets: Vec<usize>,
    /// `(slot into frame.projected, alpha * T)`.
    pub contributions: Vec<(u32, f64)>,
}

impl ForwardState {
    pub fn pixel_contributions(&self, pixel: usize) -> &[(u32, f64)] {
        &self.contributions[self.offsets[pixel]..self.offsets[pixel + 1]]
    }
}

pub fn render_forward(scene: &Scene, camera: &Camera, config: &RenderConfig) -> ForwardState {
    let frame = Frame::prepare(scene, camera, config);
    let (w, h) = (frame.width, frame.height);
    let shade_row = |y: usize| {
        let mut colors = Vec::with_capacity(w * 3);
        let mut counts = Vec::with_capacity(w);
        let mut contribs = Vec::new();
        for x in 0..w {
            let before = contribs.len();
            let (c, t) = frame.shade(x, y, config, |slot, weight| contribs.push((slot as u32, weight)));
            colors.extend((0..3).map(|ch| c[ch] + t * config.background[ch]));
            counts.push(contribs.len() - before);
        }
        (colors, counts, contribs)
    };
    let rows: Vec<_> = if config.parallel {
        (0..h).into_par_iter().map(shade_row).collect()
    } else {
        (0..h).map(shade_row).collect()
    };

    let mut data = Vec::with_capacity(w * h * 3);
    let mut offsets = Vec::with_capacity(w * h + 1);
    let mut contributions = Vec::new();
    offsets.push(0);
    for (colors, counts, contribs) in rows {
        data.extend(colors);
        let mut at = contributions.len();
        for n in counts {
            at += n;
            offsets.push(at);
        }
        contributions.extend(contribs);
    }
    let image = Image::from_vec(w, h, data).expect("render buffer matches camera size");
    ForwardState { frame, image, offsets, contributions }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::to_chw;
    use crate::scene::synthetic::{default_gaussian, generate_synthetic_scene, sh_from_rgb, Recipe};
    use crate::scene::{CameraIntrinsics, CameraPose, Gaussian};

    fn camera(w: usize, h: usize) -> Camera {
        Camera::new(
            CameraIntrinsics { fx: 50.0, fy: 50.0, cx: (w / 2) as f64, cy: (h / 2) as f64, width: w, height: h },
            CameraPose::identity(),
        )
    }

    fn splat(pos: [f32; 3], opacity: f32, rgb: [f64; 3]) -> Gaussian {
        Gaussian { position: pos, scale: [0.05; 3], opacity, sh: sh_from_rgb(rgb), ..default_gaussian() }
    }

    #[test]
    fn empty_scene_is_background() {
        let cfg = RenderConfig { background: [0.2, 0.4, 0.6], ..Default::default() };
        let img = render(&Scene::new(vec![]), &camera(8, 6), &cfg);
        for y in 0..6 {
            for x in 0..8 {
                assert_eq!(img.pixel(x, y), [0.2, 0.4, 0.6]);
            }
        }
    }

    #[test]
    fn single_gaussian_center_is_color_times_opacity() {
        let scene = Scene::new(vec![splat([0.0, 0.0, 2.0], 0.7, [0.9, 0.5, 0.2])]);
        let img = render(&scene, &camera(16, 16), &RenderConfig::default());
        let px = img.pixel(8, 8);
        for (got, c) in px.iter().zip([0.9, 0.5, 0.2]) {
            assert!((got - c * 0.7f32 as f64).abs() < 1e-6, "{px:?}");
        }
    }

    #[test]
    fn two_layers_hand_evaluated() {
        // front: red at alpha 0.5; back: blue with opacity 1 -> clamped to 0.99
        let mut back = splat([0.0, 0.0, 3.0], 1.0, [0.0, 0.0, 1.0]);
        back.opacity = 1.0;
        let front = splat([0.0, 0.0, 2.0], 0.5, [1.0, 0.0, 0.0]);
        let scene = Scene::new(vec![back, front]);
        let px = render(&scene, &camera(16, 16), &RenderConfig::default()).pixel(8, 8);
        let expected = [0.5, 0.0, 0.5 * 0.99];
        for ch in 0..3 {
            assert!((px[ch] - expected[ch]).abs() < 1e-6, "{px:?}");
        }
    }

    #[test]
    fn layouts_and_threading_agree_bit_for_bit() {
        let (scene, views) = generate_synthetic_scene(5, &Recipe::named("orbit-room").unwrap()).unwrap();
        let cam = views[2].camera();
        let par = RenderConfig::default();
        let seq = RenderConfig { parallel: false, ..Default::default() };
        let hwc = render(&scene, &cam, &par);
        assert_eq!(hwc, render(&scene, &cam, &seq));
        assert_eq!(to_chw(&hwc), render_layout(&scene, &cam, &par, PixelLayout::Chw));
        assert_eq!(to_chw(&hwc), render_layout(&scene, &cam, &seq, PixelLayout::Chw));
        let fwd = render_forward(&scene, &cam, &par);
        assert_eq!(fwd.image, hwc);
        assert_eq!(fwd.offsets.len(), cam.width() * cam.height() + 1);
    }

    #[test]
    fn tile_binning_matches_untiled() {
        let (scene, views) = generate_synthetic_scene(8, &Recipe::named("two-blobs").unwrap()).unwrap();
        let cam = views[0].camera();
        let tiled = render(&scene, &cam, &RenderConfig::default());
        let one_tile = RenderConfig { tile_size: 4096, ..Default::default() };
        assert_eq!(tiled, render(&scene, &cam, &one_tile));
    }
}
