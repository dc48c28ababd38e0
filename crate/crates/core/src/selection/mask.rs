use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;
use crate::scene::Camera;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tool {
    Brush,
    Rubber,
}

/// Per-pixel selection painted on the view seen through `camera`.
#[derive(Clone, Debug, PartialEq)]
pub struct SelectionMask2D {
    pub camera: Camera,
    bits: Vec<bool>,
}

impl SelectionMask2D {
    pub fn new(camera: Camera) -> Self {
        Self { bits: vec![false; camera.width() * camera.height()], camera }
    }

    pub fn from_bits(camera: Camera, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != camera.width() * camera.height() {
            return Err(Error::Contract(format!(
                "mask has {} pixels, camera is {}x{}",
                bits.len(),
                camera.width(),
                camera.height()
            )));
        }
        Ok(Self { camera, bits })
    }

    /// Pixels whose brightest channel is at least one half are selected.
    pub fn from_image(camera: Camera, image: &Image) -> Result<Self> {
        if image.width() != camera.width() || image.height() != camera.height() {
            return Err(Error::Contract(format!(
                "mask image is {}x{} but the view is {}x{}",
                image.width(),
                image.height(),
                camera.width(),
                camera.height()
            )));
        }
        let bits = image.data().chunks_exact(3).map(|p| p.iter().cloned().fold(0.0, f64::max) >= 0.5).collect();
        Ok(Self { camera, bits })
    }

    /// White where selected, black elsewhere.
    pub fn to_image(&self) -> Image {
        let data = self.bits.iter().flat_map(|&b| [if b { 1.0 } else { 0.0 }; 3]).collect();
        Image::from_vec(self.width(), self.height(), data).expect("mask matches camera")
    }

    pub fn width(&self) -> usize {
        self.camera.width()
    }

    pub fn height(&self) -> usize {
        self.camera.height()
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width() + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        let w = self.width();
        self.bits[y * w + x] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|b| *b)
    }

    pub fn clear(&mut self) {
        self.bits.fill(false);
    }
}

fn segment_distance_sq(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len_sq = dx * dx + dy * dy;
    let t = if len_sq > 0.0 { (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len_sq).clamp(0.0, 1.0) } else { 0.0 };
    let (cx, cy) = (a[0] + t * dx - p[0], a[1] + t * dy - p[1]);
    cx * cx + cy * cy
}

/// Sets (brush) or clears (rubber) every pixel within `radius` of the
/// polyline through `path`.
pub fn apply_stroke(mask: &mut SelectionMask2D, tool: Tool, path: &[[f64; 2]], radius: f64) -> Result<()> {
    if path.is_empty() {
        return Err(Error::Contract("stroke path is empty".into()));
    }
    if !(radius >= 1.0 && radius.is_finite()) {
        return Err(Error::Contract(format!("stroke radius must be at least 1, got {radius}")));
    }
    if path.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Contract("stroke path has non-finite coordinates".into()));
    }
    let value = tool == Tool::Brush;
    let (w, h) = (mask.width() as f64, mask.height() as f64);
    let r_sq = radius * radius;
    let segments: Vec<_> = if path.len() == 1 { vec![(path[0], path[0])] } else { path.windows(2).map(|s| (s[0], s[1])).collect() };
    for (a, b) in segments {
        let x0 = (a[0].min(b[0]) - radius).floor().max(0.0);
        let x1 = (a[0].max(b[0]) + radius).ceil().min(w - 1.0);
        let y0 = (a[1].min(b[1]) - radius).floor().max(0.0);
        let y1 = (a[1].max(b[1]) + radius).ceil().min(h - 1.0);
        if x0 > x1 || y0 > y1 {
            continue;
        }
        for y in y0 as usize..=y1 as usize {
            for x in x0 as usize..=x1 as usize {
                if segment_distance_sq([x as f64, y as f64], a, b) <= r_sq {
                    mask.set(x, y, value);
                }
            }
        }
    }
    Ok(())
}
