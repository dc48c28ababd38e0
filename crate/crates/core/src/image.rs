//! Float image buffers, depth maps, and their PNG / PFM encodings.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// An RGB image stored interleaved per pixel (HWC), row-major from the top row.
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

/// Output of the rasterizer. Same storage as [`Image`].
pub type RenderedImage = Image;

impl Image {
    pub fn new(width: usize, height: usize) -> Self {
        Self::filled(width, height, [0.0; 3])
    }

    pub fn filled(width: usize, height: usize, rgb: [f64; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            data.extend_from_slice(&rgb);
        }
        Self { width, height, data }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height * 3 {
            return Err(Error::Contract(format!(
                "image buffer has {} values, expected {}x{}x3",
                data.len(),
                width,
                height
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn same_shape(&self, other: &Image) -> bool {
        self.width == other.width && self.height == other.height
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    #[inline]
    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [f64; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    /// RGBA8 bytes, rows top to bottom, alpha 255.
    pub fn to_rgba8(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.width * self.height * 4);
        for px in self.data.chunks_exact(3) {
            out.extend(px.iter().map(|&v| quantize(v)));
            out.push(255);
        }
        out
    }

    pub fn to_rgb8(&self) -> Vec<u8> {
        self.data.iter().map(|&v| quantize(v)).collect()
    }

    pub fn from_rgb8(width: usize, height: usize, bytes: &[u8]) -> Result<Self> {
        let data = bytes.iter().map(|&b| b as f64 / 255.0).collect();
        Self::from_vec(width, height, data)
    }

    pub fn encode_png(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        let encoder = image::codecs::png::PngEncoder::new(&mut out);
        image::ImageEncoder::write_image(
            encoder,
            &self.to_rgb8(),
            self.width as u32,
            self.height as u32,
            image::ExtendedColorType::Rgb8,
        )
        .map_err(|e| Error::Format(format!("png encode: {e}")))?;
        Ok(out)
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        let bytes = self.encode_png()?;
        std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }

    /// Loads an 8-bit PNG as linear `value / 255` (no gamma transform).
    pub fn load_png(path: &Path) -> Result<Self> {
        let img = image::open(path).map_err(|e| Error::Image {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let rgb = img.to_rgb8();
        Self::from_rgb8(rgb.width() as usize, rgb.height() as usize, rgb.as_raw())
    }
}

/// PNG convention: `round(clamp(v, 0, 1) * 255)`.
#[inline]
pub fn quantize(v: f64) -> u8 {
    let v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
    (v * 255.0).round() as u8
}

/// Per-pixel view-space depth. Background is `+inf`.
#[derive(Clone, Debug, PartialEq)]
pub struct DepthMap {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl DepthMap {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height, data: vec![f64::INFINITY; width * height] }
    }

    pub fn from_vec(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::Contract(format!(
                "depth buffer has {} values, expected {}x{}",
                data.len(),
                width,
                height
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, d: f64) {
        self.data[y * self.width + x] = d;
    }

    pub fn finite_count(&self) -> usize {
        self.data.iter().filter(|d| d.is_finite()).count()
    }

    pub fn to_pfm(&self) -> Vec<u8> {
        let samples: Vec<f32> = self.data.iter().map(|&d| d as f32).collect();
        encode_pfm(self.width, self.height, 1, &samples)
    }

    pub fn save_pfm(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_pfm()).map_err(|e| Error::io(path, e))
    }
}

/// A decoded portable float map. Samples are stored top row first.
#[derive(Clone, Debug, PartialEq)]
pub struct Pfm {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub samples: Vec<f32>,
}

/// Writes a little-endian PFM (`scale = -1.0`) with rows stored bottom-up.
/// `samples` is top-row-first, `channels` is 1 (`Pf`) or 3 (`PF`).
pub fn encode_pfm(width: usize, height: usize, channels: usize, samples: &[f32]) -> Vec<u8> {
    assert!(channels == 1 || channels == 3);
    assert_eq!(samples.len(), width * height * channels);
    let magic = if channels == 1 { "Pf" } else { "PF" };
    let mut out = Vec::with_capacity(32 + samples.len() * 4);
    write!(out, "{magic}\n{width} {height}\n-1.0\n").unwrap();
    let row = width * channels;
    for y in (0..height).rev() {
        for v in &samples[y * row..(y + 1) * row] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn decode_pfm(bytes: &[u8]) -> Result<Pfm> {
    let mut pos = 0;
    let mut token = || -> Result<&str> {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(Error::Format("truncated PFM header".into()));
        }
        std::str::from_utf8(&bytes[start..pos]).map_err(|_| Error::Format("non-ASCII PFM header".into()))
    };
    let channels = match token()? {
        "Pf" => 1,
        "PF" => 3,
        other => return Err(Error::Format(format!("bad PFM magic {other:?}"))),
    };
    let width: usize = token()?.parse().map_err(|_| Error::Format("bad PFM width".into()))?;
    let height: usize = token()?.parse().map_err(|_| Error::Format("bad PFM height".into()))?;
    let scale: f64 = token()?.parse().map_err(|_| Error::Format("bad PFM scale".into()))?;
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::Format("PFM scale must be finite and nonzero".into()));
    }
    // exactly one whitespace byte separates the header from the payload
    if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
        return Err(Error::Format("truncated PFM header".into()));
    }
    pos += 1;
    let count = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels))
        .filter(|n| n.checked_mul(4).is_some())
        .ok_or_else(|| Error::Format("PFM dimensions overflow".into()))?;
    let payload = &bytes[pos..];
    if payload.len() != count * 4 {
        return Err(Error::Format(format!(
            "PFM payload is {} bytes, expected {}",
            payload.len(),
            count * 4
        )));
    }
    let little = scale < 0.0;
    let row = width * channels;
    let mut samples = vec![0f32; count];
    for (i, chunk) in payload.chunks_exact(4).enumerate() {
        let raw = [chunk[0], chunk[1], chunk[2], chunk[3]];
        let v = if little { f32::from_le_bytes(raw) } else { f32::from_be_bytes(raw) };
        let file_row = i / row;
        let col = i % row;
        samples[(height - 1 - file_row) * row + col] = v;
    }
    Ok(Pfm { width, height, channels, samples })
}

impl Pfm {
    pub fn into_depth(self) -> Result<DepthMap> {
        if self.channels != 1 {
            return Err(Error::Format("expected a single-channel PFM".into()));
        }
        DepthMap::from_vec(self.width, self.height, self.samples.into_iter().map(f64::from).collect())
    }
}

/// Converts an HWC buffer to planar R, G, B planes.
pub fn to_chw(image: &Image) -> Vec<f64> {
    let n = image.width * image.height;
    let mut out = vec![0.0; n * 3];
    for (i, px) in image.data.chunks_exact(3).enumerate() {
        out[i] = px[0];
        out[n + i] = px[1];
        out[2 * n + i] = px[2];
    }
    out
}

/// Inverse of [`to_chw`].
pub fn from_chw(width: usize, height: usize, planes: &[f64]) -> Result<Image> {
    let n = width * height;
    if planes.len() != n * 3 {
        return Err(Error::Contract(format!(
            "planar buffer has {} values, expected {}x{}x3",
            planes.len(),
            width,
            height
        )));
    }
    let mut data = Vec::with_capacity(n * 3);
    for i in 0..n {
        data.extend_from_slice(&[planes[i], planes[n + i], planes[2 * n + i]]);
    }
    Image::from_vec(width, height, data)
}
