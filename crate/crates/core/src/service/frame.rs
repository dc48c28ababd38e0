//! Binary frame encoding: a 20-byte header followed by the payload.
//!
//! ```text
//! "RCGS" | width u32 LE | height u32 LE | format u32 LE | payload length u32 LE | payload
//! ```
//! Raw payloads are RGBA8 rows, top to bottom.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::Image;

pub const FRAME_MAGIC: [u8; 4] = *b"RCGS";
pub const FRAME_HEADER_LEN: usize = 20;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FrameFormat {
    #[default]
    Raw,
    Png,
}

impl FrameFormat {
    pub fn code(self) -> u32 {
        match self {
            Self::Raw => 0,
            Self::Png => 1,
        }
    }

    pub fn from_code(code: u32) -> Option<Self> {
        match code {
            0 => Some(Self::Raw),
            1 => Some(Self::Png),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FrameHeader {
    pub width: u32,
    pub height: u32,
    pub format: FrameFormat,
    pub payload_len: u32,
}

impl FrameHeader {
    pub fn to_bytes(&self) -> [u8; FRAME_HEADER_LEN] {
        let mut out = [0u8; FRAME_HEADER_LEN];
        out[..4].copy_from_slice(&FRAME_MAGIC);
        for (i, v) in [self.width, self.height, self.format.code(), self.payload_len].into_iter().enumerate() {
            out[4 + 4 * i..8 + 4 * i].copy_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn parse(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < FRAME_HEADER_LEN {
            return Err(Error::Format(format!("frame header needs {FRAME_HEADER_LEN} bytes, got {}", bytes.len())));
        }
        if bytes[..4] != FRAME_MAGIC {
            return Err(Error::Format("bad frame magic".into()));
        }
        let word = |i: usize| u32::from_le_bytes(bytes[4 + 4 * i..8 + 4 * i].try_into().expect("4 bytes"));
        let format = FrameFormat::from_code(word(2)).ok_or_else(|| Error::Format(format!("unknown frame format {}", word(2))))?;
        Ok(Self { width: word(0), height: word(1), format, payload_len: word(3) })
    }
}

pub fn encode_frame(image: &Image, format: FrameFormat) -> Result<Vec<u8>> {
    let payload = match format {
        FrameFormat::Raw => image.to_rgba8(),
        FrameFormat::Png => image.encode_png()?,
    };
    let header = FrameHeader {
        width: image.width() as u32,
        height: image.height() as u32,
        format,
        payload_len: payload.len() as u32,
    };
    let mut out = Vec::with_capacity(FRAME_HEADER_LEN + payload.len());
    out.extend_from_slice(&header.to_bytes());
    out.extend_from_slice(&payload);
    Ok(out)
}

/// Splits a frame into header and payload, checking the declared lengths.
pub fn decode_frame(bytes: &[u8]) -> Result<(FrameHeader, &[u8])> {
    let header = FrameHeader::parse(bytes)?;
    let payload = &bytes[FRAME_HEADER_LEN..];
    if payload.len() != header.payload_len as usize {
        return Err(Error::Format(format!(
            "frame declares {} payload bytes but carries {}",
            header.payload_len,
            payload.len()
        )));
    }
    if header.format == FrameFormat::Raw {
        let expected = (header.width as u64) * (header.height as u64) * 4;
        if payload.len() as u64 != expected {
            return Err(Error::Format(format!(
                "raw {}x{} frame needs {expected} bytes, got {}",
                header.width,
                header.height,
                payload.len()
            )));
        }
    }
    Ok((header, payload))
}

/// RGBA8 pixels of a frame of either format.
pub fn decode_frame_rgba(bytes: &[u8]) -> Result<(FrameHeader, Vec<u8>)> {
    let (header, payload) = decode_frame(bytes)?;
    let pixels = match header.format {
        FrameFormat::Raw => payload.to_vec(),
        FrameFormat::Png => {
            let img = image::load_from_memory_with_format(payload, image::ImageFormat::Png)
                .map_err(|e| Error::Format(format!("bad PNG frame: {e}")))?
                .to_rgba8();
            if img.width() != header.width || img.height() != header.height {
                return Err(Error::Format("PNG size differs from the frame header".into()));
            }
            img.into_raw()
        }
    };
    Ok((header, pixels))
}
