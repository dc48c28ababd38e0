//! Plain-text camera manifest.
//!
//! One view per non-comment line, whitespace separated:
//!
//! ```text
//! id width height fx fy cx cy r00 r01 r02 r10 r11 r12 r20 r21 r22 t0 t1 t2 image
//! ```
//!
//! The rotation is world-to-camera, row-major. `image` is a PNG path relative
//! to the manifest's directory. Lines starting with `#` are comments.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use nalgebra::{Matrix3, Vector3};

use super::{CameraIntrinsics, CameraPose, TrainingView};
use crate::error::{Error, Result};
use crate::image::Image;

/// Orthonormality tolerance applied to manifest rotations.
pub const ROTATION_TOLERANCE: f64 = 1e-3;

const HEADER: &str = "# id width height fx fy cx cy r00 r01 r02 r10 r11 r12 r20 r21 r22 t0 t1 t2 image";

#[derive(Clone, Debug, PartialEq)]
pub struct ManifestEntry {
    pub id: u32,
    pub intrinsics: CameraIntrinsics,
    pub pose: CameraPose,
    pub image: PathBuf,
}

pub fn parse_manifest(text: &str) -> Result<Vec<ManifestEntry>> {
    let mut entries: Vec<ManifestEntry> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        if tokens.len() != 20 {
            return Err(Error::Format(format!(
                "manifest line {}: expected 20 fields, found {}",
                lineno + 1,
                tokens.len()
            )));
        }
        let bad = |what: &str| Error::Format(format!("manifest line {}: invalid {what}", lineno + 1));
        let id: u32 = tokens[0].parse().map_err(|_| bad("id"))?;
        let width: usize = tokens[1].parse().map_err(|_| bad("width"))?;
        let height: usize = tokens[2].parse().map_err(|_| bad("height"))?;
        let mut reals = [0f64; 16];
        for (slot, tok) in reals.iter_mut().zip(&tokens[3..19]) {
            *slot = tok.parse().map_err(|_| bad("number"))?;
            if !slot.is_finite() {
                return Err(bad("non-finite number"));
            }
        }
        let [fx, fy, cx, cy] = [reals[0], reals[1], reals[2], reals[3]];
        let intrinsics = CameraIntrinsics { fx, fy, cx, cy, width, height };
        let rotation = Matrix3::from_row_slice(&reals[4..13]);
        let translation = Vector3::new(reals[13], reals[14], reals[15]);
        let pose = CameraPose { rotation, translation };
        let invalid = |message: String| Error::Validation { view: id as i64, message };
        intrinsics.validate().map_err(invalid)?;
        pose.validate(ROTATION_TOLERANCE).map_err(invalid)?;
        if entries.iter().any(|e| e.id == id) {
            return Err(invalid("duplicate view id".into()));
        }
        entries.push(ManifestEntry { id, intrinsics, pose, image: PathBuf::from(tokens[19]) });
    }
    Ok(entries)
}

pub fn load_cameras(path: &Path) -> Result<Vec<TrainingView>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_manifest(&text)?
        .into_iter()
        .map(|entry| {
            let image = Image::load_png(&base.join(&entry.image))?;
            if image.width() != entry.intrinsics.width || image.height() != entry.intrinsics.height {
                return Err(Error::Validation {
                    view: entry.id as i64,
                    message: format!(
                        "image is {}x{}, camera expects {}x{}",
                        image.width(),
                        image.height(),
                        entry.intrinsics.width,
                        entry.intrinsics.height
                    ),
                });
            }
            Ok(TrainingView { id: entry.id, intrinsics: entry.intrinsics, pose: entry.pose, image })
        })
        .collect()
}

pub fn format_manifest(entries: &[ManifestEntry]) -> String {
    let mut out = String::new();
    out.push_str(HEADER);
    out.push('\n');
    for e in entries {
        let k = &e.intrinsics;
        write!(out, "{} {} {} {} {} {} {}", e.id, k.width, k.height, k.fx, k.fy, k.cx, k.cy).unwrap();
        for r in 0..3 {
            for c in 0..3 {
                write!(out, " {}", e.pose.rotation[(r, c)]).unwrap();
            }
        }
        for t in e.pose.translation.iter() {
            write!(out, " {t}").unwrap();
        }
        writeln!(out, " {}", e.image.display()).unwrap();
    }
    out
}

/// Writes `view_<id>.png` files next to the manifest and the manifest itself.
pub fn save_cameras(views: &[TrainingView], path: &Path) -> Result<()> {
    let base = path.parent().unwrap_or(Path::new("."));
    let mut entries = Vec::with_capacity(views.len());
    for view in views {
        let name = PathBuf::from(format!("view_{:03}.png", view.id));
        view.image.save_png(&base.join(&name))?;
        entries.push(ManifestEntry { id: view.id, intrinsics: view.intrinsics, pose: view.pose, image: name });
    }
    std::fs::write(path, format_manifest(&entries)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    const IDENTITY: &str = "0 4 3 10 10 2 1.5 1 0 0 0 1 0 0 0 1 0 0 0 a.png\n";

    #[test]
    fn identity_pose() {
        let entries = parse_manifest(IDENTITY).unwrap();
        assert_eq!(entries.len(), 1);
        assert_eq!(entries[0].pose, CameraPose::identity());
        assert_eq!(entries[0].intrinsics.cx, 2.0);
    }

    #[test]
    fn reflection_is_rejected() {
        let text = "7 4 3 10 10 2 1.5 -1 0 0 0 1 0 0 0 1 0 0 0 a.png\n";
        let err = parse_manifest(text).unwrap_err();
        assert!(matches!(err, Error::Validation { view: 7, .. }), "{err}");
    }

    #[test]
    fn skewed_rotation_is_rejected() {
        let text = "3 4 3 10 10 2 1.5 1 0.01 0 0 1 0 0 0 1 0 0 0 a.png\n";
        assert!(matches!(parse_manifest(text), Err(Error::Validation { view: 3, .. })));
    }

    #[test]
    fn principal_point_outside_is_rejected() {
        let text = "0 4 3 10 10 4 1.5 1 0 0 0 1 0 0 0 1 0 0 0 a.png\n";
        assert!(matches!(parse_manifest(text), Err(Error::Validation { .. })));
    }

    #[test]
    fn short_line_is_format_error() {
        assert!(matches!(parse_manifest("0 4 3 10\n"), Err(Error::Format(_))));
    }

    #[test]
    fn format_then_parse_is_exact() {
        let pose = CameraPose::look_at(Vector3::new(0.3, -2.7, 1.1), Vector3::zeros(), Vector3::z()).unwrap();
        let entry = ManifestEntry {
            id: 4,
            intrinsics: CameraIntrinsics::from_fov(33, 17, 0.9),
            pose,
            image: "x.png".into(),
        };
        let back = parse_manifest(&format_manifest(std::slice::from_ref(&entry))).unwrap();
        assert_eq!(back, vec![entry]);
    }
}
