use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::image::{DepthMap, Image};
use crate::render::{depth_from_gaussians, RenderConfig, DEFAULT_DEPTH_TAU};
use crate::scene::{Camera, Scene, TrainingView};
use crate::selection::{project_cloud, ProjectedMask, SelectionCloud};

/// Per-channel color multiplier.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tint(pub [f64; 3]);

impl Tint {
    pub const IDENTITY: Tint = Tint([1.0; 3]);

    pub fn new(rgb: [f64; 3]) -> Result<Self> {
        if rgb.iter().all(|c| c.is_finite() && *c >= 0.0) {
            Ok(Self(rgb))
        } else {
            Err(Error::Config(format!("tint components must be finite and non-negative, got {rgb:?}")))
        }
    }
}

impl Default for Tint {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl FromStr for Tint {
    type Err = Error;

    /// `r,g,b`
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(Error::Config(format!("tint must be r,g,b, got '{s}'")));
        }
        let mut rgb = [0.0; 3];
        for (dst, p) in rgb.iter_mut().zip(parts) {
            *dst = p.parse().map_err(|_| Error::Config(format!("bad tint component '{p}'")))?;
        }
        Self::new(rgb)
    }
}

impl fmt::Display for Tint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.0[0], self.0[1], self.0[2])
    }
}

/// Multiplies masked pixels by `tint` and clamps them to `[0, 1]`; other
/// pixels are copied unchanged.
pub fn apply_recolor(image: &Image, mask: &ProjectedMask, tint: Tint) -> Result<Image> {
    if image.width() != mask.width || image.height() != mask.height {
        return Err(Error::Contract(format!(
            "mask is {}x{} but the image is {}x{}",
            mask.width,
            mask.height,
            image.width(),
            image.height()
        )));
    }
    let mut out = image.clone();
    for (px, _) in out.data_mut().chunks_exact_mut(3).zip(&mask.bits).filter(|(_, m)| **m) {
        for (c, t) in px.iter_mut().zip(tint.0) {
            *c = (*c * t).clamp(0.0, 1.0);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct EditedView {
    pub id: u32,
    pub camera: Camera,
    pub mask: ProjectedMask,
    pub target: Image,
    pub original: Arc<Image>,
}

/// Recolored training targets. `generation` identifies the edit they encode.
#[derive(Clone, Debug, PartialEq)]
pub struct EditedDataset {
    pub views: Vec<EditedView>,
    pub generation: u64,
}

impl EditedDataset {
    pub fn len(&self) -> usize {
        self.views.len()
    }

    pub fn is_empty(&self) -> bool {
        self.views.is_empty()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProjectionParams {
    pub quad_size: usize,
    pub depth_tol: f64,
}

impl Default for ProjectionParams {
    fn default() -> Self {
        Self { quad_size: 5, depth_tol: 0.02 }
    }
}

/// Training views plus their occlusion depth maps. The depth only depends on
/// geometry, which the refit never touches, so it is computed once.
#[derive(Clone, Debug)]
pub struct DatasetBuilder {
    views: Vec<(u32, Camera, Arc<Image>)>,
    occlusion: Vec<DepthMap>,
}

impl DatasetBuilder {
    pub fn new(views: &[TrainingView], scene: &Scene, render: &RenderConfig) -> Result<Self> {
        if views.is_empty() {
            return Err(Error::Contract("edited dataset needs at least one view".into()));
        }
        let occlusion = views.iter().map(|v| depth_from_gaussians(scene, &v.camera(), DEFAULT_DEPTH_TAU, render)).collect();
        let views = views.iter().map(|v| (v.id, v.camera(), Arc::new(v.image.clone()))).collect();
        Ok(Self { views, occlusion })
    }

    pub fn occlusion(&self, index: usize) -> &DepthMap {
        &self.occlusion[index]
    }

    /// Unedited targets at `generation`.
    pub fn originals(&self, generation: u64) -> EditedDataset {
        let views = self
            .views
            .iter()
            .map(|(id, cam, img)| EditedView {
                id: *id,
                camera: *cam,
                mask: ProjectedMask::empty(cam.width(), cam.height(), Some(*id)),
                target: (**img).clone(),
                original: img.clone(),
            })
            .collect();
        EditedDataset { views, generation }
    }

    pub fn build(&self, cloud: &SelectionCloud, tint: Tint, params: ProjectionParams, generation: u64) -> Result<EditedDataset> {
        if cloud.is_empty() {
            return Ok(self.originals(generation));
        }
        let mut views = Vec::with_capacity(self.views.len());
        for ((id, cam, img), depth) in self.views.iter().zip(&self.occlusion) {
            let mask = project_cloud(cloud, cam, depth, params.quad_size, params.depth_tol, Some(*id))?;
            let target = apply_recolor(img, &mask, tint)?;
            views.push(EditedView { id: *id, camera: *cam, mask, target, original: img.clone() });
        }
        Ok(EditedDataset { views, generation })
    }
}

/// One-shot form of [`DatasetBuilder::build`]; the result carries
/// `previous_generation + 1`.
pub fn build_edited_dataset(
    views: &[TrainingView],
    cloud: &SelectionCloud,
    tint: Tint,
    params: ProjectionParams,
    scene: &Scene,
    previous_generation: u64,
) -> Result<EditedDataset> {
    DatasetBuilder::new(views, scene, &RenderConfig::default())?.build(cloud, tint, params, previous_generation + 1)
}
