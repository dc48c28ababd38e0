use nalgebra::Vector3;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::kdtree::KdTree;
use super::mask::SelectionMask2D;
use crate::error::{Error, Result};
use crate::image::DepthMap;
use crate::scene::Camera;

/// World-space points lifted from a painted mask. An empty cloud is the
/// "nothing selected" signal.
#[derive(Clone, Debug, PartialEq)]
pub struct SelectionCloud {
    pub points: Vec<Vector3<f64>>,
    /// Camera the most recent strokes were painted on.
    pub source: Camera,
    pub seed: u64,
}

impl SelectionCloud {
    pub fn empty(source: Camera, seed: u64) -> Self {
        Self { points: Vec::new(), source, seed }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Mask pixels with finite depth, row-major.
fn finite_pixels(mask: &SelectionMask2D, depth: &DepthMap) -> Vec<(usize, usize)> {
    let w = mask.width();
    (0..mask.width() * mask.height())
        .filter(|&p| mask.bits()[p] && depth.data()[p].is_finite())
        .map(|p| (p % w, p / w))
        .collect()
}

fn check_depth(mask: &SelectionMask2D, depth: &DepthMap) -> Result<()> {
    if depth.width() != mask.width() || depth.height() != mask.height() {
        return Err(Error::Contract(format!(
            "depth map is {}x{} but the mask is {}x{}",
            depth.width(),
            depth.height(),
            mask.width(),
            mask.height()
        )));
    }
    Ok(())
}

/// Lifts a seeded uniform subset (`round(fraction * n)` of the `n` selected
/// finite-depth pixels) to world space through the mask's camera.
pub fn unproject(mask: &SelectionMask2D, depth: &DepthMap, fraction: f64, seed: u64) -> Result<SelectionCloud> {
    check_depth(mask, depth)?;
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Contract(format!("sample fraction must be in (0, 1], got {fraction}")));
    }
    let mut pixels = finite_pixels(mask, depth);
    let keep = (fraction * pixels.len() as f64).round() as usize;
    if keep < pixels.len() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        pixels.shuffle(&mut rng);
        pixels.truncate(keep);
        pixels.sort_by_key(|&(x, y)| (y, x));
    }
    let cam = &mask.camera;
    let points = pixels.into_iter().map(|(x, y)| cam.unproject(x as f64, y as f64, depth.get(x, y))).collect();
    Ok(SelectionCloud { points, source: *cam, seed })
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutlierReport {
    pub cloud: SelectionCloud,
    pub removed: usize,
    /// Set when the cloud was too small to filter.
    pub warning: Option<String>,
}

/// Statistical outlier removal: drops points whose mean distance to their
/// `k` nearest neighbors exceeds `mean + std_scale * std` over the cloud.
pub fn remove_outliers(cloud: &SelectionCloud, k: usize, std_scale: f64) -> Result<OutlierReport> {
    if k == 0 {
        return Err(Error::Contract("outlier filter needs k >= 1".into()));
    }
    let n = cloud.len();
    if n <= k {
        return Ok(OutlierReport {
            cloud: cloud.clone(),
            removed: 0,
            warning: Some(format!("cloud has {n} points, need more than {k} to filter outliers")),
        });
    }
    let tree = KdTree::new(&cloud.points);
    let means: Vec<f64> = (0..n).map(|i| tree.knn_distances(i, k).iter().sum::<f64>() / k as f64).collect();
    let mean = means.iter().sum::<f64>() / n as f64;
    let std = (means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
    let threshold = mean + std_scale * std;
    let points: Vec<_> = cloud.points.iter().zip(&means).filter(|(_, m)| **m <= threshold).map(|(p, _)| *p).collect();
    Ok(OutlierReport {
        removed: n - points.len(),
        cloud: SelectionCloud { points, ..cloud.clone() },
        warning: None,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ProjectedMask {
    pub width: usize,
    pub height: usize,
    pub bits: Vec<bool>,
    /// Training view the mask belongs to; `None` for free viewer cameras.
    pub view_id: Option<u32>,
}

impl ProjectedMask {
    pub fn empty(width: usize, height: usize, view_id: Option<u32>) -> Self {
        Self { width, height, bits: vec![false; width * height], view_id }
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }
}

/// Pixel hit by `p` and its view depth, if it is in front of the camera,
/// inside the image and not hidden behind `occlusion`.
#[inline]
pub(crate) fn visible_pixel(camera: &Camera, occlusion: &DepthMap, p: &Vector3<f64>, depth_tol: f64) -> Option<(usize, usize)> {
    let (u, v, z) = camera.project(p);
    if !(z > 0.0) {
        return None;
    }
    let (px, py) = (u.round(), v.round());
    if !(px >= 0.0 && py >= 0.0 && px < camera.width() as f64 && py < camera.height() as f64) {
        return None;
    }
    let (px, py) = (px as usize, py as usize);
    (z <= occlusion.get(px, py) * (1.0 + depth_tol)).then_some((px, py))
}

/// Stamps a `quad_size` square around every visible point of `cloud`.
pub fn project_cloud(
    cloud: &SelectionCloud,
    camera: &Camera,
    occlusion: &DepthMap,
    quad_size: usize,
    depth_tol: f64,
    view_id: Option<u32>,
) -> Result<ProjectedMask> {
    let (w, h) = (camera.width(), camera.height());
    if occlusion.width() != w || occlusion.height() != h {
        return Err(Error::Contract(format!(
            "occlusion depth is {}x{} but the view is {w}x{h}",
            occlusion.width(),
            occlusion.height()
        )));
    }
    if quad_size == 0 {
        return Err(Error::Contract("quad size must be at least 1".into()));
    }
    let mut out = ProjectedMask::empty(w, h, view_id);
    let lo = (quad_size as isize - 1) / 2;
    for p in &cloud.points {
        let Some((px, py)) = visible_pixel(camera, occlusion, p, depth_tol) else { continue };
        for dy in 0..quad_size as isize {
            for dx in 0..quad_size as isize {
                let (x, y) = (px as isize + dx - lo, py as isize + dy - lo);
                if x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h {
                    out.bits[y as usize * w + x as usize] = true;
                }
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SelectionParams {
    pub sample_fraction: f64,
    pub seed: u64,
    pub k: usize,
    pub std_scale: f64,
    pub quad_size: usize,
    pub depth_tol: f64,
}

impl Default for SelectionParams {
    fn default() -> Self {
        Self { sample_fraction: 0.7, seed: 0, k: 16, std_scale: 0.007, quad_size: 5, depth_tol: 0.02 }
    }
}

/// Editable mask for `camera` showing the pixels covered by `cloud`.
pub fn reenter_selection(cloud: &SelectionCloud, camera: &Camera, depth: &DepthMap, params: &SelectionParams) -> Result<SelectionMask2D> {
    let projected = project_cloud(cloud, camera, depth, 1, params.depth_tol, None)?;
    SelectionMask2D::from_bits(*camera, projected.bits)
}

#[derive(Clone, Debug, PartialEq)]
pub struct CommitOutcome {
    pub cloud: SelectionCloud,
    pub kept: usize,
    pub added: usize,
    pub removed_outliers: usize,
    pub warning: Option<String>,
}

/// Merges an edited mask into the selection.
///
/// `before` is the mask the user started from (the re-entered projection of
/// `previous`, or empty) and `after` the mask at commit time, both on the same
/// camera with `depth` as its depth map. Points visible on a pixel that was
/// cleared are dropped, pixels that were newly painted are unprojected, and
/// the merged cloud is filtered for outliers. Points not visible from this
/// camera are kept untouched.
pub fn commit_selection(
    previous: Option<&SelectionCloud>,
    before: &SelectionMask2D,
    after: &SelectionMask2D,
    depth: &DepthMap,
    params: &SelectionParams,
) -> Result<CommitOutcome> {
    if before.camera != after.camera || before.width() != after.width() || before.height() != after.height() {
        return Err(Error::Contract("commit masks were painted on different cameras".into()));
    }
    check_depth(after, depth)?;
    let camera = after.camera;
    let mut points = Vec::new();
    if let Some(prev) = previous {
        for p in &prev.points {
            let cleared = visible_pixel(&camera, depth, p, params.depth_tol)
                .is_some_and(|(x, y)| before.get(x, y) && !after.get(x, y));
            if !cleared {
                points.push(*p);
            }
        }
    }
    let kept = points.len();
    let fresh_bits = before.bits().iter().zip(after.bits()).map(|(b, a)| *a && !*b).collect();
    let fresh = SelectionMask2D::from_bits(camera, fresh_bits)?;
    let added = unproject(&fresh, depth, params.sample_fraction, params.seed)?;
    let added_count = added.len();
    points.extend(added.points);
    let merged = SelectionCloud { points, source: camera, seed: params.seed };
    let report = remove_outliers(&merged, params.k, params.std_scale)?;
    Ok(CommitOutcome {
        cloud: report.cloud,
        kept,
        added: added_count,
        removed_outliers: report.removed,
        warning: report.warning,
    })
}
