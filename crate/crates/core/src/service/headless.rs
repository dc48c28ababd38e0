use super::session::EditSettings;
use crate::error::{Error, Result};
use crate::image::Image;
use crate::optimizer::{DatasetBuilder, IterationMetrics, Optimizer, Tint};
use crate::render::RenderConfig;
use crate::scene::{Scene, TrainingView};
use crate::selection::{commit_selection, SelectionMask2D};
use crate::stereo::estimate_depth;

#[derive(Clone, Debug)]
pub struct EditOutcome {
    pub scene: Scene,
    pub cloud_size: usize,
    pub removed_outliers: usize,
    pub generation: u64,
    pub metrics: Vec<IterationMetrics>,
}

/// Batch form of an interactive edit: the mask painted on `view_id` is
/// committed once, the targets are tinted, and `iterations` steps are run
/// inline. Produces the same scene as a session fed the equivalent messages.
pub fn run_edit(
    scene: Scene,
    views: &[TrainingView],
    view_id: u32,
    mask_image: &Image,
    tint: Tint,
    iterations: u64,
    settings: &EditSettings,
) -> Result<EditOutcome> {
    let view = views
        .iter()
        .find(|v| v.id == view_id)
        .ok_or_else(|| Error::Config(format!("unknown view id {view_id}")))?;
    let camera = view.camera();
    let mask = SelectionMask2D::from_image(camera, mask_image)?;
    let builder = DatasetBuilder::new(views, &scene, &RenderConfig::default())?;
    let depth = estimate_depth(&scene, &camera, &settings.depth)?;
    let outcome = commit_selection(None, &SelectionMask2D::new(camera), &mask, &depth, &settings.selection_params())?;
    if let Some(w) = &outcome.warning {
        log::warn!("{w}");
    }
    if outcome.cloud.is_empty() {
        return Err(Error::EmptySelection("no selected pixel survived unprojection and filtering".into()));
    }
    let generation = 1;
    let dataset = builder.build(&outcome.cloud, tint, settings.projection, generation)?;
    let mut optimizer = Optimizer::new(scene, settings.optimizer.clone(), settings.seed)?;
    let metrics = optimizer.run(&dataset, iterations)?;
    Ok(EditOutcome {
        scene: optimizer.scene,
        cloud_size: outcome.cloud.len(),
        removed_outliers: outcome.removed_outliers,
        generation,
        metrics,
    })
}
