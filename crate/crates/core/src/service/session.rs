use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::Vector3;
use parking_lot::Mutex;

use super::frame::{encode_frame, FrameFormat};
use super::protocol::{parse_client_message, ClientMessage, ServerMessage};
use crate::error::{Error, Result};
use crate::image::{DepthMap, Image};
use crate::optimizer::{BackgroundOptimizer, DatasetBuilder, EditedDataset, Optimizer, OptimizerConfig, ProjectionParams, Tint};
use crate::render::{depth_from_gaussians, render, RenderConfig};
use crate::scene::{save_scene_ply, Camera, CameraPose, Scene, TrainingView};
use crate::selection::{
    apply_stroke, commit_selection, project_cloud, reenter_selection, ProjectedMask, SelectionCloud, SelectionMask2D,
    SelectionParams,
};
use crate::stereo::{estimate_depth, DepthConfig};

/// Where the refit targets come from.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Targets {
    /// The training photographs as loaded.
    #[default]
    Photos,
    /// Renders of the input scene from the training cameras. Self-consistent,
    /// so an identity edit has exactly zero loss.
    Renders,
}

impl FromStr for Targets {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "photos" => Ok(Self::Photos),
            "renders" => Ok(Self::Renders),
            other => Err(Error::Config(format!("unknown targets '{other}' (expected photos or renders)"))),
        }
    }
}

pub fn training_targets(scene: &Scene, mut views: Vec<TrainingView>, targets: Targets, config: &RenderConfig) -> Vec<TrainingView> {
    if targets == Targets::Renders {
        for v in &mut views {
            v.image = render(scene, &v.camera(), config);
        }
    }
    views
}

/// Everything that influences the result of an edit.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EditSettings {
    pub depth: DepthConfig,
    pub selection: SelectionParams,
    pub projection: ProjectionParams,
    pub optimizer: OptimizerConfig,
    /// Seeds both the unprojection subsample and the view sampler.
    pub seed: u64,
}

impl EditSettings {
    pub fn selection_params(&self) -> SelectionParams {
        SelectionParams { seed: self.seed, ..self.selection.clone() }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum RunMode {
    /// Optimizer runs on its own thread once an edit is committed.
    #[default]
    Background,
    /// Iterations only run on `step` messages; fully deterministic.
    Inline,
}

struct ActiveSelection {
    depth: DepthMap,
    before: SelectionMask2D,
    mask: SelectionMask2D,
}

enum Driver {
    Idle { optimizer: Box<Optimizer>, snapshot: Arc<Scene> },
    Running(BackgroundOptimizer),
    /// Only observed while switching between the other two.
    Switching,
}

pub const OVERLAY_COLOR: [f64; 3] = [1.0, 0.0, 1.0];

/// State behind one editing session. All mutations go through
/// [`Session::handle`], which either applies a message completely or leaves
/// the session untouched and returns an error reply.
pub struct Session {
    views: Vec<TrainingView>,
    builder: DatasetBuilder,
    settings: EditSettings,
    mode: RunMode,
    driver: Driver,
    dataset: Arc<EditedDataset>,
    viewer: Camera,
    selection: Option<ActiveSelection>,
    cloud: Option<SelectionCloud>,
    tint: Tint,
    generation: u64,
    frame_format: FrameFormat,
    last_loss: Option<f64>,
    render_config: RenderConfig,
    occlusion: Mutex<Option<(Camera, Arc<DepthMap>)>>,
}

impl Session {
    pub fn new(scene: Scene, views: Vec<TrainingView>, settings: EditSettings, mode: RunMode) -> Result<Self> {
        if views.is_empty() {
            return Err(Error::Config("a session needs at least one training view".into()));
        }
        let render_config = RenderConfig::default();
        let builder = DatasetBuilder::new(&views, &scene, &render_config)?;
        let dataset = Arc::new(builder.originals(0));
        let optimizer = Optimizer::new(scene, settings.optimizer.clone(), settings.seed)?;
        Ok(Self {
            viewer: views[0].camera(),
            driver: Driver::Idle { snapshot: Arc::new(optimizer.scene.clone()), optimizer: Box::new(optimizer) },
            views,
            builder,
            settings,
            mode,
            dataset,
            selection: None,
            cloud: None,
            tint: Tint::IDENTITY,
            generation: 0,
            frame_format: FrameFormat::Raw,
            last_loss: None,
            render_config,
            occlusion: Mutex::new(None),
        })
    }

    pub fn viewer(&self) -> Camera {
        self.viewer
    }

    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn tint(&self) -> Tint {
        self.tint
    }

    pub fn cloud(&self) -> Option<&SelectionCloud> {
        self.cloud.as_ref()
    }

    pub fn selection_active(&self) -> bool {
        self.selection.is_some()
    }

    pub fn selection_mask(&self) -> Option<&SelectionMask2D> {
        self.selection.as_ref().map(|s| &s.mask)
    }

    pub fn dataset(&self) -> Arc<EditedDataset> {
        self.dataset.clone()
    }

    pub fn frame_format(&self) -> FrameFormat {
        self.frame_format
    }

    pub fn is_running(&self) -> bool {
        matches!(self.driver, Driver::Running(_))
    }

    /// Latest published parameters.
    pub fn scene(&self) -> Arc<Scene> {
        match &self.driver {
            Driver::Idle { snapshot, .. } => snapshot.clone(),
            Driver::Running(bg) => bg.snapshot(),
            Driver::Switching => unreachable!("driver is never left switching"),
        }
    }

    pub fn status(&self) -> ServerMessage {
        let (iteration, loss, ips) = match &self.driver {
            Driver::Idle { optimizer, .. } => (optimizer.iteration, self.last_loss.unwrap_or(0.0), 0.0),
            Driver::Running(bg) => {
                let s = bg.status();
                (s.iteration, s.last.map_or(0.0, |m| m.loss.total), s.iterations_per_second)
            }
            Driver::Switching => unreachable!("driver is never left switching"),
        };
        ServerMessage::Status { iteration, loss, ips, generation: self.generation }
    }

    /// Number of snapshots the background loop has published; 0 when idle.
    pub fn snapshot_count(&self) -> u64 {
        match &self.driver {
            Driver::Running(bg) => bg.status().snapshots,
            _ => 0,
        }
    }

    pub fn handle_text(&mut self, text: &str) -> Vec<ServerMessage> {
        match parse_client_message(text) {
            Ok(msg) => self.handle(msg),
            Err(e) => vec![ServerMessage::error(e.to_string())],
        }
    }

    pub fn handle(&mut self, msg: ClientMessage) -> Vec<ServerMessage> {
        match self.apply(msg) {
            Ok(replies) => replies,
            Err(e) => vec![ServerMessage::error(e.to_string())],
        }
    }

    fn apply(&mut self, msg: ClientMessage) -> Result<Vec<ServerMessage>> {
        match msg {
            ClientMessage::SetCamera { position, target, up } => {
                self.require_free()?;
                let pose = CameraPose::look_at(Vector3::from(position), Vector3::from(target), Vector3::from(up))
                    .ok_or_else(|| Error::Contract("degenerate camera: position, target and up must span a frame".into()))?;
                if !pose.rotation.iter().chain(pose.translation.iter()).all(|v| v.is_finite()) {
                    return Err(Error::Contract("non-finite camera".into()));
                }
                self.viewer = Camera::new(self.viewer.intrinsics, pose);
                Ok(vec![])
            }
            ClientMessage::GotoView { view_id } => {
                self.require_free()?;
                let view = self
                    .views
                    .iter()
                    .find(|v| v.id == view_id)
                    .ok_or_else(|| Error::Config(format!("unknown view id {view_id}")))?;
                self.viewer = view.camera();
                Ok(vec![])
            }
            ClientMessage::Hello { format } => {
                self.frame_format = format;
                Ok(vec![self.status()])
            }
            ClientMessage::EnterSelection {} => {
                if self.selection.is_some() {
                    return Err(Error::Contract("selection already active".into()));
                }
                let scene = self.scene();
                let depth = estimate_depth(&scene, &self.viewer, &self.settings.depth)?;
                let mask = match &self.cloud {
                    Some(cloud) => reenter_selection(cloud, &self.viewer, &depth, &self.settings.selection_params())?,
                    None => SelectionMask2D::new(self.viewer),
                };
                self.selection = Some(ActiveSelection { depth, before: mask.clone(), mask });
                Ok(vec![self.selection_info()])
            }
            ClientMessage::Stroke { tool, path, radius } => {
                let active = self.selection.as_mut().ok_or_else(|| Error::Contract("selection not active".into()))?;
                let mut mask = active.mask.clone();
                apply_stroke(&mut mask, tool, &path, radius)?;
                active.mask = mask;
                Ok(vec![])
            }
            ClientMessage::CommitSelection {} => {
                let active = self.selection.as_ref().ok_or_else(|| Error::Contract("selection not active".into()))?;
                let outcome = commit_selection(
                    self.cloud.as_ref(),
                    &active.before,
                    &active.mask,
                    &active.depth,
                    &self.settings.selection_params(),
                )?;
                if let Some(w) = &outcome.warning {
                    log::warn!("{w}");
                }
                if outcome.cloud.is_empty() {
                    return Err(Error::EmptySelection("no selected pixel survived unprojection and filtering".into()));
                }
                let generation = self.generation + 1;
                let dataset = self.builder.build(&outcome.cloud, self.tint, self.settings.projection, generation)?;
                self.publish_dataset(dataset, true)?;
                self.cloud = Some(outcome.cloud);
                self.selection = None;
                Ok(vec![self.selection_info(), self.status()])
            }
            ClientMessage::ClearSelection {} => {
                let generation = self.generation + 1;
                self.publish_dataset(self.builder.originals(generation), false)?;
                self.cloud = None;
                if let Some(active) = self.selection.as_mut() {
                    active.before.clear();
                    active.mask.clear();
                }
                Ok(vec![self.selection_info()])
            }
            ClientMessage::SetTint { rgb } => {
                let tint = Tint::new(rgb)?;
                if let Some(cloud) = &self.cloud {
                    let dataset = self.builder.build(cloud, tint, self.settings.projection, self.generation + 1)?;
                    self.tint = tint;
                    self.publish_dataset(dataset, false)?;
                } else {
                    self.tint = tint;
                }
                Ok(vec![self.status()])
            }
            ClientMessage::Pause {} => {
                self.running()?.pause();
                Ok(vec![self.status()])
            }
            ClientMessage::Resume {} => {
                self.running()?.resume();
                Ok(vec![self.status()])
            }
            ClientMessage::Stop {} => {
                if let Driver::Running(_) = self.driver {
                    let Driver::Running(bg) = std::mem::replace(&mut self.driver, Driver::Switching) else { unreachable!() };
                    let last = bg.status().last;
                    let optimizer = bg.stop()?;
                    if let Some(m) = last {
                        self.last_loss = Some(m.loss.total);
                    }
                    self.driver = Driver::Idle { snapshot: Arc::new(optimizer.scene.clone()), optimizer: Box::new(optimizer) };
                }
                Ok(vec![self.status()])
            }
            ClientMessage::Save { path } => {
                save_scene_ply(&self.scene(), Path::new(&path))?;
                Ok(vec![self.status()])
            }
            ClientMessage::Step { iterations } => {
                let Driver::Idle { optimizer, snapshot } = &mut self.driver else {
                    return Err(Error::Contract("step needs a session without a running background optimizer".into()));
                };
                let mut work = optimizer.clone();
                let metrics = work.run(&self.dataset, iterations)?;
                if let Some(last) = metrics.last() {
                    self.last_loss = Some(last.loss.total);
                }
                *snapshot = Arc::new(work.scene.clone());
                *optimizer = work;
                Ok(vec![self.status()])
            }
        }
    }

    fn require_free(&self) -> Result<()> {
        if self.selection.is_some() {
            Err(Error::Contract("selection active".into()))
        } else {
            Ok(())
        }
    }

    fn running(&self) -> Result<&BackgroundOptimizer> {
        match &self.driver {
            Driver::Running(bg) => Ok(bg),
            _ => Err(Error::Contract("optimizer is not running".into())),
        }
    }

    fn selection_info(&self) -> ServerMessage {
        ServerMessage::SelectionInfo { cloud_size: self.cloud.as_ref().map_or(0, SelectionCloud::len), generation: self.generation }
    }

    /// Installs a new dataset; `start` also launches the background loop if
    /// the session runs one and it is not running yet.
    fn publish_dataset(&mut self, dataset: EditedDataset, start: bool) -> Result<()> {
        let dataset = Arc::new(dataset);
        match &self.driver {
            Driver::Running(bg) => bg.set_dataset(dataset.clone()),
            Driver::Idle { .. } if start && self.mode == RunMode::Background => {
                let Driver::Idle { optimizer, .. } = std::mem::replace(&mut self.driver, Driver::Switching) else { unreachable!() };
                match BackgroundOptimizer::spawn(*optimizer.clone(), dataset.clone()) {
                    Ok(bg) => self.driver = Driver::Running(bg),
                    Err(e) => {
                        self.driver = Driver::Idle { snapshot: Arc::new(optimizer.scene.clone()), optimizer };
                        return Err(e);
                    }
                }
            }
            _ => {}
        }
        self.generation = dataset.generation;
        self.dataset = dataset;
        Ok(())
    }

    fn occlusion(&self, camera: &Camera, scene: &Scene) -> Arc<DepthMap> {
        let mut cache = self.occlusion.lock();
        if let Some((cam, depth)) = cache.as_ref() {
            if cam == camera {
                return depth.clone();
            }
        }
        // geometry never changes, so any snapshot gives the same depth
        let depth = Arc::new(depth_from_gaussians(scene, camera, crate::render::DEFAULT_DEPTH_TAU, &self.render_config));
        *cache = Some((*camera, depth.clone()));
        depth
    }

    /// Pixels highlighted on the next frame: the mask being painted, or the
    /// committed cloud stamped onto the viewer camera.
    pub fn overlay_mask(&self) -> Option<ProjectedMask> {
        if let Some(active) = &self.selection {
            let m = &active.mask;
            return Some(ProjectedMask { width: m.width(), height: m.height(), bits: m.bits().to_vec(), view_id: None });
        }
        let cloud = self.cloud.as_ref()?;
        let scene = self.scene();
        let depth = self.occlusion(&self.viewer, &scene);
        let p = self.settings.projection;
        project_cloud(cloud, &self.viewer, &depth, p.quad_size, p.depth_tol, None).ok()
    }

    /// The latest snapshot rendered at the viewer camera, with the overlay
    /// blended in at 50%.
    pub fn render_frame(&self) -> Image {
        let scene = self.scene();
        let mut img = render(&scene, &self.viewer, &self.render_config);
        if let Some(mask) = self.overlay_mask() {
            for (px, _) in img.data_mut().chunks_exact_mut(3).zip(&mask.bits).filter(|(_, m)| **m) {
                for (c, o) in px.iter_mut().zip(OVERLAY_COLOR) {
                    *c = 0.5 * *c + 0.5 * o;
                }
            }
        }
        img
    }

    pub fn frame_bytes(&self) -> Result<Vec<u8>> {
        encode_frame(&self.render_frame(), self.frame_format)
    }

    /// Structural invariants; used by tests after arbitrary message sequences.
    pub fn check_invariants(&self) -> std::result::Result<(), String> {
        if let Some(active) = &self.selection {
            if active.mask.camera != self.viewer || active.before.camera != self.viewer {
                return Err("selection mask camera differs from the frozen viewpoint".into());
            }
            if active.depth.width() != self.viewer.width() || active.depth.height() != self.viewer.height() {
                return Err("selection depth has the wrong size".into());
            }
        }
        if self.dataset.generation != self.generation {
            return Err(format!("dataset generation {} but session {}", self.dataset.generation, self.generation));
        }
        if self.cloud.as_ref().is_some_and(|c| c.is_empty()) {
            return Err("an empty cloud must be stored as no cloud".into());
        }
        if self.cloud.is_none() && self.dataset.views.iter().any(|v| v.mask.count() > 0) {
            return Err("no cloud but the dataset has masked pixels".into());
        }
        if matches!(self.driver, Driver::Switching) {
            return Err("optimizer driver left in a transitional state".into());
        }
        Ok(())
    }
}
