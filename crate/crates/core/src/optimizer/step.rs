use std::fmt;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use super::adam::{adam_step, AdamState, OptimizerConfig};
use super::dataset::EditedDataset;
use crate::error::{Error, Result};
use crate::grad::{backward_sh_with_state, loss_and_grad, LossBreakdown};
use crate::render::{render, render_forward, RenderConfig};
use crate::scene::Scene;

/// One line of the metrics stream.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationMetrics {
    pub iteration: u64,
    pub view_id: u32,
    pub generation: u64,
    pub loss: LossBreakdown,
}

impl IterationMetrics {
    pub const CSV_HEADER: &'static str = "iter,viewId,generation,l1,ssim,total";
}

impl fmt::Display for IterationMetrics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{},{},{},{},{},{}",
            self.iteration, self.view_id, self.generation, self.loss.l1, self.loss.ssim, self.loss.total
        )
    }
}

/// Samples one view uniformly, renders it, and takes an Adam step on the SH
/// coefficients toward the view's edited target. Geometry is never written.
pub fn optimize_iteration(
    scene: &mut Scene,
    dataset: &EditedDataset,
    rng: &mut impl Rng,
    state: &mut AdamState,
    config: &OptimizerConfig,
    render_config: &RenderConfig,
) -> Result<(u32, LossBreakdown)> {
    if dataset.is_empty() {
        return Err(Error::Contract("cannot optimize against an empty dataset".into()));
    }
    let view = &dataset.views[rng.random_range(0..dataset.len())];
    let forward = render_forward(scene, &view.camera, render_config);
    let (loss, grad) = loss_and_grad(&forward.image, &view.target, config.lambda)?;
    if !loss.total.is_finite() {
        return Err(Error::Optimizer(format!("non-finite loss on view {}", view.id)));
    }
    let grads = backward_sh_with_state(&forward, scene, &grad)?;
    adam_step(scene, &grads, state, config)?;
    Ok((view.id, loss))
}

/// Optimizer state owned by whoever runs the loop.
#[derive(Clone, Debug)]
pub struct Optimizer {
    pub scene: Scene,
    pub state: AdamState,
    pub config: OptimizerConfig,
    pub render: RenderConfig,
    /// Completed iterations.
    pub iteration: u64,
    rng: ChaCha8Rng,
}

impl Optimizer {
    pub fn new(scene: Scene, config: OptimizerConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        scene.validate()?;
        Ok(Self {
            state: AdamState::new(scene.len()),
            scene,
            config,
            render: RenderConfig::default(),
            iteration: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    /// One iteration. On error nothing is modified except the view sampler.
    pub fn step(&mut self, dataset: &EditedDataset) -> Result<IterationMetrics> {
        let (view_id, loss) =
            optimize_iteration(&mut self.scene, dataset, &mut self.rng, &mut self.state, &self.config, &self.render)?;
        self.iteration += 1;
        Ok(IterationMetrics { iteration: self.iteration, view_id, generation: dataset.generation, loss })
    }

    pub fn run(&mut self, dataset: &EditedDataset, iterations: u64) -> Result<Vec<IterationMetrics>> {
        (0..iterations).map(|_| self.step(dataset)).collect()
    }
}

/// Mean absolute error between renders and targets over every masked pixel
/// of every view.
pub fn masked_l1_across_views(scene: &Scene, dataset: &EditedDataset, render_config: &RenderConfig) -> f64 {
    let (mut sum, mut count) = (0.0, 0usize);
    for v in &dataset.views {
        if v.mask.count() == 0 {
            continue;
        }
        let img = render(scene, &v.camera, render_config);
        for (p, _) in v.mask.bits.iter().enumerate().filter(|(_, m)| **m) {
            for ch in 0..3 {
                sum += (img.data()[p * 3 + ch] - v.target.data()[p * 3 + ch]).abs();
            }
            count += 3;
        }
    }
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// Mean absolute change from the original images outside the masks: how far
/// the edit leaked onto unselected pixels.
pub fn off_mask_drift(scene: &Scene, dataset: &EditedDataset, render_config: &RenderConfig) -> f64 {
    let (mut sum, mut count) = (0.0, 0usize);
    for v in &dataset.views {
        let img = render(scene, &v.camera, render_config);
        for (p, _) in v.mask.bits.iter().enumerate().filter(|(_, m)| !**m) {
            for ch in 0..3 {
                sum += (img.data()[p * 3 + ch] - v.original.data()[p * 3 + ch]).abs();
            }
            count += 3;
        }
    }
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}
