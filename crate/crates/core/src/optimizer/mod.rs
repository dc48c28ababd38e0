//! SH-only refit of a scene toward recolored training targets.

pub mod adam;
pub mod background;
pub mod dataset;
pub mod step;

pub use adam::{adam_step, AdamState, OptimizerConfig};
pub use background::{BackgroundOptimizer, LoopStatus};
pub use dataset::{apply_recolor, build_edited_dataset, DatasetBuilder, EditedDataset, EditedView, ProjectionParams, Tint};
pub use step::{masked_l1_across_views, off_mask_drift, optimize_iteration, IterationMetrics, Optimizer};
