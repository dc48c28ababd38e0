//! From painted 2D masks to a filtered world-space point cloud, and back onto
//! arbitrary views.

pub mod cloud;
pub mod kdtree;
pub mod mask;

pub use cloud::{
    commit_selection, project_cloud, reenter_selection, remove_outliers, unproject, CommitOutcome, OutlierReport,
    ProjectedMask, SelectionCloud, SelectionParams,
};
pub use kdtree::KdTree;
pub use mask::{apply_stroke, SelectionMask2D, Tool};
