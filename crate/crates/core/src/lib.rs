//! Eye-movement user identification.
//!
//! The pipeline: Savitzky-Golay smoothing ([`preprocess`]), velocity-threshold
//! segmentation into fixations and saccades ([`segmentation`]), per-segment
//! kinematic features up to the fifth derivative ([`features`]), one RBFN
//! classifier per segment kind ([`rbfn`]) and equal-weight score fusion with
//! a multi-seed protocol ([`evaluation`]). [`analysis`] ranks features by
//! ANOVA F-score; [`synthgen`] generates seeded datasets in the on-disk
//! format of [`data`].

pub mod analysis;
pub mod data;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod preprocess;
pub mod rbfn;
pub mod segmentation;
pub mod synthgen;

pub use data::{
    cut_fragment, load_dataset, resample, write_dataset, Anchor, Dataset, GazeSample, Manifest,
    Recording, Session, Trajectory,
};
pub use error::{Error, Result};
pub use evaluation::{ExperimentConfig, ExperimentResult, Fragment};
pub use features::{DerivativeLevel, FeatureMatrix};
pub use preprocess::SgConfig;
pub use rbfn::{RbfnConfig, RbfnModel};
pub use segmentation::{IvtConfig, Segment, SegmentKind, SegmentedTrajectory};
pub use synthgen::SynthConfig;
