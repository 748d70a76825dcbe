//! Stereo SLAM back-end: factor graph, Levenberg–Marquardt optimizer and the
//! incremental tracker that measures how far a run maps before failing.

mod factors;
mod graph;
mod optimize;
mod tracker;

pub use factors::{to_camera, Matrix4x6, OdometryFactor, PoseNoise, PriorFactor, StereoFactor, StereoLinearization};
pub use graph::FactorGraph;
pub use optimize::{optimize, optimize_selected, OptimizeConfig, OptimizeSummary, Selection};
#[cfg(test)]
mod tests;

pub use tracker::{
    distance_mapped, DistanceMapped, FrameInput, FrameReport, TrackState, TrackStatus, Tracker, TrackerConfig,
};
