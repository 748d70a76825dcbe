//! Semantic seed landmarks for mapping and reconstructing sorghum.
//!
//! * [`association`]: structural assignment-based matching of seed keypoints.
//! * [`backend`]: stereo bundle-adjustment back-end and tracking state.
//! * [`icp`]: point-to-point ICP in full-cloud and seed-center modes.
//! * [`simulator`]: deterministic synthetic range and orbit scenes.
//! * [`eval`]: matching, trajectory and reconstruction metrics.
//! * [`pipeline`]: end-to-end SLAM and reconstruction runs over a scene.

pub mod association;
pub mod backend;
pub mod cloud;
pub mod ellipse;
pub mod error;
pub mod eval;
pub mod features;
pub mod geometry;
pub mod icp;
pub mod io;
pub mod pipeline;
pub mod simulator;

pub use error::{Error, Result};
