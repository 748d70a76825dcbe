use std::collections::BTreeMap;

use super::factors::{OdometryFactor, PriorFactor, StereoFactor};
use crate::geometry::{Point, PoseSE3};

/// Poses (camera→world), landmarks (world points) and the factors tying them.
#[derive(Debug, Clone, Default)]
pub struct FactorGraph {
    pub poses: BTreeMap<usize, PoseSE3>,
    pub landmarks: BTreeMap<usize, Point>,
    pub stereo: Vec<StereoFactor>,
    pub odometry: Vec<OdometryFactor>,
    pub priors: Vec<PriorFactor>,
}

impl FactorGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn factor_count(&self) -> usize {
        self.stereo.len() + self.odometry.len() + self.priors.len()
    }

    /// Every factor references existing variables.
    pub fn is_consistent(&self) -> bool {
        self.stereo
            .iter()
            .all(|f| self.poses.contains_key(&f.frame) && self.landmarks.contains_key(&f.landmark))
            && self
                .odometry
                .iter()
                .all(|f| self.poses.contains_key(&f.from) && self.poses.contains_key(&f.to))
            && self.priors.iter().all(|f| self.poses.contains_key(&f.frame))
    }

    /// Poses ordered by frame id.
    pub fn trajectory(&self) -> Vec<(usize, PoseSE3)> {
        self.poses.iter().map(|(&k, &p)| (k, p)).collect()
    }
}
