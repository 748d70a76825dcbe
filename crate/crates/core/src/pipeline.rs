//! End-to-end runs over a scene: per-frame matching, incremental SLAM, and
//! chained ICP reconstruction.

use serde::{Deserialize, Serialize};

use crate::association::{
    baseline_nn_match, filter_by_motion, structural_match, Assignment, BipartiteGraph, MatcherParams, MotionFilter,
    TravelDirection,
};
use crate::backend::{distance_mapped, FrameInput, FrameReport, TrackState, TrackStatus, Tracker, TrackerConfig};
use crate::cloud::{voxel_downsample, PointCloud};
use crate::error::{Error, Result};
use crate::features::SeedKeypoint;
use crate::geometry::{PoseRecord, PoseSE3};
use crate::icp::{fuse, icp_align, seed_center_cloud, IcpConfig, IcpMode, DEFAULT_VOXEL};
use crate::io::round9;
use crate::simulator::{FrameDetections, Scene};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatcherKind {
    #[default]
    Structural,
    /// Mutual nearest neighbour in pixel space.
    Baseline,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatchingConfig {
    pub matcher: MatcherKind,
    pub params: MatcherParams,
    /// Pixel radius of the baseline matcher.
    pub baseline_max_dist: f64,
    /// Applied to left→right matches of one frame.
    pub stereo_filter: MotionFilter,
    /// Applied to previous-left→current-left matches.
    pub temporal_filter: MotionFilter,
}

impl Default for MatchingConfig {
    fn default() -> Self {
        let params = MatcherParams::default();
        Self {
            matcher: MatcherKind::Structural,
            params,
            baseline_max_dist: params.delta,
            stereo_filter: MotionFilter {
                max_vertical: 4.0,
                direction: TravelDirection::RightToLeft,
            },
            temporal_filter: MotionFilter {
                max_vertical: params.epsilon,
                direction: TravelDirection::RightToLeft,
            },
        }
    }
}

impl MatchingConfig {
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.baseline_max_dist > 0.0) {
            return Err(Error::config("matching.baseline_max_dist", "must be > 0"));
        }
        for (name, f) in [("stereo_filter", &self.stereo_filter), ("temporal_filter", &self.temporal_filter)] {
            if !(f.max_vertical >= 0.0) {
                return Err(Error::config(format!("matching.{name}.max_vertical"), "must be >= 0"));
            }
        }
        Ok(())
    }

    /// Associates keypoints of image A (`u`) with image B (`v`).
    pub fn match_pair(&self, a: &[SeedKeypoint], b: &[SeedKeypoint], filter: &MotionFilter) -> Result<Assignment> {
        let graph = BipartiteGraph::new(a.to_vec(), b.to_vec());
        let raw = match self.matcher {
            MatcherKind::Structural => structural_match(&graph, &self.params)?,
            MatcherKind::Baseline => baseline_nn_match(&graph, self.baseline_max_dist),
        };
        Ok(filter_by_motion(&raw, &graph, filter))
    }

    pub fn stereo(&self, frame: &FrameDetections) -> Result<Assignment> {
        self.match_pair(&frame.left, &frame.right, &self.stereo_filter)
    }

    pub fn temporal(&self, previous: &FrameDetections, current: &FrameDetections) -> Result<Assignment> {
        self.match_pair(&previous.left, &current.left, &self.temporal_filter)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PairKind {
    Stereo,
    Temporal,
}

/// Matches of one image pair. Stereo pairs have `frame_a == frame_b`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairMatch {
    pub kind: PairKind,
    pub frame_a: usize,
    pub frame_b: usize,
    pub assignment: Assignment,
}

/// Stereo matches of every frame, then temporal matches of every
/// consecutive pair.
pub fn run_matching(scene: &Scene, config: &MatchingConfig) -> Result<Vec<PairMatch>> {
    config.validate()?;
    let mut out = Vec::with_capacity(2 * scene.frames.len());
    for f in &scene.frames {
        out.push(PairMatch {
            kind: PairKind::Stereo,
            frame_a: f.frame,
            frame_b: f.frame,
            assignment: config.stereo(f)?,
        });
    }
    for w in scene.frames.windows(2) {
        out.push(PairMatch {
            kind: PairKind::Temporal,
            frame_a: w[0].frame,
            frame_b: w[1].frame,
            assignment: config.temporal(&w[0], &w[1])?,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SlamConfig {
    pub matching: MatchingConfig,
    pub tracker: TrackerConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FailureMode {
    None,
    Lost,
    BackendFailure,
}

/// Outcome of a SLAM run. The first four fields form `metrics.json`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlamMetrics {
    pub distance_mapped: f64,
    pub fraction: f64,
    pub frames_tracked: usize,
    pub failure_mode: FailureMode,
    /// Frame of the last mapped pose, if any.
    #[serde(default)]
    pub last_good_frame: Option<usize>,
    /// Length of the traversed path the fraction refers to.
    #[serde(default)]
    pub range_length: f64,
}

#[derive(Debug, Clone)]
pub struct SlamOutput {
    pub trajectory: Vec<(usize, PoseSE3)>,
    pub map: PointCloud,
    pub state: TrackState,
    pub metrics: SlamMetrics,
    pub frames: Vec<FrameReport>,
}

/// Runs match → filter → back-end frame by frame. Tracking loss ends the run
/// early; it is a result, not an error.
pub fn run_slam(scene: &Scene, config: &SlamConfig) -> Result<SlamOutput> {
    config.matching.validate()?;
    let cam = scene.config.camera;
    let mut tracker = Tracker::new(cam, config.tracker);
    let mut reports = Vec::with_capacity(scene.frames.len());
    let mut previous: Option<&FrameDetections> = None;
    for f in &scene.frames {
        let stereo = config.matching.stereo(f)?;
        let temporal = match previous {
            Some(p) => Some(config.matching.temporal(p, f)?),
            None => None,
        };
        let (state, report) = tracker.add_frame(FrameInput {
            frame_id: f.frame,
            left: &f.left,
            right: &f.right,
            stereo: &stereo,
            temporal: temporal.as_ref(),
        });
        log::debug!(
            "frame {}: {} stereo, {}/{} temporal inliers, {} new landmarks",
            f.frame,
            stereo.len(),
            report.temporal_inliers,
            report.temporal_candidates,
            report.new_landmarks
        );
        reports.push(report);
        if state.status != TrackStatus::Tracking {
            break;
        }
        previous = Some(f);
    }
    let state = tracker.state().clone();
    let range_length = scene.config.path_length();
    let trajectory: Vec<(usize, PoseSE3)> = tracker
        .trajectory()
        .into_iter()
        .filter(|(f, _)| state.last_good_frame.is_some_and(|last| *f <= last))
        .collect();
    let d = distance_mapped(&trajectory, &state, range_length);
    let failure_mode = match state.status {
        TrackStatus::Tracking => FailureMode::None,
        TrackStatus::Lost => FailureMode::Lost,
        TrackStatus::BackendFailure => FailureMode::BackendFailure,
    };
    let map = PointCloud::new(tracker.landmarks().iter().map(|l| l.position).collect());
    Ok(SlamOutput {
        trajectory,
        map,
        metrics: SlamMetrics {
            distance_mapped: round9(d.distance),
            fraction: round9(d.fraction),
            frames_tracked: state.frames_tracked,
            failure_mode,
            last_good_frame: state.last_good_frame,
            range_length: round9(range_length),
        },
        state,
        frames: reports,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReconstructConfig {
    pub mode: IcpMode,
    pub full_cloud: IcpConfig,
    pub seed_centers: IcpConfig,
    /// Grid applied to full clouds before registration, meters; 0 registers them at full density.
    pub voxel: f64,
    /// Grid applied to the fused model; 0 keeps every point.
    pub fuse_voxel: f64,
    /// Stereo matching used to build seed-centre clouds.
    pub matching: MatchingConfig,
}

impl Default for ReconstructConfig {
    fn default() -> Self {
        Self {
            mode: IcpMode::SeedCenters,
            full_cloud: IcpConfig::for_mode(IcpMode::FullCloud),
            seed_centers: IcpConfig::for_mode(IcpMode::SeedCenters),
            voxel: 0.0,
            fuse_voxel: DEFAULT_VOXEL,
            matching: MatchingConfig::default(),
        }
    }
}

impl ReconstructConfig {
    pub fn icp(&self) -> IcpConfig {
        let mut c = match self.mode {
            IcpMode::FullCloud => self.full_cloud,
            IcpMode::SeedCenters => self.seed_centers,
        };
        c.mode = self.mode;
        c
    }

    pub fn validate(&self) -> Result<()> {
        self.full_cloud.validate()?;
        self.seed_centers.validate()?;
        self.matching.validate()?;
        if !(self.voxel >= 0.0 && self.fuse_voxel >= 0.0) {
            return Err(Error::config("reconstruct.voxel", "must be >= 0"));
        }
        Ok(())
    }
}

/// Per-frame line of the registration report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Registration {
    pub frame: usize,
    pub mode: IcpMode,
    pub iterations: usize,
    pub rms: f64,
    pub converged: bool,
    /// Maps this frame's camera coordinates into the previous frame's.
    pub transform: PoseRecord,
    /// Why the forward-kinematics prior was kept instead, if it was.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fallback: Option<String>,
}

#[derive(Debug, Clone)]
pub struct ReconstructOutput {
    /// Refined world poses, one per frame.
    pub poses: Vec<PoseSE3>,
    pub registrations: Vec<Registration>,
    pub fused: PointCloud,
}

fn round_pose(p: &PoseSE3) -> PoseRecord {
    let r = PoseRecord::from(p);
    PoseRecord {
        translation: r.translation.map(round9),
        rotation_wxyz: r.rotation_wxyz.map(round9),
    }
}

/// Clouds each frame is registered with under `config`'s mode.
pub fn registration_clouds(scene: &Scene, config: &ReconstructConfig) -> Result<Vec<PointCloud>> {
    match config.mode {
        IcpMode::FullCloud => {
            let clouds = scene.clouds.as_ref().ok_or(Error::MissingInput("clouds"))?;
            Ok(clouds
                .iter()
                .map(|c| if config.voxel > 0.0 { voxel_downsample(c, config.voxel) } else { c.clone() })
                .collect())
        }
        IcpMode::SeedCenters => scene
            .frames
            .iter()
            .map(|f| {
                let stereo = config.matching.stereo(f)?;
                Ok(seed_center_cloud(&f.left, &f.right, &stereo, &scene.config.camera).0)
            })
            .collect(),
    }
}

/// Chained registration of each frame onto the previous one, starting from
/// the forward-kinematics relative motion, then fusion of the dense clouds.
/// A frame whose registration fails keeps its prior.
pub fn run_reconstruct(scene: &Scene, config: &ReconstructConfig) -> Result<ReconstructOutput> {
    config.validate()?;
    let fk = scene.fk_poses.as_ref().ok_or(Error::MissingInput("fk/trajectory.txt"))?;
    let dense = scene.clouds.as_ref().ok_or(Error::MissingInput("clouds"))?;
    if fk.len() != scene.frames.len() || dense.len() != scene.frames.len() {
        return Err(Error::FrameMismatch("poses, clouds and detections differ in length".into()));
    }
    let icp = config.icp();
    let reg = registration_clouds(scene, config)?;

    let mut poses = Vec::with_capacity(fk.len());
    let mut registrations = Vec::with_capacity(fk.len());
    for k in 0..fk.len() {
        if k == 0 {
            poses.push(fk[0]);
            registrations.push(Registration {
                frame: 0,
                mode: icp.mode,
                iterations: 0,
                rms: 0.0,
                converged: true,
                transform: round_pose(&PoseSE3::identity()),
                fallback: None,
            });
            continue;
        }
        let prior = fk[k - 1].between(&fk[k]);
        let (relative, entry) = match icp_align(&reg[k], &reg[k - 1], &prior, &icp) {
            Ok(r) => (
                r.transform,
                Registration {
                    frame: k,
                    mode: icp.mode,
                    iterations: r.iterations,
                    rms: round9(r.rms_error),
                    converged: r.converged,
                    transform: round_pose(&r.transform),
                    fallback: None,
                },
            ),
            Err(e) => {
                log::info!("frame {k}: registration failed ({e}); keeping the kinematic prior");
                (
                    prior,
                    Registration {
                        frame: k,
                        mode: icp.mode,
                        iterations: 0,
                        rms: 0.0,
                        converged: false,
                        transform: round_pose(&prior),
                        fallback: Some(e.to_string()),
                    },
                )
            }
        };
        poses.push(poses[k - 1].compose(&relative));
        registrations.push(entry);
    }
    let frames: Vec<(PointCloud, PoseSE3)> = dense.iter().cloned().zip(poses.iter().copied()).collect();
    let fused = fuse(&frames, (config.fuse_voxel > 0.0).then_some(config.fuse_voxel));
    Ok(ReconstructOutput {
        poses,
        registrations,
        fused,
    })
}
