use std::collections::{BTreeMap, BTreeSet};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::factors::{OdometryFactor, PoseNoise, PriorFactor, StereoFactor};
use super::graph::FactorGraph;
use super::optimize::{optimize_selected, OptimizeConfig, Selection};
use crate::association::Assignment;
use crate::features::{Landmark, Observation, SeedKeypoint};
use crate::icp::umeyama;
use crate::geometry::{triangulate_with_floor, Point, PoseSE3, Side, StereoCamera, DEFAULT_DISPARITY_FLOOR};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackStatus {
    Tracking,
    Lost,
    BackendFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackState {
    pub status: TrackStatus,
    /// Last frame whose pose counts as mapped; `None` if nothing was mapped.
    pub last_good_frame: Option<usize>,
    /// Arc length of the estimated trajectory up to `last_good_frame`.
    pub distance_mapped: f64,
    pub frames_tracked: usize,
}

impl Default for TrackState {
    fn default() -> Self {
        Self {
            status: TrackStatus::Tracking,
            last_good_frame: None,
            distance_mapped: 0.0,
            frames_tracked: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackerConfig {
    pub sigma_px: f64,
    /// Constant-velocity motion prior, metres.
    pub sigma_odo_translation: f64,
    /// Constant-velocity motion prior, radians.
    pub sigma_odo_rotation: f64,
    /// Huber threshold in whitened units; non-positive disables it.
    pub huber: f64,
    /// Fewer surviving temporal matches than this make a frame weak.
    pub min_temporal_matches: usize,
    /// This many consecutive weak frames lose track.
    pub lost_after: usize,
    /// Keyframes optimized per step; older poses are held fixed.
    pub window: usize,
    pub full_batch: bool,
    /// Whitened residual norm above which a temporal association is rejected.
    pub gate: f64,
    pub disparity_floor: f64,
    pub max_iters: usize,
    /// Three-point hypotheses tried when screening temporal associations.
    pub ransac_iterations: usize,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            sigma_px: 1.0,
            sigma_odo_translation: 0.02,
            sigma_odo_rotation: 1f64.to_radians(),
            huber: 2.0,
            min_temporal_matches: 5,
            lost_after: 3,
            window: 10,
            full_batch: false,
            gate: 6.0,
            disparity_floor: DEFAULT_DISPARITY_FLOOR,
            max_iters: 20,
            ransac_iterations: 2000,
        }
    }
}

impl TrackerConfig {
    fn optimize_config(&self) -> OptimizeConfig {
        OptimizeConfig {
            max_iters: self.max_iters,
            lambda_init: 1e-4,
            tol: 1e-10,
            huber: (self.huber > 0.0).then_some(self.huber),
        }
    }
}

/// One frame of associated stereo detections.
#[derive(Debug, Clone, Copy)]
pub struct FrameInput<'a> {
    pub frame_id: usize,
    pub left: &'a [SeedKeypoint],
    pub right: &'a [SeedKeypoint],
    /// Left (`u`) → right (`v`) matches of this frame, already filtered.
    pub stereo: &'a Assignment,
    /// Previous left (`u`) → this left (`v`) matches, already filtered.
    /// Ignored for the first frame.
    pub temporal: Option<&'a Assignment>,
}

/// What [`Tracker::add_frame`] did with a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FrameReport {
    pub temporal_candidates: usize,
    pub temporal_inliers: usize,
    pub new_landmarks: usize,
}

/// Incremental stereo SLAM over a factor graph.
#[derive(Debug, Clone)]
pub struct Tracker {
    cam: StereoCamera,
    config: TrackerConfig,
    graph: FactorGraph,
    state: TrackState,
    frames: Vec<usize>,
    pinned: BTreeSet<usize>,
    prev_left_landmarks: Vec<Option<usize>>,
    next_landmark: usize,
    weak_streak: usize,
    initial_pose: PoseSE3,
}

impl Tracker {
    pub fn new(cam: StereoCamera, config: TrackerConfig) -> Self {
        Self {
            cam,
            config,
            graph: FactorGraph::new(),
            state: TrackState::default(),
            frames: Vec::new(),
            pinned: BTreeSet::new(),
            prev_left_landmarks: Vec::new(),
            next_landmark: 0,
            weak_streak: 0,
            initial_pose: PoseSE3::identity(),
        }
    }

    /// Anchors the first frame at `pose` instead of the identity.
    pub fn with_initial_pose(mut self, pose: PoseSE3) -> Self {
        self.initial_pose = pose;
        self
    }

    pub fn graph(&self) -> &FactorGraph {
        &self.graph
    }

    pub fn state(&self) -> &TrackState {
        &self.state
    }

    pub fn trajectory(&self) -> Vec<(usize, PoseSE3)> {
        self.graph.trajectory()
    }

    /// Landmarks with their stereo observations, ordered by id.
    pub fn landmarks(&self) -> Vec<Landmark> {
        let mut out: BTreeMap<usize, Landmark> = self
            .graph
            .landmarks
            .iter()
            .map(|(&id, &position)| {
                (
                    id,
                    Landmark {
                        id,
                        position,
                        observations: Vec::new(),
                    },
                )
            })
            .collect();
        for f in &self.graph.stereo {
            if let Some(lm) = out.get_mut(&f.landmark) {
                for (side, center) in [(Side::Left, f.left), (Side::Right, f.right)] {
                    lm.observations.push(Observation {
                        frame_id: f.frame,
                        side,
                        keypoint: SeedKeypoint::new(center, f.frame, side),
                    });
                }
            }
        }
        out.into_values().filter(|l| !l.observations.is_empty()).collect()
    }

    fn odometry_noise(&self) -> PoseNoise {
        PoseNoise {
            sigma_translation: self.config.sigma_odo_translation,
            sigma_rotation: self.config.sigma_odo_rotation,
        }
    }

    /// Triangulates every stereo match whose left keypoint has no landmark yet.
    fn spawn_landmarks(&mut self, frame: usize, input: &FrameInput, left_landmarks: &mut [Option<usize>]) -> usize {
        let pose = self.graph.poses[&frame];
        let mut spawned = 0;
        for m in &input.stereo.matches {
            if left_landmarks[m.u_index].is_some() {
                continue;
            }
            let (l, r) = (input.left[m.u_index].center, input.right[m.v_index].center);
            let Ok(pc) = triangulate_with_floor(&l, &r, &self.cam, self.config.disparity_floor) else {
                continue;
            };
            let id = self.next_landmark;
            self.next_landmark += 1;
            self.graph.landmarks.insert(id, pose.apply(&pc));
            self.graph.stereo.push(StereoFactor {
                frame,
                landmark: id,
                left: l,
                right: r,
                sigma_px: self.config.sigma_px,
            });
            left_landmarks[m.u_index] = Some(id);
            spawned += 1;
        }
        spawned
    }

    fn pose_only(&mut self, frame: usize) -> crate::Result<()> {
        let sel = Selection {
            free_poses: BTreeSet::from([frame]),
            fixed_landmarks: self.graph.landmarks.keys().copied().collect(),
        };
        optimize_selected(&mut self.graph, &self.cam, &self.config.optimize_config(), &sel).map(|_| ())
    }

    fn optimize_window(&mut self) -> crate::Result<()> {
        let take = if self.config.full_batch { self.frames.len() } else { self.config.window.max(1) };
        let free_poses = self
            .frames
            .iter()
            .rev()
            .take(take)
            .filter(|f| !self.pinned.contains(f))
            .copied()
            .collect();
        let sel = Selection {
            free_poses,
            fixed_landmarks: BTreeSet::new(),
        };
        optimize_selected(&mut self.graph, &self.cam, &self.config.optimize_config(), &sel).map(|_| ())
    }

    fn predict(&self) -> (PoseSE3, Option<PoseSE3>) {
        let n = self.frames.len();
        let last = self.graph.poses[&self.frames[n - 1]];
        if n >= 2 {
            let before = self.graph.poses[&self.frames[n - 2]];
            let velocity = before.between(&last);
            (last.compose(&velocity), Some(velocity))
        } else {
            (last, None)
        }
    }

    /// Removes the factors at `first_new + k` for which `drop(k)` holds and
    /// forgets their landmark links.
    fn drop_new_factors(&mut self, first_new: usize, drop: impl Fn(usize) -> bool, left_landmarks: &mut [Option<usize>]) {
        let new = self.graph.stereo.split_off(first_new);
        for (k, f) in new.into_iter().enumerate() {
            if drop(k) {
                if let Some(slot) = left_landmarks.iter_mut().find(|s| **s == Some(f.landmark)) {
                    *slot = None;
                }
            } else {
                self.graph.stereo.push(f);
            }
        }
    }

    /// Three-point RANSAC over temporal associations: each hypothesis aligns
    /// the re-triangulated observations with their landmarks, the predicted
    /// pose competes as one more hypothesis, and the pose with most factors
    /// inside the gate wins. Returns that pose and the inlier mask.
    fn screen(&self, frame: usize, factors: &[StereoFactor]) -> (PoseSE3, Vec<bool>) {
        let predicted = self.graph.poses[&frame];
        let inliers = |pose: &PoseSE3| -> Vec<bool> {
            factors
                .iter()
                .map(|f| f.residual(pose, &self.graph.landmarks[&f.landmark], &self.cam).norm() <= self.config.gate)
                .collect()
        };
        let count = |mask: &[bool]| mask.iter().filter(|b| **b).count();
        let mut best = (predicted, inliers(&predicted));
        let mut best_count = count(&best.1);

        let pairs: Vec<(Point, Point)> = factors
            .iter()
            .filter_map(|f| {
                let pc = triangulate_with_floor(&f.left, &f.right, &self.cam, self.config.disparity_floor).ok()?;
                Some((pc, self.graph.landmarks[&f.landmark]))
            })
            .collect();
        if pairs.len() < 3 {
            return best;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(frame as u64);
        for _ in 0..self.config.ransac_iterations {
            let pick = rand::seq::index::sample(&mut rng, pairs.len(), 3);
            let (src, dst): (Vec<Point>, Vec<Point>) = pick.iter().map(|i| pairs[i]).unzip();
            let pose = umeyama(&src, &dst);
            let mask = inliers(&pose);
            let c = count(&mask);
            // a sample always explains itself; demand support beyond it
            if c > best_count && c >= self.config.min_temporal_matches.max(4) {
                best_count = c;
                best = (pose, mask);
            }
        }
        best
    }

    fn arc_length_to(&self, last: usize) -> f64 {
        arc_length(self.graph.poses.range(..=last).map(|(_, p)| p))
    }

    /// Adds one frame: links temporal matches to existing landmarks, refines
    /// the new pose, rejects inconsistent associations, spawns landmarks from
    /// the remaining stereo matches and runs the sliding-window optimization.
    ///
    /// Frames after a loss or back-end failure are ignored.
    pub fn add_frame(&mut self, input: FrameInput) -> (TrackState, FrameReport) {
        let mut report = FrameReport::default();
        if self.state.status != TrackStatus::Tracking {
            return (self.state.clone(), report);
        }
        let frame = input.frame_id;
        assert!(
            self.frames.last().is_none_or(|&f| f < frame),
            "frames must arrive in increasing order"
        );
        let mut left_landmarks = vec![None; input.left.len()];
        let previous = self.frames.last().copied();

        let weak = match previous {
            None => {
                self.graph.poses.insert(frame, self.initial_pose);
                self.graph.priors.push(PriorFactor {
                    frame,
                    pose: self.initial_pose,
                    noise: PoseNoise {
                        sigma_translation: 1e-4,
                        sigma_rotation: 1e-4,
                    },
                });
                self.frames.push(frame);
                report.new_landmarks = self.spawn_landmarks(frame, &input, &mut left_landmarks);
                report.new_landmarks < self.config.min_temporal_matches
            }
            Some(prev) => {
                let (predicted, velocity) = self.predict();
                self.graph.poses.insert(frame, predicted);
                self.frames.push(frame);
                if let Some(v) = velocity {
                    self.graph.odometry.push(OdometryFactor {
                        from: prev,
                        to: frame,
                        measured: v,
                        noise: self.odometry_noise(),
                    });
                }

                let stereo_of = input.stereo.u_to_v(input.left.len());
                let first_new = self.graph.stereo.len();
                if let Some(temporal) = input.temporal {
                    for m in &temporal.matches {
                        let (Some(Some(lm)), Some(Some(r))) =
                            (self.prev_left_landmarks.get(m.u_index), stereo_of.get(m.v_index))
                        else {
                            continue;
                        };
                        self.graph.stereo.push(StereoFactor {
                            frame,
                            landmark: *lm,
                            left: input.left[m.v_index].center,
                            right: input.right[*r].center,
                            sigma_px: self.config.sigma_px,
                        });
                        left_landmarks[m.v_index] = Some(*lm);
                    }
                }
                report.temporal_candidates = self.graph.stereo.len() - first_new;

                let (start, keep) = self.screen(frame, &self.graph.stereo[first_new..]);
                self.drop_new_factors(first_new, |k| !keep[k], &mut left_landmarks);
                let consensus = self.graph.stereo.len() - first_new;
                self.graph.poses.insert(frame, start);

                let constrained = velocity.is_some() || consensus >= self.config.min_temporal_matches.max(3);
                if constrained {
                    if let Err(e) = self.pose_only(frame) {
                        return self.fail(prev, e, report);
                    }
                    let pose = self.graph.poses[&frame];
                    let mut rejected = Vec::new();
                    for (k, f) in self.graph.stereo[first_new..].iter().enumerate() {
                        let res = f.residual(&pose, &self.graph.landmarks[&f.landmark], &self.cam);
                        if !(res.norm() <= self.config.gate) {
                            rejected.push(first_new + k);
                        }
                    }
                    if !rejected.is_empty() {
                        let rejected: BTreeSet<usize> = rejected.into_iter().map(|k| k - first_new).collect();
                        self.drop_new_factors(first_new, |k| rejected.contains(&k), &mut left_landmarks);
                        if let Err(e) = self.pose_only(frame) {
                            return self.fail(prev, e, report);
                        }
                    }
                } else {
                    // Nothing to estimate this pose from: hold it at the prediction.
                    self.graph.stereo.truncate(first_new);
                    left_landmarks.iter_mut().for_each(|s| *s = None);
                    self.pinned.insert(frame);
                }
                report.temporal_inliers = self.graph.stereo.len() - first_new;
                report.new_landmarks = self.spawn_landmarks(frame, &input, &mut left_landmarks);
                if let Err(e) = self.optimize_window() {
                    return self.fail(prev, e, report);
                }
                report.temporal_inliers < self.config.min_temporal_matches
            }
        };

        self.prev_left_landmarks = left_landmarks;
        if weak {
            self.weak_streak += 1;
        } else {
            self.weak_streak = 0;
        }
        if self.weak_streak >= self.config.lost_after {
            self.state.status = TrackStatus::Lost;
            let n = self.frames.len();
            self.state.last_good_frame = n.checked_sub(self.weak_streak + 1).map(|i| self.frames[i]);
            self.state.frames_tracked = n - self.weak_streak;
            log::info!("track lost at frame {frame}");
        } else {
            self.state.last_good_frame = Some(frame);
            self.state.frames_tracked = self.frames.len();
        }
        if let Some(last) = self.state.last_good_frame {
            self.state.distance_mapped = self.state.distance_mapped.max(self.arc_length_to(last));
        }
        (self.state.clone(), report)
    }

    fn fail(&mut self, previous: usize, err: crate::Error, report: FrameReport) -> (TrackState, FrameReport) {
        log::warn!("back-end failure: {err}");
        self.state.status = TrackStatus::BackendFailure;
        self.state.last_good_frame = Some(previous);
        self.state.frames_tracked = self.frames.len() - 1;
        self.state.distance_mapped = self.state.distance_mapped.max(self.arc_length_to(previous));
        (self.state.clone(), report)
    }
}

fn arc_length<'a>(poses: impl Iterator<Item = &'a PoseSE3>) -> f64 {
    let mut total = 0.0;
    let mut prev: Option<&PoseSE3> = None;
    for p in poses {
        if let Some(q) = prev {
            total += (p.translation - q.translation).norm();
        }
        prev = Some(p);
    }
    total
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceMapped {
    pub distance: f64,
    pub fraction: f64,
}

/// Arc length of `trajectory` (ordered by frame) up to the state's last good
/// frame, capped at `range_length`.
pub fn distance_mapped(trajectory: &[(usize, PoseSE3)], state: &TrackState, range_length: f64) -> DistanceMapped {
    let distance = match state.last_good_frame {
        None => 0.0,
        Some(last) => arc_length(trajectory.iter().filter(|(f, _)| *f <= last).map(|(_, p)| p)),
    }
    .min(range_length);
    DistanceMapped {
        distance,
        fraction: if range_length > 0.0 { distance / range_length } else { 0.0 },
    }
}
