
use nalgebra::{Vector3, Vector6};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::association::{Assignment, Match};
use crate::features::SeedKeypoint;
use crate::geometry::{project, ImagePoint, Point, PoseSE3, Side, StereoCamera};

/// Camera looking along world +y, moving along +x.
fn side_looking(x: f64) -> PoseSE3 {
    let r = nalgebra::Rotation3::from_matrix_unchecked(nalgebra::Matrix3::new(
        1.0, 0.0, 0.0, //
        0.0, 0.0, 1.0, //
        0.0, -1.0, 0.0,
    ));
    PoseSE3::new(nalgebra::UnitQuaternion::from_rotation_matrix(&r), Vector3::new(x, 0.0, 0.0))
}

fn observe(pose: &PoseSE3, lm: &Point, cam: &StereoCamera) -> Option<(ImagePoint, ImagePoint)> {
    let pc = Point::from(to_camera(pose, lm));
    let l = project(&pc, cam, Side::Left).ok()?;
    let r = project(&pc, cam, Side::Right).ok()?;
    (cam.contains(&l) && cam.contains(&r)).then_some((l, r))
}

struct Synthetic {
    graph: FactorGraph,
    poses: Vec<PoseSE3>,
    landmarks: Vec<Point>,
}

fn synthetic_graph(n_poses: usize, n_landmarks: usize, seed: u64) -> Synthetic {
    let cam = StereoCamera::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let poses: Vec<PoseSE3> = (0..n_poses).map(|i| side_looking(0.1 * i as f64)).collect();
    let landmarks: Vec<Point> = (0..n_landmarks)
        .map(|_| Point::new(rng.random_range(-0.3..0.3 + 0.1 * n_poses as f64), rng.random_range(0.6..1.0), rng.random_range(-0.3..0.3)))
        .collect();
    let mut graph = FactorGraph::new();
    for (i, p) in poses.iter().enumerate() {
        graph.poses.insert(i, *p);
    }
    for (j, l) in landmarks.iter().enumerate() {
        graph.landmarks.insert(j, *l);
    }
    for (i, p) in poses.iter().enumerate() {
        for (j, l) in landmarks.iter().enumerate() {
            if let Some((left, right)) = observe(p, l, &cam) {
                graph.stereo.push(StereoFactor { frame: i, landmark: j, left, right, sigma_px: 1.0 });
            }
        }
    }
    let noise = PoseNoise { sigma_translation: 0.02, sigma_rotation: 1f64.to_radians() };
    for i in 1..n_poses {
        graph.odometry.push(OdometryFactor { from: i - 1, to: i, measured: poses[i - 1].between(&poses[i]), noise });
    }
    graph.priors.push(PriorFactor { frame: 0, pose: poses[0], noise: PoseNoise { sigma_translation: 1e-4, sigma_rotation: 1e-4 } });
    Synthetic { graph, poses, landmarks }
}

#[test]
fn stereo_jacobians_match_central_differences() {
    let cam = StereoCamera::default();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..100 {
        let pose = PoseSE3::from_scaled_axis(
            Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
            Vector3::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)),
        );
        let pc = Point::new(rng.random_range(-0.5..0.5), rng.random_range(-0.5..0.5), rng.random_range(0.4..4.0));
        let lm = pose.apply(&pc);
        let f = StereoFactor {
            frame: 0,
            landmark: 0,
            left: ImagePoint::new(rng.random_range(0.0..640.0), rng.random_range(0.0..480.0)),
            right: ImagePoint::new(rng.random_range(0.0..640.0), rng.random_range(0.0..480.0)),
            sigma_px: 1.0,
        };
        let lin = f.linearize(&pose, &lm, &cam);
        let h = 1e-6;
        for k in 0..6 {
            let mut d = Vector6::zeros();
            d[k] = h;
            let num = (f.residual(&pose.retract(&d), &lm, &cam) - f.residual(&pose.retract(&-d), &lm, &cam)) / (2.0 * h);
            let ana = lin.d_pose.column(k);
            let rel = (num - ana).norm() / ana.norm().max(1.0);
            assert!(rel < 1e-5, "pose col {k}: rel {rel}");
        }
        for k in 0..3 {
            let mut d = Vector3::zeros();
            d[k] = h;
            let num = (f.residual(&pose, &(lm + d), &cam) - f.residual(&pose, &(lm - d), &cam)) / (2.0 * h);
            let ana = lin.d_landmark.column(k);
            let rel = (num - ana).norm() / ana.norm().max(1.0);
            assert!(rel < 1e-5, "landmark col {k}: rel {rel}");
        }
    }
}

#[test]
fn ground_truth_is_a_fixed_point() {
    let cam = StereoCamera::default();
    let mut s = synthetic_graph(5, 40, 1);
    let before = s.graph.poses.clone();
    let summary = optimize(&mut s.graph, &cam, &OptimizeConfig::default()).unwrap();
    assert!(summary.initial_cost < 1e-12, "{}", summary.initial_cost);
    assert_eq!(summary.accepted_steps, 0);
    assert_eq!(s.graph.poses, before);
}

#[test]
fn perturbed_zero_noise_graph_recovers_truth() {
    let cam = StereoCamera::default();
    let mut s = synthetic_graph(6, 60, 2);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for (i, p) in s.graph.poses.iter_mut() {
        if *i == 0 {
            continue;
        }
        let dt = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)).normalize() * 0.01;
        let dr = Vector3::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)).normalize() * 0.5f64.to_radians();
        *p = p.compose(&PoseSE3::from_scaled_axis(dr, dt));
    }
    for l in s.graph.landmarks.values_mut() {
        *l += Vector3::new(0.003, -0.002, 0.004);
    }
    let config = OptimizeConfig { huber: None, ..OptimizeConfig::default() };
    let summary = optimize(&mut s.graph, &cam, &config).unwrap();
    assert!(summary.final_cost <= summary.initial_cost);
    for (i, p) in &s.graph.poses {
        let gt = s.poses[*i];
        assert!((p.translation - gt.translation).norm() < 1e-5, "pose {i}");
        assert!(p.rotation.angle_to(&gt.rotation) < 1e-5, "pose {i}");
    }
    for (j, l) in &s.graph.landmarks {
        assert!((l - s.landmarks[*j]).norm() < 1e-5, "landmark {j}");
    }
}

#[test]
fn robust_kernel_downweights_swapped_association() {
    let cam = StereoCamera::default();
    let sigma = 1.0;
    let mut s = synthetic_graph(5, 50, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let normal = rand_distr::Normal::new(0.0, sigma).unwrap();
    for f in s.graph.stereo.iter_mut() {
        use rand_distr::Distribution;
        f.left.u += normal.sample(&mut rng);
        f.left.v += normal.sample(&mut rng);
        f.right.u += normal.sample(&mut rng);
        f.right.v += normal.sample(&mut rng);
    }
    // One observation re-pointed at a far landmark: ~100σ off.
    let bad = s
        .graph
        .stereo
        .iter()
        .position(|f| f.frame == 2)
        .unwrap();
    s.graph.stereo[bad].left.u += 100.0 * sigma;
    s.graph.stereo[bad].right.u += 100.0 * sigma;
    let summary = optimize(&mut s.graph, &cam, &OptimizeConfig::default()).unwrap();
    assert!(summary.final_cost <= summary.initial_cost);
    let mut sq = 0.0;
    let mut n = 0usize;
    for (k, f) in s.graph.stereo.iter().enumerate() {
        if k == bad {
            continue;
        }
        let r = f.residual(&s.graph.poses[&f.frame], &s.graph.landmarks[&f.landmark], &cam) * f.sigma_px;
        sq += r.norm_squared();
        n += 4;
    }
    let rms = (sq / n as f64).sqrt();
    assert!(rms < 2.0 * sigma, "inlier rms {rms}");
}

#[test]
fn gauge_follows_rigid_transform_of_inputs() {
    let cam = StereoCamera::default();
    let base = synthetic_graph(4, 30, 4);
    let g = PoseSE3::from_scaled_axis(Vector3::new(0.2, -0.1, 0.3), Vector3::new(1.0, -2.0, 0.5));
    let perturb = |graph: &mut FactorGraph| {
        for (i, p) in graph.poses.iter_mut() {
            if *i > 0 {
                *p = p.compose(&PoseSE3::from_translation(0.004, -0.003, 0.002));
            }
        }
    };
    let mut a = base.graph.clone();
    perturb(&mut a);
    let mut b = base.graph.clone();
    for p in b.poses.values_mut() {
        *p = g.compose(p);
    }
    perturb(&mut b);
    for l in b.landmarks.values_mut() {
        *l = g.apply(l);
    }
    for f in b.priors.iter_mut() {
        f.pose = g.compose(&f.pose);
    }
    let config = OptimizeConfig { huber: None, ..OptimizeConfig::default() };
    let sa = optimize(&mut a, &cam, &config).unwrap();
    let sb = optimize(&mut b, &cam, &config).unwrap();
    assert!((sa.final_cost - sb.final_cost).abs() < 1e-9);
    for (i, pa) in &a.poses {
        let pb = g.inverse().compose(&b.poses[i]);
        assert!((pa.translation - pb.translation).norm() < 1e-9);
    }
}

#[test]
fn lm_never_increases_cost() {
    let cam = StereoCamera::default();
    let mut s = synthetic_graph(5, 40, 6);
    for p in s.graph.poses.values_mut().skip(1) {
        *p = p.compose(&PoseSE3::from_translation(0.05, 0.02, -0.03));
    }
    let mut last = f64::INFINITY;
    for iters in 1..8 {
        let mut g = s.graph.clone();
        let config = OptimizeConfig { max_iters: iters, ..OptimizeConfig::default() };
        let summary = optimize(&mut g, &cam, &config).unwrap();
        assert!(summary.final_cost <= summary.initial_cost);
        assert!(summary.final_cost <= last + 1e-12);
        last = summary.final_cost;
    }
}

#[test]
fn unconstrained_pose_is_a_backend_failure() {
    let cam = StereoCamera::default();
    let mut graph = FactorGraph::new();
    graph.poses.insert(0, PoseSE3::identity());
    let err = optimize(&mut graph, &cam, &OptimizeConfig::default());
    assert!(matches!(err, Err(crate::Error::BackendFailure(_))));
}

fn stereo_frame(pose: &PoseSE3, landmarks: &[Point], frame: usize) -> (Vec<SeedKeypoint>, Vec<SeedKeypoint>, Assignment) {
    let cam = StereoCamera::default();
    let mut left = Vec::new();
    let mut right = Vec::new();
    for l in landmarks {
        if let Some((a, b)) = observe(pose, l, &cam) {
            left.push(SeedKeypoint::new(a, frame, Side::Left));
            right.push(SeedKeypoint::new(b, frame, Side::Right));
        }
    }
    let matches = (0..left.len()).map(|i| Match { u_index: i, v_index: i, cost: 0.0 }).collect();
    (left, right, Assignment { matches, unmatched_u: vec![], unmatched_v: vec![] })
}

#[test]
fn bootstrap_frame() {
    let cam = StereoCamera::default();
    let landmarks: Vec<Point> = (0..10).map(|i| Point::new(-0.2 + 0.04 * i as f64, 0.8, 0.01 * i as f64)).collect();
    let (left, right, stereo) = stereo_frame(&side_looking(0.0), &landmarks, 0);
    assert_eq!(left.len(), 10);
    let mut t = Tracker::new(cam, TrackerConfig::default());
    let (state, report) = t.add_frame(FrameInput { frame_id: 0, left: &left, right: &right, stereo: &stereo, temporal: None });
    assert_eq!(state.status, TrackStatus::Tracking);
    assert_eq!(report.new_landmarks, 10);
    assert_eq!(t.graph().landmarks.len(), 10);
    assert_eq!(t.graph().poses.len(), 1);
    assert_eq!(t.graph().priors.len(), 1);
    assert_eq!(t.landmarks().len(), 10);
}

#[test]
fn three_frames_without_temporal_matches_lose_track() {
    let cam = StereoCamera::default();
    let landmarks: Vec<Point> = (0..40).map(|i| Point::new(-0.3 + 0.02 * i as f64, 0.8, 0.005 * (i % 7) as f64)).collect();
    let mut t = Tracker::new(cam, TrackerConfig::default());
    let empty = Assignment::default();
    let mut state = TrackState::default();
    for k in 0..4 {
        let (left, right, stereo) = stereo_frame(&side_looking(0.01 * k as f64), &landmarks, k);
        let temporal = (k > 0).then_some(&empty);
        state = t.add_frame(FrameInput { frame_id: k, left: &left, right: &right, stereo: &stereo, temporal }).0;
        if k < 3 {
            assert_eq!(state.status, TrackStatus::Tracking, "frame {k}");
        }
    }
    assert_eq!(state.status, TrackStatus::Lost);
    assert_eq!(state.last_good_frame, Some(0));
    assert!(state.distance_mapped < 1e-9);
}

#[test]
fn distance_mapped_examples() {
    let traj: Vec<(usize, PoseSE3)> = (0..8).map(|i| (i, PoseSE3::from_translation(0.5 * i as f64, 0.0, 0.0))).collect();
    let lost = TrackState { status: TrackStatus::Lost, last_good_frame: Some(5), distance_mapped: 0.0, frames_tracked: 6 };
    let d = distance_mapped(&traj, &lost, 10.0);
    assert!((d.distance - 2.5).abs() < 1e-12);
    assert!((d.fraction - 0.25).abs() < 1e-12);

    let at_start = TrackState { status: TrackStatus::Lost, last_good_frame: None, distance_mapped: 0.0, frames_tracked: 0 };
    assert_eq!(distance_mapped(&traj, &at_start, 10.0).distance, 0.0);

    // full traversal, capped at the range length
    let full: Vec<(usize, PoseSE3)> = (0..90).map(|i| (i, PoseSE3::from_translation(0.04 * i as f64, 0.0, 0.0))).collect();
    let ok = TrackState { last_good_frame: Some(89), ..TrackState::default() };
    let d = distance_mapped(&full, &ok, 3.56);
    assert_eq!(d.distance, 3.56);
    assert_eq!(d.fraction, 1.0);
}

#[test]
fn tracking_straight_sequence() {
    let cam = StereoCamera::default();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let landmarks: Vec<Point> = (0..400)
        .map(|_| Point::new(rng.random_range(-0.6..2.2), rng.random_range(0.6..0.9), rng.random_range(-0.3..0.3)))
        .collect();
    let mut t = Tracker::new(cam, TrackerConfig::default()).with_initial_pose(side_looking(0.0));
    let mut prev_ids: Vec<usize> = Vec::new();
    let mut distances = Vec::new();
    for k in 0..12 {
        let pose = side_looking(0.1 * k as f64);
        let mut left = Vec::new();
        let mut right = Vec::new();
        let mut ids = Vec::new();
        for (j, l) in landmarks.iter().enumerate() {
            if let Some((a, b)) = observe(&pose, l, &cam) {
                left.push(SeedKeypoint::new(a, k, Side::Left));
                right.push(SeedKeypoint::new(b, k, Side::Right));
                ids.push(j);
            }
        }
        let stereo = Assignment {
            matches: (0..left.len()).map(|i| Match { u_index: i, v_index: i, cost: 0.0 }).collect(),
            ..Assignment::default()
        };
        let temporal = Assignment {
            matches: prev_ids
                .iter()
                .enumerate()
                .filter_map(|(i, id)| ids.iter().position(|x| x == id).map(|j| Match { u_index: i, v_index: j, cost: 0.0 }))
                .collect(),
            ..Assignment::default()
        };
        let (state, report) = t.add_frame(FrameInput { frame_id: k, left: &left, right: &right, stereo: &stereo, temporal: Some(&temporal) });
        assert_eq!(state.status, TrackStatus::Tracking);
        if k > 0 {
            assert_eq!(report.temporal_inliers, report.temporal_candidates);
        }
        distances.push(state.distance_mapped);
        prev_ids = ids;
    }
    assert!(distances.windows(2).all(|w| w[1] >= w[0]));
    for (k, p) in t.trajectory() {
        assert!((p.translation - side_looking(0.1 * k as f64).translation).norm() < 1e-6, "frame {k}");
    }
    assert!((t.state().distance_mapped - 1.1).abs() < 1e-6);
}
