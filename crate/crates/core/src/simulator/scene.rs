use std::f64::consts::PI;

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::config::{SceneConfig, SceneKind};
use super::shell::{fibonacci_sphere, jitter_on_shell, pitch_for_count, ring_lattice, uniform_on_shell, Ellipsoid};
use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::features::{BBox, SeedKeypoint};
use crate::geometry::{project, ImagePoint, Point, PoseSE3, Side, StereoCamera};

/// Detected seeds of one stereo frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameDetections {
    pub frame: usize,
    pub left: Vec<SeedKeypoint>,
    pub right: Vec<SeedKeypoint>,
}

impl FrameDetections {
    pub fn side(&self, side: Side) -> &[SeedKeypoint] {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GtSeed {
    pub id: usize,
    pub panicle: usize,
    pub position: [f64; 3],
}

impl GtSeed {
    pub fn point(&self) -> Point {
        Point::from(self.position)
    }
}

/// Seed id behind each keypoint of one frame; `None` marks a false positive.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrameCorrespondence {
    pub frame: usize,
    pub left: Vec<Option<usize>>,
    pub right: Vec<Option<usize>>,
}

impl FrameCorrespondence {
    pub fn side(&self, side: Side) -> &[Option<usize>] {
        match side {
            Side::Left => &self.left,
            Side::Right => &self.right,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GroundTruth {
    pub seeds: Vec<GtSeed>,
    /// Left camera to world, one per frame.
    pub poses: Vec<PoseSE3>,
    pub correspondences: Vec<FrameCorrespondence>,
    /// Noise-free world-frame surface samples (orbit scenes).
    pub surface: Option<PointCloud>,
}

impl GroundTruth {
    pub fn seed_centers(&self) -> Vec<Point> {
        self.seeds.iter().map(GtSeed::point).collect()
    }

    pub fn correspondence(&self, frame: usize) -> Option<&FrameCorrespondence> {
        self.correspondences.iter().find(|c| c.frame == frame)
    }
}

/// Counters collected while emitting detections.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct DetectionStats {
    /// Visible seed images before dropout.
    pub visible: usize,
    pub dropped: usize,
    pub false_positives: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub config: SceneConfig,
    pub frames: Vec<FrameDetections>,
    pub gt: Option<GroundTruth>,
    /// Noisy arm poses (orbit scenes).
    pub fk_poses: Option<Vec<PoseSE3>>,
    /// Dense clouds in each frame's left-camera coordinates (orbit scenes).
    pub clouds: Option<Vec<PointCloud>>,
    pub stats: DetectionStats,
}

impl Scene {
    pub fn ground_truth(&self) -> Result<&GroundTruth> {
        self.gt.as_ref().ok_or(Error::NoGroundTruth)
    }
}

/// Camera-to-world rotation for a camera looking along `forward` with image
/// rows running along `down`.
fn look_rotation(forward: Vector3<f64>, down: Vector3<f64>) -> UnitQuaternion<f64> {
    let z = forward.normalize();
    let y = (down - z * down.dot(&z)).normalize();
    let x = y.cross(&z);
    let m = Matrix3::from_columns(&[x, y, z]);
    UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(m))
}

fn right_center(pose: &PoseSE3, cam: &StereoCamera) -> Point {
    pose.apply(&Point::new(cam.baseline, 0.0, 0.0))
}

struct Panicle {
    shell: Ellipsoid,
    /// Indices into the scene's seed list.
    seeds: std::ops::Range<usize>,
}

fn seed_box(center: ImagePoint, seed_radius: f64, z: f64, cam: &StereoCamera) -> BBox {
    let half = (seed_radius * cam.fx / z).max(1.0);
    BBox::around(center, half, half)
}

/// Emits one image's detections: visible seeds minus dropouts, with pixel
/// noise, plus uniform false positives, in shuffled order.
#[allow(clippy::too_many_arguments)]
fn detect_side(
    rng: &mut ChaCha8Rng,
    config: &SceneConfig,
    frame: usize,
    side: Side,
    pose: &PoseSE3,
    panicles: &[Panicle],
    seed_world: &[Point],
    stats: &mut DetectionStats,
) -> (Vec<SeedKeypoint>, Vec<Option<usize>>) {
    let cam = &config.camera;
    let viewer = match side {
        Side::Left => pose.translation.into(),
        Side::Right => right_center(pose, cam),
    };
    let to_cam = pose.inverse();
    let reach = 3.0 * (config.trajectory.standoff.max(config.orbit.radius) + 1.0);
    let noise = Normal::new(0.0, config.noise.pixel_sigma).expect("validated sigma");
    let mut emitted: Vec<(ImagePoint, f64, Option<usize>)> = Vec::new();
    for (pi, panicle) in panicles.iter().enumerate() {
        if (panicle.shell.center - viewer).norm() > reach {
            continue;
        }
        for id in panicle.seeds.clone() {
            let p = seed_world[id];
            if !panicle.shell.faces(&p, &viewer) {
                continue;
            }
            let occluded = panicles.iter().enumerate().any(|(qi, q)| {
                qi != pi
                    && (q.shell.center - viewer).norm() < (p - viewer).norm() + q.shell.bounding_radius()
                    && q.shell.blocks(&viewer, &p)
            });
            if occluded {
                continue;
            }
            let pc = to_cam.apply(&p);
            let Ok(uv) = project(&pc, cam, side) else {
                continue;
            };
            if !cam.contains(&uv) {
                continue;
            }
            stats.visible += 1;
            if rng.random::<f64>() < config.noise.dropout {
                stats.dropped += 1;
                continue;
            }
            let noisy = ImagePoint::new(uv.u + noise.sample(rng), uv.v + noise.sample(rng));
            emitted.push((noisy, pc.z, Some(id)));
        }
    }
    let n_true = emitted.len() as u64;
    let n_fp = if config.noise.false_positive_rate > 0.0 && n_true > 0 {
        Binomial::new(n_true, config.noise.false_positive_rate)
            .expect("validated rate")
            .sample(rng) as usize
    } else {
        0
    };
    stats.false_positives += n_fp;
    let typical_z = match config.kind {
        SceneKind::Range => config.trajectory.standoff,
        SceneKind::Orbit => config.orbit.radius,
    };
    for _ in 0..n_fp {
        let uv = ImagePoint::new(
            rng.random_range(0.0..cam.width as f64),
            rng.random_range(0.0..cam.height as f64),
        );
        emitted.push((uv, typical_z, None));
    }
    emitted.shuffle(rng);
    let radius = config.seed_lattice.seed_radius;
    emitted
        .into_iter()
        .map(|(uv, z, id)| {
            let mut kp = SeedKeypoint::new(uv, frame, side);
            kp.bbox = Some(seed_box(uv, radius, z, cam));
            (kp, id)
        })
        .unzip()
}

fn lattice_pitch(config: &SceneConfig, nominal: &Ellipsoid) -> f64 {
    config
        .seed_lattice
        .seed_pitch
        .unwrap_or_else(|| pitch_for_count(nominal, config.seeds_per_panicle))
}

fn place_seeds(
    rng: &mut ChaCha8Rng,
    config: &SceneConfig,
    shells: Vec<Ellipsoid>,
) -> (Vec<Panicle>, Vec<GtSeed>) {
    let nominal = Ellipsoid {
        center: Point::origin(),
        orientation: UnitQuaternion::identity(),
        semi_axes: Vector3::from(config.seed_lattice.semi_axes),
    };
    let pitch = lattice_pitch(config, &nominal);
    let mut seeds = Vec::new();
    let mut panicles = Vec::new();
    for (pi, shell) in shells.into_iter().enumerate() {
        let lattice = ring_lattice(&shell.semi_axes, pitch);
        let body = jitter_on_shell(&shell, &lattice, config.seed_lattice.jitter * pitch, rng);
        let start = seeds.len();
        for q in body {
            let p = shell.to_world(&q);
            seeds.push(GtSeed {
                id: seeds.len(),
                panicle: pi,
                position: [p.x, p.y, p.z],
            });
        }
        panicles.push(Panicle {
            shell,
            seeds: start..seeds.len(),
        });
    }
    (panicles, seeds)
}

/// Seed positions for one frame, including wind displacement.
fn seeds_at_frame(rng: &mut ChaCha8Rng, config: &SceneConfig, panicles: &[Panicle], seeds: &[GtSeed]) -> Vec<Point> {
    let mut world: Vec<Point> = seeds.iter().map(GtSeed::point).collect();
    if config.noise.seed_jitter > 0.0 {
        let wind = Normal::new(0.0, config.noise.seed_jitter).expect("validated sigma");
        for p in panicles {
            let d = Vector3::new(wind.sample(rng), wind.sample(rng), wind.sample(rng));
            for id in p.seeds.clone() {
                world[id] += d;
            }
        }
    }
    world
}

fn generate_detections(
    rng: &mut ChaCha8Rng,
    config: &SceneConfig,
    poses: &[PoseSE3],
    panicles: &[Panicle],
    seeds: &[GtSeed],
) -> (Vec<FrameDetections>, Vec<FrameCorrespondence>, DetectionStats) {
    let mut stats = DetectionStats::default();
    let mut frames = Vec::with_capacity(poses.len());
    let mut corr = Vec::with_capacity(poses.len());
    for (k, pose) in poses.iter().enumerate() {
        let world = seeds_at_frame(rng, config, panicles, seeds);
        let (left, left_ids) = detect_side(rng, config, k, Side::Left, pose, panicles, &world, &mut stats);
        let (right, right_ids) = detect_side(rng, config, k, Side::Right, pose, panicles, &world, &mut stats);
        frames.push(FrameDetections { frame: k, left, right });
        corr.push(FrameCorrespondence {
            frame: k,
            left: left_ids,
            right: right_ids,
        });
    }
    (frames, corr, stats)
}

/// A straight pass along a row of panicles. World x runs along the row, z
/// up; the camera starts at the origin looking along +y.
pub fn generate_range_scene(config: &SceneConfig) -> Result<Scene> {
    config.validate()?;
    let mut config = config.clone();
    config.kind = SceneKind::Range;
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);

    let span = config.panicle_spacing * (config.panicle_count - 1) as f64;
    let x0 = (config.range_length - span) / 2.0;
    let axes = Vector3::from(config.seed_lattice.semi_axes);
    let shells: Vec<Ellipsoid> = (0..config.panicle_count)
        .map(|i| {
            let x = x0 + i as f64 * config.panicle_spacing + rng.random_range(-0.1..0.1) * config.panicle_spacing;
            let y = config.trajectory.standoff + rng.random_range(-0.05..0.05);
            let z = rng.random_range(-0.08..0.08);
            let orientation = UnitQuaternion::from_euler_angles(
                rng.random_range(-0.15..0.15),
                rng.random_range(-0.15..0.15),
                rng.random_range(0.0..2.0 * PI),
            );
            Ellipsoid {
                center: Point::new(x, y, z),
                orientation,
                semi_axes: axes * rng.random_range(0.9..1.1),
            }
        })
        .collect();
    let (panicles, seeds) = place_seeds(&mut rng, &config, shells);

    let facing = look_rotation(Vector3::y(), -Vector3::z());
    let poses: Vec<PoseSE3> = (0..config.frame_count())
        .map(|k| {
            let x = k as f64 * config.trajectory.speed;
            let z = config.trajectory.vertical_bounce * (2.0 * PI * k as f64 / 12.0).sin();
            PoseSE3::new(facing, Vector3::new(x, 0.0, z))
        })
        .collect();

    let (frames, correspondences, stats) = generate_detections(&mut rng, &config, &poses, &panicles, &seeds);
    Ok(Scene {
        config,
        frames,
        gt: Some(GroundTruth {
            seeds,
            poses,
            correspondences,
            surface: None,
        }),
        fk_poses: None,
        clouds: None,
        stats,
    })
}

/// Camera pose on the orbit at `angle` radians, looking at the panicle axis.
pub fn orbit_pose(radius: f64, angle: f64) -> PoseSE3 {
    let eye = Vector3::new(radius * angle.cos(), radius * angle.sin(), 0.0);
    PoseSE3::new(look_rotation(-eye, -Vector3::z()), eye)
}

/// An arm circling one panicle centred at the world origin. Produces seed
/// detections, dense per-frame clouds and noisy forward-kinematics poses.
pub fn generate_orbit_scene(config: &SceneConfig) -> Result<Scene> {
    config.validate()?;
    let mut config = config.clone();
    config.kind = SceneKind::Orbit;
    config.panicle_count = 1;
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let o = config.orbit;

    let shell = Ellipsoid {
        center: Point::origin(),
        orientation: UnitQuaternion::identity(),
        semi_axes: Vector3::from(config.seed_lattice.semi_axes),
    };
    let (panicles, seeds) = place_seeds(&mut rng, &config, vec![shell]);
    let poses: Vec<PoseSE3> = (0..config.frame_count())
        .map(|k| orbit_pose(o.radius, (k as f64 * o.step_degrees).to_radians()))
        .collect();

    // Static world surface: sphere samples around each seed plus clutter on
    // the shell between seeds.
    let r_seed = config.seed_lattice.seed_radius;
    let sphere = fibonacci_sphere(o.points_per_seed);
    let n_clutter = (o.clutter_density * shell.area()).round() as usize;
    let clutter: Vec<Point> = uniform_on_shell(&shell, n_clutter, &mut rng)
        .iter()
        .map(|q| shell.to_world(q))
        .collect();
    struct Sample {
        point: Point,
        normal: Vector3<f64>,
        seed: Option<usize>,
    }
    let mut samples: Vec<Sample> = Vec::new();
    for s in &seeds {
        for d in &sphere {
            samples.push(Sample {
                point: s.point() + d * r_seed,
                normal: *d,
                seed: Some(s.id),
            });
        }
    }
    for p in clutter {
        samples.push(Sample {
            point: p,
            normal: shell.normal_at(&p),
            seed: None,
        });
    }
    let surface = PointCloud::new(samples.iter().map(|s| s.point).collect());

    let (frames, correspondences, stats) = generate_detections(&mut rng, &config, &poses, &panicles, &seeds);

    let cam = config.camera;
    let mut clouds = Vec::with_capacity(poses.len());
    for pose in &poses {
        let viewer: Point = pose.translation.into();
        let to_cam = pose.inverse();
        let mut points = Vec::new();
        let mut colors = Vec::new();
        for s in &samples {
            if s.normal.dot(&(viewer - s.point)) <= 0.0 {
                continue;
            }
            if let Some(id) = s.seed {
                if !shell.faces(&seeds[id].point(), &viewer) {
                    continue;
                }
            }
            let pc = to_cam.apply(&s.point);
            match project(&pc, &cam, Side::Left) {
                Ok(uv) if cam.contains(&uv) => {}
                _ => continue,
            }
            let sigma_z = pc.z * pc.z / (cam.fx * cam.baseline) * o.cloud_disparity_sigma;
            let dz = if sigma_z > 0.0 {
                Normal::new(0.0, sigma_z).expect("finite sigma").sample(&mut rng)
            } else {
                0.0
            };
            points.push(pc * ((pc.z + dz) / pc.z));
            colors.push(if s.seed.is_some() { [235, 205, 140] } else { [110, 120, 70] });
        }
        clouds.push(PointCloud::with_colors(points, colors));
    }

    let t_noise = Normal::new(0.0, o.fk_translation_sigma).expect("validated sigma");
    let r_noise = Normal::new(0.0, o.fk_rotation_sigma_degrees.to_radians()).expect("validated sigma");
    let fk_poses = poses
        .iter()
        .map(|p| {
            let dt = Vector3::new(t_noise.sample(&mut rng), t_noise.sample(&mut rng), t_noise.sample(&mut rng));
            let dr = Vector3::new(r_noise.sample(&mut rng), r_noise.sample(&mut rng), r_noise.sample(&mut rng));
            p.compose(&PoseSE3::from_scaled_axis(dr, dt))
        })
        .collect();

    Ok(Scene {
        config,
        frames,
        gt: Some(GroundTruth {
            seeds,
            poses,
            correspondences,
            surface: Some(surface),
        }),
        fk_poses: Some(fk_poses),
        clouds: Some(clouds),
        stats,
    })
}

/// Dispatches on the configured scene kind.
pub fn generate_scene(config: &SceneConfig) -> Result<Scene> {
    match config.kind {
        SceneKind::Range => generate_range_scene(config),
        SceneKind::Orbit => generate_orbit_scene(config),
    }
}
