//! Deterministic synthetic scenes with full ground truth: a stereo rig
//! driving past a row of panicles, and an arm orbiting a single panicle.
//!
//! Panicle geometry defaults (300 seeds on a 0.06 × 0.06 × 0.15 m shell)
//! are plausible stand-ins, not measured values.

mod config;
mod dir;
mod scene;
pub mod shell;

pub use config::{LatticeConfig, NoiseConfig, OrbitConfig, SceneConfig, SceneKind, TrajectoryConfig};
pub use dir::{cloud_file_name, read_scene, write_scene, DetectionRecord};
pub use scene::{
    generate_orbit_scene, generate_range_scene, generate_scene, orbit_pose, DetectionStats, FrameCorrespondence,
    FrameDetections, GroundTruth, GtSeed, Scene,
};

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{project, triangulate, Side};

    fn noiseless(mut c: SceneConfig) -> SceneConfig {
        c.noise.pixel_sigma = 0.0;
        c.noise.dropout = 0.0;
        c.noise.false_positive_rate = 0.0;
        c
    }

    fn short_range() -> SceneConfig {
        SceneConfig {
            range_length: 1.0,
            panicle_count: 4,
            ..SceneConfig::default()
        }
    }

    #[test]
    fn frame_count_arithmetic() {
        assert_eq!(SceneConfig::default().frame_count(), 41);
        assert_eq!(SceneConfig::orbit().frame_count(), 19);
        let c = SceneConfig {
            range_length: 3.56,
            ..SceneConfig::default()
        };
        assert_eq!(c.frame_count(), 36);
    }

    #[test]
    fn invalid_configs_name_the_field() {
        let mut c = SceneConfig::default();
        c.range_length = -1.0;
        let msg = c.validate().unwrap_err().to_string();
        assert!(msg.contains("range_length"), "{msg}");
        let mut c = SceneConfig::default();
        c.noise.dropout = 1.5;
        assert!(c.validate().unwrap_err().to_string().contains("noise.dropout"));
        let mut c = SceneConfig::orbit();
        c.orbit.arc_degrees = 400.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn config_toml_round_trip() {
        let mut c = SceneConfig::orbit();
        c.seed_lattice.seed_pitch = Some(0.02);
        c.rng_seed = 7;
        let back = SceneConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_toml(), c.to_toml());
        assert!(SceneConfig::from_toml("bogus_key = 1").is_err());
        let partial = SceneConfig::from_toml("rng_seed = 9\n[noise]\ndropout = 0.3\n").unwrap();
        assert_eq!(partial.noise.dropout, 0.3);
        assert_eq!(partial.noise.pixel_sigma, 1.0);
    }

    #[test]
    fn same_seed_same_scene() {
        let a = generate_range_scene(&short_range()).unwrap();
        let b = generate_range_scene(&short_range()).unwrap();
        assert_eq!(a, b);
        let mut other = short_range();
        other.rng_seed += 1;
        assert_ne!(generate_range_scene(&other).unwrap().frames, a.frames);
    }

    #[test]
    fn noiseless_detections_back_triangulate_to_seeds() {
        let scene = generate_range_scene(&noiseless(short_range())).unwrap();
        let gt = scene.gt.as_ref().unwrap();
        let cam = scene.config.camera;
        let mut checked = 0;
        for (f, corr) in scene.frames.iter().zip(&gt.correspondences) {
            let pose = gt.poses[f.frame];
            for (i, id) in corr.left.iter().enumerate() {
                let id = id.expect("no false positives");
                let Some(j) = corr.right.iter().position(|x| *x == Some(id)) else {
                    continue;
                };
                let p = pose.apply(&triangulate(&f.left[i].center, &f.right[j].center, &cam).unwrap());
                assert!((p - gt.seeds[id].point()).norm() < 1e-9);
                checked += 1;
            }
        }
        assert!(checked > 1000, "{checked}");
    }

    #[test]
    fn dropout_rate_is_honoured() {
        let mut c = SceneConfig::default();
        c.noise.dropout = 0.2;
        let scene = generate_range_scene(&c).unwrap();
        let s = scene.stats;
        assert!(s.visible >= 10_000, "{}", s.visible);
        let rate = s.dropped as f64 / s.visible as f64;
        assert!((0.18..=0.22).contains(&rate), "{rate}");
    }

    #[test]
    fn false_positives_are_marked() {
        let scene = generate_range_scene(&short_range()).unwrap();
        let gt = scene.gt.unwrap();
        let fp: usize = gt
            .correspondences
            .iter()
            .map(|c| c.left.iter().chain(&c.right).filter(|x| x.is_none()).count())
            .sum();
        assert_eq!(fp, scene.stats.false_positives);
        assert!(fp > 0);
    }

    #[test]
    fn correspondences_are_complete_and_visible() {
        let scene = generate_range_scene(&noiseless(short_range())).unwrap();
        let gt = scene.gt.as_ref().unwrap();
        let cam = scene.config.camera;
        for (f, corr) in scene.frames.iter().zip(&gt.correspondences) {
            assert_eq!(f.left.len(), corr.left.len());
            assert_eq!(f.right.len(), corr.right.len());
            for side in [Side::Left, Side::Right] {
                let ids: Vec<usize> = corr.side(side).iter().flatten().copied().collect();
                let mut dedup = ids.clone();
                dedup.sort_unstable();
                dedup.dedup();
                assert_eq!(dedup.len(), ids.len(), "seed detected twice");
                for id in ids {
                    let pc = gt.poses[f.frame].inverse().apply(&gt.seeds[id].point());
                    assert!(pc.z > 0.0);
                    assert!(cam.contains(&project(&pc, &cam, side).unwrap()));
                }
            }
        }
    }

    #[test]
    fn orbit_has_expected_shape() {
        let scene = generate_orbit_scene(&SceneConfig::orbit()).unwrap();
        assert_eq!(scene.frames.len(), 19);
        assert_eq!(scene.clouds.as_ref().unwrap().len(), 19);
        assert_eq!(scene.fk_poses.as_ref().unwrap().len(), 19);
        let gt = scene.gt.as_ref().unwrap();
        // far-side seeds never appear
        for (f, corr) in scene.frames.iter().zip(&gt.correspondences) {
            let eye = gt.poses[f.frame].translation;
            for id in corr.left.iter().flatten() {
                assert!(gt.seeds[*id].point().coords.xy().dot(&eye.xy()) > -1e-9);
            }
        }
        let n = scene.clouds.as_ref().unwrap()[0].len();
        assert!(n > 500, "{n}");
    }

    #[test]
    fn orbit_clouds_are_exact_without_noise() {
        let mut c = noiseless(SceneConfig::orbit());
        c.orbit.cloud_disparity_sigma = 0.0;
        c.orbit.fk_translation_sigma = 0.0;
        c.orbit.fk_rotation_sigma_degrees = 0.0;
        let scene = generate_orbit_scene(&c).unwrap();
        let gt = scene.gt.as_ref().unwrap();
        let surface = gt.surface.as_ref().unwrap();
        let fk = scene.fk_poses.as_ref().unwrap();
        let cloud = &scene.clouds.as_ref().unwrap()[4];
        for p in cloud.points.iter().take(200) {
            let w = fk[4].apply(p);
            let best = surface.points.iter().map(|s| (s - w).norm()).fold(f64::INFINITY, f64::min);
            assert!(best < 1e-9);
        }
    }

    #[test]
    fn scene_directory_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = SceneConfig::orbit();
        c.orbit.arc_degrees = 10.0;
        let scene = generate_orbit_scene(&c).unwrap();
        write_scene(dir.path(), &scene).unwrap();
        let back = read_scene(dir.path()).unwrap();
        assert_eq!(back.config, scene.config);
        assert_eq!(back.frames, scene.frames);
        let (gb, ga) = (back.gt.as_ref().unwrap(), scene.gt.as_ref().unwrap());
        assert_eq!(gb.seeds, ga.seeds);
        assert_eq!(gb.correspondences, ga.correspondences);
        assert_eq!(gb.surface.as_ref().unwrap().points, ga.surface.as_ref().unwrap().points);
        for (a, b) in gb.poses.iter().zip(&ga.poses) {
            assert!((a.translation - b.translation).norm() < 1e-15);
            assert!(a.rotation.angle_to(&b.rotation) < 1e-7);
        }
        assert_eq!(back.fk_poses.as_ref().unwrap().len(), 3);
        for (a, b) in back.fk_poses.unwrap().iter().zip(scene.fk_poses.as_ref().unwrap()) {
            assert!((a.translation - b.translation).norm() < 1e-15);
        }
        assert_eq!(back.clouds, scene.clouds);
    }
}
