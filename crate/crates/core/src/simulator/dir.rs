//! On-disk scene layout.
//!
//! ```text
//! config.toml               echoed scene configuration
//! detections.jsonl          one record per frame and side
//! clouds/frame_%04d.ply     dense clouds, left camera frame (orbit)
//! gt/seeds.json             seed ids, panicle ids, world positions
//! gt/trajectory.txt         true left-camera poses
//! gt/correspondences.jsonl  seed id behind every keypoint (null = false positive)
//! gt/surface.ply            noise-free surface samples (orbit)
//! fk/trajectory.txt         forward-kinematics poses (orbit)
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::SceneConfig;
use super::scene::{DetectionStats, FrameCorrespondence, FrameDetections, GroundTruth, GtSeed, Scene};
use crate::cloud::{read_ply, write_ply};
use crate::error::{Error, Result};
use crate::features::{BBox, SeedKeypoint};
use crate::geometry::{ImagePoint, PoseSE3, Side};
use crate::io::{parse_jsonl, read_file, read_json, read_trajectory, to_jsonl, write_file, write_json, write_trajectory};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub frame: usize,
    pub side: Side,
    pub keypoints: Vec<[f64; 2]>,
    /// `[x_min, y_min, x_max, y_max]` per keypoint.
    #[serde(default)]
    pub bboxes: Vec<[f64; 4]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CorrespondenceRecord {
    frame: usize,
    side: Side,
    seed_ids: Vec<Option<usize>>,
}

pub fn cloud_file_name(frame: usize) -> String {
    format!("frame_{frame:04}.ply")
}

fn detection_records(frames: &[FrameDetections]) -> Vec<DetectionRecord> {
    let mut out = Vec::with_capacity(2 * frames.len());
    for f in frames {
        for side in [Side::Left, Side::Right] {
            let kps = f.side(side);
            out.push(DetectionRecord {
                frame: f.frame,
                side,
                keypoints: kps.iter().map(|k| [k.center.u, k.center.v]).collect(),
                bboxes: kps
                    .iter()
                    .filter_map(|k| k.bbox.map(|b| [b.x_min, b.y_min, b.x_max, b.y_max]))
                    .collect(),
            });
        }
    }
    out
}

fn indexed(poses: &[PoseSE3]) -> Vec<(usize, PoseSE3)> {
    poses.iter().copied().enumerate().collect()
}

pub fn write_scene(dir: &Path, scene: &Scene) -> Result<()> {
    write_file(&dir.join("config.toml"), &scene.config.to_toml())?;
    write_file(&dir.join("detections.jsonl"), &to_jsonl(&detection_records(&scene.frames)))?;
    if let Some(clouds) = &scene.clouds {
        for (k, c) in clouds.iter().enumerate() {
            write_ply(&dir.join("clouds").join(cloud_file_name(k)), c)?;
        }
    }
    if let Some(gt) = &scene.gt {
        write_json(&dir.join("gt/seeds.json"), &gt.seeds)?;
        write_trajectory(&dir.join("gt/trajectory.txt"), &indexed(&gt.poses))?;
        let mut records = Vec::new();
        for c in &gt.correspondences {
            for side in [Side::Left, Side::Right] {
                records.push(CorrespondenceRecord {
                    frame: c.frame,
                    side,
                    seed_ids: c.side(side).to_vec(),
                });
            }
        }
        write_file(&dir.join("gt/correspondences.jsonl"), &to_jsonl(&records))?;
        if let Some(surface) = &gt.surface {
            write_ply(&dir.join("gt/surface.ply"), surface)?;
        }
    }
    if let Some(fk) = &scene.fk_poses {
        write_trajectory(&dir.join("fk/trajectory.txt"), &indexed(fk))?;
    }
    Ok(())
}

fn to_frames(records: Vec<DetectionRecord>) -> Result<Vec<FrameDetections>> {
    let mut by_frame: BTreeMap<usize, FrameDetections> = BTreeMap::new();
    for r in records {
        if !r.bboxes.is_empty() && r.bboxes.len() != r.keypoints.len() {
            return Err(Error::parse(
                "detections.jsonl",
                format!("frame {} {:?}: {} boxes for {} keypoints", r.frame, r.side, r.bboxes.len(), r.keypoints.len()),
            ));
        }
        let kps: Vec<SeedKeypoint> = r
            .keypoints
            .iter()
            .enumerate()
            .map(|(i, [u, v])| {
                let mut k = SeedKeypoint::new(ImagePoint::new(*u, *v), r.frame, r.side);
                k.bbox = r.bboxes.get(i).map(|b| BBox {
                    x_min: b[0],
                    y_min: b[1],
                    x_max: b[2],
                    y_max: b[3],
                });
                k
            })
            .collect();
        let entry = by_frame.entry(r.frame).or_insert_with(|| FrameDetections {
            frame: r.frame,
            left: Vec::new(),
            right: Vec::new(),
        });
        match r.side {
            Side::Left => entry.left = kps,
            Side::Right => entry.right = kps,
        }
    }
    Ok(by_frame.into_values().collect())
}

fn poses_in_order(path: &Path, frames: usize) -> Result<Vec<PoseSE3>> {
    let traj = read_trajectory(path)?;
    if traj.len() != frames || traj.iter().enumerate().any(|(i, (f, _))| *f != i) {
        return Err(Error::FrameMismatch(format!(
            "{}: expected frames 0..{frames}",
            path.display()
        )));
    }
    Ok(traj.into_iter().map(|(_, p)| p).collect())
}

/// Loads a scene directory. Clouds, ground truth and FK poses are optional;
/// a present-but-unreadable file is an error.
pub fn read_scene(dir: &Path) -> Result<Scene> {
    let config = SceneConfig::from_toml(&read_file(&dir.join("config.toml"))?)?;
    let records = parse_jsonl(&read_file(&dir.join("detections.jsonl"))?, "detections.jsonl")?;
    let frames = to_frames(records)?;
    let n = frames.len();

    let clouds_dir = dir.join("clouds");
    let clouds = if clouds_dir.is_dir() {
        Some(
            (0..n)
                .map(|k| read_ply(&clouds_dir.join(cloud_file_name(k))))
                .collect::<Result<Vec<_>>>()?,
        )
    } else {
        None
    };

    let gt_dir = dir.join("gt");
    let gt = if gt_dir.is_dir() {
        let seeds: Vec<GtSeed> = read_json(&gt_dir.join("seeds.json"))?;
        let poses = poses_in_order(&gt_dir.join("trajectory.txt"), n)?;
        let records: Vec<CorrespondenceRecord> =
            parse_jsonl(&read_file(&gt_dir.join("correspondences.jsonl"))?, "correspondences.jsonl")?;
        let mut by_frame: BTreeMap<usize, FrameCorrespondence> = BTreeMap::new();
        for r in records {
            let e = by_frame.entry(r.frame).or_insert_with(|| FrameCorrespondence {
                frame: r.frame,
                ..FrameCorrespondence::default()
            });
            match r.side {
                Side::Left => e.left = r.seed_ids,
                Side::Right => e.right = r.seed_ids,
            }
        }
        let surface_path = gt_dir.join("surface.ply");
        let surface = if surface_path.is_file() { Some(read_ply(&surface_path)?) } else { None };
        Some(GroundTruth {
            seeds,
            poses,
            correspondences: by_frame.into_values().collect(),
            surface,
        })
    } else {
        None
    };

    let fk_path = dir.join("fk/trajectory.txt");
    let fk_poses = if fk_path.is_file() { Some(poses_in_order(&fk_path, n)?) } else { None };

    Ok(Scene {
        config,
        frames,
        gt,
        fk_poses,
        clouds,
        stats: DetectionStats::default(),
    })
}
