//! Point-to-point ICP, seed-center clouds, fusion and a sharpness metric for
//! the fused panicle model.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::association::Assignment;
use crate::cloud::{voxel_downsample, PointCloud};
use crate::error::{Error, Result};
use crate::features::SeedKeypoint;
use crate::geometry::{triangulate, Point, PoseSE3, StereoCamera};

/// Voxel size applied to full clouds before registration and after fusion.
pub const DEFAULT_VOXEL: f64 = 0.03;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IcpMode {
    FullCloud,
    SeedCenters,
}

impl fmt::Display for IcpMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            IcpMode::FullCloud => "full-cloud",
            IcpMode::SeedCenters => "seed-centers",
        })
    }
}

impl FromStr for IcpMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "full-cloud" | "full_cloud" => Ok(IcpMode::FullCloud),
            "seed-centers" | "seed_centers" => Ok(IcpMode::SeedCenters),
            other => Err(Error::config(
                "icp",
                format!("unknown mode `{other}` (expected full-cloud or seed-centers)"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IcpConfig {
    pub mode: IcpMode,
    pub max_iterations: usize,
    pub correspondence_radius: f64,
    /// Stop once an iteration improves the inlier RMS by less than this (meters).
    pub convergence_tol: f64,
    pub trim_fraction: f64,
}

impl IcpConfig {
    pub fn for_mode(mode: IcpMode) -> Self {
        let correspondence_radius = match mode {
            IcpMode::FullCloud => 0.02,
            IcpMode::SeedCenters => 0.05,
        };
        Self {
            mode,
            max_iterations: 50,
            correspondence_radius,
            convergence_tol: 1e-6,
            trim_fraction: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.correspondence_radius > 0.0 && self.correspondence_radius.is_finite()) {
            return Err(Error::config("correspondence_radius", "must be positive"));
        }
        if !(0.0..0.5).contains(&self.trim_fraction) {
            return Err(Error::config("trim_fraction", "must lie in [0, 0.5)"));
        }
        if self.max_iterations == 0 {
            return Err(Error::config("max_iterations", "must be at least 1"));
        }
        if !(self.convergence_tol >= 0.0) {
            return Err(Error::config("convergence_tol", "must be non-negative"));
        }
        Ok(())
    }
}

impl Default for IcpConfig {
    fn default() -> Self {
        Self::for_mode(IcpMode::SeedCenters)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IcpResult {
    /// Maps source coordinates into the target frame.
    pub transform: PoseSE3,
    pub rms_error: f64,
    pub iterations: usize,
    pub converged: bool,
    pub inlier_count: usize,
}

/// Uniform hash grid for fixed-radius nearest-neighbour queries.
pub(crate) struct NeighborGrid<'a> {
    points: &'a [Point],
    cell: f64,
    buckets: HashMap<(i64, i64, i64), Vec<usize>>,
}

impl<'a> NeighborGrid<'a> {
    pub(crate) fn new(points: &'a [Point], cell: f64) -> Self {
        let mut buckets: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            buckets.entry(Self::key(p, cell)).or_default().push(i);
        }
        Self {
            points,
            cell,
            buckets,
        }
    }

    fn key(p: &Point, cell: f64) -> (i64, i64, i64) {
        (
            (p.x / cell).floor() as i64,
            (p.y / cell).floor() as i64,
            (p.z / cell).floor() as i64,
        )
    }

    /// Closest point within `cell` of `q`, ties broken by lower index.
    pub(crate) fn nearest(&self, q: &Point) -> Option<(usize, f64)> {
        let (kx, ky, kz) = Self::key(q, self.cell);
        let mut best: Option<(usize, f64)> = None;
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    let Some(bucket) = self.buckets.get(&(kx + dx, ky + dy, kz + dz)) else {
                        continue;
                    };
                    for &i in bucket {
                        let d = (self.points[i] - q).norm();
                        if d > self.cell {
                            continue;
                        }
                        let better = match best {
                            None => true,
                            Some((bi, bd)) => d < bd || (d == bd && i < bi),
                        };
                        if better {
                            best = Some((i, d));
                        }
                    }
                }
            }
        }
        best
    }
}

/// Least-squares rigid transform taking `src[i]` onto `dst[i]` (no scale).
pub fn rigid_fit(src: &[Point], dst: &[Point]) -> Result<PoseSE3> {
    assert_eq!(src.len(), dst.len());
    let n = src.len();
    if n < 3 {
        return Err(Error::InsufficientOverlap { found: n });
    }
    let ms = mean(src);
    let spread = src.iter().fold(Matrix3::zeros(), |acc, s| {
        let a = s.coords - ms;
        acc + a * a.transpose()
    });
    if is_collinear(&spread) {
        return Err(Error::Degenerate);
    }
    Ok(umeyama(src, dst))
}

fn mean(ps: &[Point]) -> Vector3<f64> {
    ps.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / ps.len() as f64
}

/// Closed-form rigid alignment without degeneracy checks. When the points
/// do not pin down the rotation, one of the optimal rotations is returned.
pub fn umeyama(src: &[Point], dst: &[Point]) -> PoseSE3 {
    assert_eq!(src.len(), dst.len());
    assert!(!src.is_empty(), "umeyama needs at least one pair");
    let ms = mean(src);
    let md = mean(dst);
    let mut cov = Matrix3::zeros();
    for (s, d) in src.iter().zip(dst) {
        cov += (d.coords - md) * (s.coords - ms).transpose();
    }
    let svd = cov.svd(true, true);
    let (u, v_t) = (svd.u.expect("u requested"), svd.v_t.expect("v_t requested"));
    let mut d = Matrix3::identity();
    if (u * v_t).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    let r = u * d * v_t;
    let rotation = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(r));
    let translation = md - rotation * ms;
    PoseSE3::new(rotation, translation)
}

fn is_collinear(scatter: &Matrix3<f64>) -> bool {
    let mut eig: Vec<f64> = scatter.symmetric_eigenvalues().iter().copied().collect();
    eig.sort_by(|a, b| b.total_cmp(a));
    eig[0] <= 0.0 || eig[1] <= 1e-12 * eig[0]
}

/// Registers `source` onto `target` starting from `initial`.
pub fn icp_align(
    source: &PointCloud,
    target: &PointCloud,
    initial: &PoseSE3,
    config: &IcpConfig,
) -> Result<IcpResult> {
    config.validate()?;
    if source.len() < 3 || target.len() < 3 {
        return Err(Error::InsufficientOverlap {
            found: source.len().min(target.len()),
        });
    }
    let grid = NeighborGrid::new(&target.points, config.correspondence_radius);
    let mut transform = *initial;
    let mut best_rms = f64::INFINITY;
    let mut result = IcpResult {
        transform,
        rms_error: f64::INFINITY,
        iterations: 0,
        converged: false,
        inlier_count: 0,
    };

    let mut pairs: Vec<(usize, usize, f64)> = Vec::with_capacity(source.len());
    let mut src = Vec::new();
    let mut dst = Vec::new();
    for iteration in 1..=config.max_iterations {
        pairs.clear();
        for (i, p) in source.points.iter().enumerate() {
            if let Some((j, d)) = grid.nearest(&transform.apply(p)) {
                pairs.push((i, j, d));
            }
        }
        if pairs.len() < 3 {
            return Err(Error::InsufficientOverlap { found: pairs.len() });
        }
        pairs.sort_by(|a, b| a.2.total_cmp(&b.2).then(a.0.cmp(&b.0)));
        let keep = ((pairs.len() as f64 * (1.0 - config.trim_fraction)).ceil() as usize)
            .clamp(3, pairs.len());
        pairs.truncate(keep);

        src.clear();
        dst.clear();
        src.extend(pairs.iter().map(|&(i, _, _)| source.points[i]));
        dst.extend(pairs.iter().map(|&(_, j, _)| target.points[j]));
        let before = rms(pairs.iter().map(|p| p.2));
        let candidate = rigid_fit(&src, &dst)?;
        let after = rms(src.iter().zip(&dst).map(|(s, d)| (candidate.apply(s) - d).norm()));

        // A re-association can only raise the RMS through the radius gate;
        // such a step is not taken.
        if after > best_rms {
            result.converged = true;
            break;
        }
        transform = candidate;
        best_rms = after;
        result = IcpResult {
            transform,
            rms_error: after,
            iterations: iteration,
            converged: false,
            inlier_count: keep,
        };
        if before - after < config.convergence_tol {
            result.converged = true;
            break;
        }
    }
    Ok(result)
}

fn rms(distances: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = distances.fold((0.0, 0usize), |(s, n), d| (s + d * d, n + 1));
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).sqrt()
    }
}

/// Triangulated centres of stereo-matched seeds, in the left camera frame.
/// Returns the cloud and the number of seeds skipped for bad disparity.
pub fn seed_center_cloud(
    left: &[SeedKeypoint],
    right: &[SeedKeypoint],
    stereo: &Assignment,
    cam: &StereoCamera,
) -> (PointCloud, usize) {
    let mut points = Vec::with_capacity(stereo.len());
    let mut skipped = 0;
    for m in &stereo.matches {
        match triangulate(&left[m.u_index].center, &right[m.v_index].center, cam) {
            Ok(p) => points.push(p),
            Err(_) => skipped += 1,
        }
    }
    (PointCloud::new(points), skipped)
}

/// Brings every frame into the world frame and concatenates. With `voxel`
/// set, the result is downsampled on that grid.
pub fn fuse(frames: &[(PointCloud, PoseSE3)], voxel: Option<f64>) -> PointCloud {
    let mut out = PointCloud::default();
    for (cloud, pose) in frames {
        out.extend(&cloud.transformed(pose));
    }
    match voxel {
        Some(cell) => voxel_downsample(&out, cell),
        None => out,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlurMetric {
    /// RMS distance of seed points to the nearest ground-truth seed surface.
    pub seed_rms: f64,
    /// Mean over seeds of the RMS distance of its points to their centroid.
    pub spread: f64,
    pub seeds_covered: usize,
}

/// Sharpness of a fused model against known seed spheres of `seed_radius`.
/// Points further than two radii from every seed are treated as clutter.
pub fn blur_metric(fused: &PointCloud, gt_seed_centers: &[Point], seed_radius: f64) -> Result<BlurMetric> {
    if gt_seed_centers.is_empty() {
        return Err(Error::NoGroundTruth);
    }
    if fused.is_empty() {
        return Err(Error::EmptyInput);
    }
    let reach = 2.0 * seed_radius;
    let grid = NeighborGrid::new(gt_seed_centers, reach);
    let mut per_seed: Vec<Vec<Point>> = vec![Vec::new(); gt_seed_centers.len()];
    let mut sq = 0.0;
    let mut n = 0usize;
    for p in &fused.points {
        if let Some((s, d)) = grid.nearest(p) {
            sq += (d - seed_radius).powi(2);
            n += 1;
            per_seed[s].push(*p);
        }
    }
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    let mut spread_sum = 0.0;
    let mut covered = 0usize;
    for pts in per_seed.iter().filter(|p| p.len() >= 2) {
        let c = pts.iter().fold(Vector3::zeros(), |a, p| a + p.coords) / pts.len() as f64;
        spread_sum += rms(pts.iter().map(|p| (p.coords - c).norm()));
        covered += 1;
    }
    Ok(BlurMetric {
        seed_rms: (sq / n as f64).sqrt(),
        spread: if covered == 0 { 0.0 } else { spread_sum / covered as f64 },
        seeds_covered: covered,
    })
}
