//! Metrics: maximum distance mapped, matching accuracy against simulator
//! truth, trajectory error, and the paired ICP-mode comparison.

use std::fmt;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::association::Assignment;
use crate::error::{Error, Result};
use crate::geometry::{Point, PoseSE3};
use crate::icp::{blur_metric, fuse, umeyama, BlurMetric, IcpMode};
use crate::io::round9;
use crate::pipeline::{run_reconstruct, PairMatch, ReconstructConfig, ReconstructOutput};
use crate::simulator::{generate_orbit_scene, Scene, SceneConfig};

/// Distance mapped on one range, or a run that produced no map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mapped {
    Meters(f64),
    Failed,
}

impl Mapped {
    /// Failed runs count as zero meters.
    pub fn meters(&self) -> f64 {
        match self {
            Mapped::Meters(m) => *m,
            Mapped::Failed => 0.0,
        }
    }
}

impl fmt::Display for Mapped {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Mapped::Meters(m) => write!(f, "{m:.2}"),
            Mapped::Failed => f.write_str("Failed"),
        }
    }
}

impl Serialize for Mapped {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Mapped::Meters(m) => s.serialize_f64(*m),
            Mapped::Failed => s.serialize_str("Failed"),
        }
    }
}

impl<'de> Deserialize<'de> for Mapped {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Number(m) => Ok(Mapped::Meters(m)),
            Raw::Text(t) if t.eq_ignore_ascii_case("failed") => Ok(Mapped::Failed),
            Raw::Text(t) => Err(serde::de::Error::custom(format!("expected meters or \"Failed\", got `{t}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RangeResult {
    pub range_id: String,
    pub range_length: f64,
    pub mapped: Mapped,
}

impl RangeResult {
    pub fn validate(&self) -> Result<()> {
        if !(self.range_length > 0.0) {
            return Err(Error::config(format!("range {}", self.range_id), "length must be > 0"));
        }
        if let Mapped::Meters(m) = self.mapped {
            if !(0.0..=self.range_length + 1e-9).contains(&m) {
                return Err(Error::config(
                    format!("range {}", self.range_id),
                    format!("mapped {m} m outside [0, {}]", self.range_length),
                ));
            }
        }
        Ok(())
    }

    pub fn fraction(&self) -> f64 {
        self.mapped.meters() / self.range_length
    }
}

/// Mean over ranges of mapped / length, with failed runs at zero.
pub fn aggregate_distance_mapped(results: &[RangeResult]) -> Result<f64> {
    if results.is_empty() {
        return Err(Error::EmptyInput);
    }
    for r in results {
        r.validate()?;
    }
    Ok(results.iter().map(RangeResult::fraction).sum::<f64>() / results.len() as f64)
}

/// A published results table: one mapped distance per method and range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PublishedTable {
    pub title: String,
    pub methods: Vec<String>,
    pub ranges: Vec<PublishedRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PublishedRow {
    pub id: u32,
    pub length: f64,
    pub mapped: Vec<Mapped>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PublishedTables {
    pub table1: PublishedTable,
    pub table2: PublishedTable,
}

/// The bundled transcription of the published tables.
pub const BUNDLED_TABLES: &str = include_str!("../data/published_tables.toml");

impl PublishedTables {
    pub fn parse(text: &str) -> Result<Self> {
        let t: PublishedTables = toml::from_str(text).map_err(|e| Error::parse("table data", e))?;
        t.table1.validate("table1")?;
        t.table2.validate("table2")?;
        Ok(t)
    }

    pub fn bundled() -> Self {
        Self::parse(BUNDLED_TABLES).expect("bundled table data is well formed")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub mean_fraction: f64,
}

impl PublishedTable {
    fn validate(&self, name: &str) -> Result<()> {
        if self.ranges.is_empty() || self.methods.is_empty() {
            return Err(Error::config(name, "table has no rows or no methods"));
        }
        for row in &self.ranges {
            if row.mapped.len() != self.methods.len() {
                return Err(Error::config(
                    format!("{name} range {}", row.id),
                    format!("{} values for {} methods", row.mapped.len(), self.methods.len()),
                ));
            }
        }
        for m in &self.methods {
            aggregate_distance_mapped(&self.results(m).expect("method listed"))?;
        }
        Ok(())
    }

    /// Per-range results of one method.
    pub fn results(&self, method: &str) -> Option<Vec<RangeResult>> {
        let col = self.methods.iter().position(|m| m == method)?;
        Some(
            self.ranges
                .iter()
                .map(|r| RangeResult {
                    range_id: r.id.to_string(),
                    range_length: r.length,
                    mapped: r.mapped[col],
                })
                .collect(),
        )
    }

    pub fn summaries(&self) -> Result<Vec<MethodSummary>> {
        self.methods
            .iter()
            .map(|m| {
                Ok(MethodSummary {
                    method: m.clone(),
                    mean_fraction: round9(aggregate_distance_mapped(&self.results(m).expect("method listed"))?),
                })
            })
            .collect()
    }

    /// Plain-text rendering: one row per range, then the per-method means.
    pub fn render(&self) -> Result<String> {
        use std::fmt::Write as _;
        let mut s = String::new();
        writeln!(s, "{}", self.title).ok();
        write!(s, "{:<18}", "range (length)").ok();
        for m in &self.methods {
            write!(s, " {m:>12}").ok();
        }
        s.push('\n');
        for r in &self.ranges {
            write!(s, "{:<18}", format!("{} ({:.2} m)", r.id, r.length)).ok();
            for v in &r.mapped {
                write!(s, " {:>12}", v.to_string()).ok();
            }
            s.push('\n');
        }
        write!(s, "{:<18}", "mean fraction").ok();
        for m in self.summaries()? {
            write!(s, " {:>11.1}%", 100.0 * m.mean_fraction).ok();
        }
        s.push('\n');
        Ok(s)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["range_id".to_string(), "length".to_string()];
        header.extend(self.methods.iter().cloned());
        w.write_record(&header).map_err(|e| Error::parse("csv", e))?;
        for r in &self.ranges {
            let mut rec = vec![r.id.to_string(), r.length.to_string()];
            rec.extend(r.mapped.iter().map(|m| match m {
                Mapped::Meters(v) => v.to_string(),
                Mapped::Failed => "Failed".to_string(),
            }));
            w.write_record(&rec).map_err(|e| Error::parse("csv", e))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::parse("csv", e))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Confusion counts of predicted matches against ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchReport {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    /// `None` when nothing was predicted.
    pub precision: Option<f64>,
    /// `None` when ground truth holds no pairs.
    pub recall: Option<f64>,
    pub f1: Option<f64>,
}

impl MatchReport {
    pub fn from_counts(tp: usize, fp: usize, fn_: usize) -> Self {
        let precision = (tp + fp > 0).then(|| tp as f64 / (tp + fp) as f64);
        let recall = (tp + fn_ > 0).then(|| tp as f64 / (tp + fn_) as f64);
        let f1 = match (precision, recall) {
            (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
            (Some(_), Some(_)) => Some(0.0),
            _ => None,
        };
        Self {
            tp,
            fp,
            fn_,
            precision,
            recall,
            f1,
        }
    }

    /// Pools counts (micro-averaging).
    pub fn merge(&self, other: &MatchReport) -> MatchReport {
        Self::from_counts(self.tp + other.tp, self.fp + other.fp, self.fn_ + other.fn_)
    }

    pub fn empty() -> Self {
        Self::from_counts(0, 0, 0)
    }
}

/// Scores `predicted` given the seed id behind every keypoint of both
/// images (`None` for false positives).
pub fn match_accuracy(predicted: &Assignment, gt_u: &[Option<usize>], gt_v: &[Option<usize>]) -> Result<MatchReport> {
    let mut tp = 0;
    let mut fp = 0;
    for m in &predicted.matches {
        let (Some(a), Some(b)) = (gt_u.get(m.u_index), gt_v.get(m.v_index)) else {
            return Err(Error::FrameMismatch(format!(
                "match ({}, {}) outside the ground-truth tables",
                m.u_index, m.v_index
            )));
        };
        match (a, b) {
            (Some(a), Some(b)) if a == b => tp += 1,
            _ => fp += 1,
        }
    }
    let mut in_v: Vec<usize> = gt_v.iter().flatten().copied().collect();
    in_v.sort_unstable();
    let pairs = gt_u.iter().flatten().filter(|id| in_v.binary_search(id).is_ok()).count();
    Ok(MatchReport::from_counts(tp, fp, pairs - tp))
}

/// Micro-averaged accuracy over every matched pair of a simulated scene.
pub fn scene_match_accuracy(scene: &Scene, pairs: &[PairMatch]) -> Result<MatchReport> {
    use crate::geometry::Side;
    use crate::pipeline::PairKind;
    let gt = scene.ground_truth()?;
    let mut total = MatchReport::empty();
    for p in pairs {
        let a = gt.correspondence(p.frame_a).ok_or(Error::MissingGroundTruth(p.frame_a))?;
        let b = gt.correspondence(p.frame_b).ok_or(Error::MissingGroundTruth(p.frame_b))?;
        let (u, v) = match p.kind {
            PairKind::Stereo => (a.side(Side::Left), b.side(Side::Right)),
            PairKind::Temporal => (a.side(Side::Left), b.side(Side::Left)),
        };
        total = total.merge(&match_accuracy(&p.assignment, u, v)?);
    }
    Ok(total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ate {
    pub rmse: f64,
    pub per_frame: Vec<(usize, f64)>,
}

/// Absolute trajectory error after rigid (no-scale) alignment of the
/// estimate onto ground truth.
pub fn trajectory_ate(estimated: &[(usize, PoseSE3)], ground_truth: &[(usize, PoseSE3)]) -> Result<Ate> {
    let mut est = estimated.to_vec();
    let mut gt = ground_truth.to_vec();
    est.sort_by_key(|(f, _)| *f);
    gt.sort_by_key(|(f, _)| *f);
    if est.len() != gt.len() || est.iter().zip(&gt).any(|(a, b)| a.0 != b.0) {
        return Err(Error::FrameMismatch("estimated and ground-truth frame ids differ".into()));
    }
    if est.len() < 3 {
        return Err(Error::FrameMismatch(format!("need at least 3 frames, got {}", est.len())));
    }
    let src: Vec<Point> = est.iter().map(|(_, p)| p.translation.into()).collect();
    let dst: Vec<Point> = gt.iter().map(|(_, p)| p.translation.into()).collect();
    let align = umeyama(&src, &dst);
    let per_frame: Vec<(usize, f64)> = est
        .iter()
        .zip(src.iter().zip(&dst))
        .map(|((f, _), (s, d))| (*f, (align.apply(s) - d).norm()))
        .collect();
    let rmse = (per_frame.iter().map(|(_, e)| e * e).sum::<f64>() / per_frame.len() as f64).sqrt();
    Ok(Ate { rmse, per_frame })
}

/// Mean translational error of each pose relative to the first one.
pub fn relative_pose_error(estimated: &[PoseSE3], ground_truth: &[PoseSE3]) -> Result<f64> {
    if estimated.len() != ground_truth.len() || estimated.len() < 2 {
        return Err(Error::FrameMismatch("pose lists must match and hold two or more poses".into()));
    }
    let (e0, g0) = (estimated[0].inverse(), ground_truth[0].inverse());
    let sum: f64 = estimated
        .iter()
        .zip(ground_truth)
        .skip(1)
        .map(|(e, g)| (e0.compose(e).translation - g0.compose(g).translation).norm())
        .sum();
    Ok(sum / (estimated.len() - 1) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModeResult {
    pub mode: IcpMode,
    pub pose_error: f64,
    pub seed_rms: f64,
    pub spread: f64,
    pub failed_registrations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IcpComparison {
    pub rng_seed: u64,
    pub full_cloud: ModeResult,
    pub seed_centers: ModeResult,
}

impl IcpComparison {
    pub fn seed_centers_wins(&self) -> bool {
        self.seed_centers.pose_error < self.full_cloud.pose_error
    }
}

/// Scores a finished reconstruction of `scene` against its ground truth.
pub fn score_reconstruction(scene: &Scene, mode: IcpMode, out: &ReconstructOutput) -> Result<ModeResult> {
    let gt = scene.ground_truth()?;
    let pose_error = relative_pose_error(&out.poses, &gt.poses)?;
    // Sharpness is judged on the undecimated model.
    let clouds = scene.clouds.as_ref().ok_or(Error::MissingInput("clouds"))?;
    let frames: Vec<_> = clouds.iter().cloned().zip(out.poses.iter().copied()).collect();
    let fused = fuse(&frames, None);
    // Express the model in the ground-truth frame of the first camera.
    let to_gt = gt.poses[0].compose(&out.poses[0].inverse());
    let BlurMetric { seed_rms, spread, .. } = blur_metric(
        &fused.transformed(&to_gt),
        &gt.seed_centers(),
        scene.config.seed_lattice.seed_radius,
    )?;
    Ok(ModeResult {
        mode,
        pose_error: round9(pose_error),
        seed_rms: round9(seed_rms),
        spread: round9(spread),
        failed_registrations: out.registrations.iter().filter(|r| r.fallback.is_some()).count(),
    })
}

fn evaluate_mode(scene: &Scene, config: &ReconstructConfig) -> Result<ModeResult> {
    scene.ground_truth()?;
    let out = run_reconstruct(scene, config)?;
    score_reconstruction(scene, config.mode, &out)
}

/// Runs both registration modes on the same orbit scene.
pub fn compare_icp_modes(scene: &Scene, config: &ReconstructConfig) -> Result<IcpComparison> {
    let mut full = *config;
    full.mode = IcpMode::FullCloud;
    let mut seeds = *config;
    seeds.mode = IcpMode::SeedCenters;
    Ok(IcpComparison {
        rng_seed: scene.config.rng_seed,
        full_cloud: evaluate_mode(scene, &full)?,
        seed_centers: evaluate_mode(scene, &seeds)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcpTrials {
    pub trials: Vec<IcpComparison>,
    pub seed_centers_wins: usize,
    pub mean_spread_full_cloud: f64,
    pub mean_spread_seed_centers: f64,
    pub mean_pose_error_full_cloud: f64,
    pub mean_pose_error_seed_centers: f64,
}

/// Per-trial scene seeds drawn from one master seed.
pub fn trial_seeds(master_seed: u64, n: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    (0..n).map(|_| rng.next_u64()).collect()
}

/// `n` paired orbit trials, each on a freshly seeded scene.
pub fn compare_icp_trials(base: &SceneConfig, config: &ReconstructConfig, n: usize, master_seed: u64) -> Result<IcpTrials> {
    let mut trials = Vec::with_capacity(n);
    for seed in trial_seeds(master_seed, n) {
        let mut c = base.clone();
        c.rng_seed = seed;
        let scene = generate_orbit_scene(&c)?;
        trials.push(compare_icp_modes(&scene, config)?);
    }
    if trials.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mean = |f: &dyn Fn(&IcpComparison) -> f64| round9(trials.iter().map(f).sum::<f64>() / trials.len() as f64);
    Ok(IcpTrials {
        seed_centers_wins: trials.iter().filter(|t| t.seed_centers_wins()).count(),
        mean_spread_full_cloud: mean(&|t| t.full_cloud.spread),
        mean_spread_seed_centers: mean(&|t| t.seed_centers.spread),
        mean_pose_error_full_cloud: mean(&|t| t.full_cloud.pose_error),
        mean_pose_error_seed_centers: mean(&|t| t.seed_centers.pose_error),
        trials,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::association::Match;
    use nalgebra::Vector3;
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::{Distribution, Normal};

    fn table_fraction(method: &str) -> f64 {
        let t = PublishedTables::bundled();
        aggregate_distance_mapped(&t.table1.results(method).unwrap()).unwrap()
    }

    #[test]
    fn published_averages() {
        // hand-derived from the table rows
        let ours = [3.56 / 3.56, 5.0 / 5.0, 2.85 / 4.42, 2.31 / 4.10, 2.31 / 4.78, 3.2 / 3.94, 3.72 / 5.03, 4.43 / 4.43];
        let oracle = ours.iter().sum::<f64>() / 8.0;
        assert!((table_fraction("OURS") - oracle).abs() < 1e-12);
        assert!((table_fraction("OURS") - 0.78).abs() < 0.005);
        assert!((table_fraction("SIFT + BF") - 0.38).abs() < 0.005);
        let t = PublishedTables::bundled();
        let orb = aggregate_distance_mapped(&t.table2.results("ORB-SLAM2").unwrap()).unwrap();
        assert!((orb - 0.06).abs() < 0.005, "{orb}");
    }

    #[test]
    fn failed_counts_as_zero() {
        let all_failed: Vec<RangeResult> = (0..3)
            .map(|i| RangeResult {
                range_id: i.to_string(),
                range_length: 4.0,
                mapped: Mapped::Failed,
            })
            .collect();
        assert_eq!(aggregate_distance_mapped(&all_failed).unwrap(), 0.0);
        assert!(matches!(aggregate_distance_mapped(&[]), Err(Error::EmptyInput)));
    }

    #[test]
    fn malformed_tables_are_rejected() {
        let bad = BUNDLED_TABLES.replacen("mapped = [1.86, 1.55, 0.2, 1.55, 3.56]", "mapped = [1.86]", 1);
        assert!(PublishedTables::parse(&bad).is_err());
        let bad = BUNDLED_TABLES.replacen(", \"Failed\",", ", \"lost\",", 1);
        assert!(PublishedTables::parse(&bad).is_err());
    }

    #[test]
    fn table_renders_and_exports() {
        let t = PublishedTables::bundled().table1;
        let text = t.render().unwrap();
        assert!(text.contains("78.0%"), "{text}");
        assert!(text.contains("38.2%"), "{text}");
        let csv = t.to_csv().unwrap();
        assert!(csv.starts_with("range_id,length,SIFT + BF"));
        assert_eq!(csv.lines().count(), 9);
    }

    fn identity_assignment(n: usize) -> Assignment {
        Assignment {
            matches: (0..n).map(|i| Match { u_index: i, v_index: i, cost: 0.0 }).collect(),
            ..Assignment::default()
        }
    }

    #[test]
    fn perfect_prediction() {
        let ids: Vec<Option<usize>> = (0..10).map(Some).collect();
        let r = match_accuracy(&identity_assignment(10), &ids, &ids).unwrap();
        assert_eq!((r.precision, r.recall, r.f1), (Some(1.0), Some(1.0), Some(1.0)));
    }

    #[test]
    fn empty_prediction() {
        let ids: Vec<Option<usize>> = (0..10).map(Some).collect();
        let r = match_accuracy(&Assignment::default(), &ids, &ids).unwrap();
        assert_eq!(r.precision, None);
        assert_eq!(r.recall, Some(0.0));
        assert_eq!(r.fn_, 10);
    }

    #[test]
    fn one_swap_among_ten() {
        let ids: Vec<Option<usize>> = (0..10).map(Some).collect();
        let mut a = identity_assignment(10);
        a.matches[3].v_index = 4;
        a.matches[4].v_index = 3;
        let r = match_accuracy(&a, &ids, &ids).unwrap();
        assert_eq!((r.tp, r.fp, r.fn_), (8, 2, 2));
        assert_eq!(r.precision, Some(0.8));
        assert_eq!(r.recall, Some(0.8));
    }

    #[test]
    fn false_positive_matches_count_against_precision() {
        let u = vec![Some(1), None];
        let v = vec![Some(1), None];
        let r = match_accuracy(&identity_assignment(2), &u, &v).unwrap();
        assert_eq!((r.tp, r.fp, r.fn_), (1, 1, 0));
        let err = match_accuracy(&identity_assignment(3), &u, &v);
        assert!(err.is_err());
    }

    #[test]
    fn report_json_uses_null_for_undefined() {
        let json = serde_json::to_value(MatchReport::from_counts(0, 0, 3)).unwrap();
        assert!(json["precision"].is_null());
        assert_eq!(json["fn"], 3);
    }

    fn line_trajectory(n: usize) -> Vec<(usize, PoseSE3)> {
        (0..n)
            .map(|i| (i, PoseSE3::from_scaled_axis(Vector3::new(0.0, 0.01 * i as f64, 0.0), Vector3::new(0.1 * i as f64, 0.02 * (i as f64).sin(), 0.0))))
            .collect()
    }

    #[test]
    fn ate_of_truth_and_shifted_truth() {
        let gt = line_trajectory(20);
        assert!(trajectory_ate(&gt, &gt).unwrap().rmse < 1e-12);
        let shifted: Vec<_> = gt.iter().map(|(f, p)| (*f, PoseSE3::from_translation(1.0, -2.0, 0.5).compose(p))).collect();
        assert!(trajectory_ate(&shifted, &gt).unwrap().rmse < 1e-9);
        assert!(trajectory_ate(&gt[..2], &gt[..2]).is_err());
        assert!(trajectory_ate(&gt[1..], &gt[..19]).is_err());
    }

    #[test]
    fn ate_of_straight_line_is_defined() {
        let gt: Vec<_> = (0..10).map(|i| (i, PoseSE3::from_translation(0.1 * i as f64, 0.0, 0.0))).collect();
        assert!(trajectory_ate(&gt, &gt).unwrap().rmse < 1e-12);
    }

    #[test]
    fn ate_noise_floor_matches_chi_oracle() {
        let gt: Vec<(usize, PoseSE3)> = (0..1000)
            .map(|i| (i, PoseSE3::from_translation(0.01 * i as f64, (0.05 * i as f64).sin(), (0.03 * i as f64).cos())))
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = Normal::new(0.0, 0.01).unwrap();
        let est: Vec<_> = gt
            .iter()
            .map(|(f, p)| (*f, PoseSE3::from_translation(n.sample(&mut rng), n.sample(&mut rng), n.sample(&mut rng)).compose(p)))
            .collect();
        let rmse = trajectory_ate(&est, &gt).unwrap().rmse;
        let s3 = 3f64.sqrt();
        assert!((0.008 * s3..=0.012 * s3).contains(&rmse), "{rmse}");
    }

    proptest! {
        #[test]
        fn ate_ignores_rigid_motion_of_estimate(
            axis in prop::array::uniform3(-3.0f64..3.0),
            t in prop::array::uniform3(-10.0f64..10.0),
            seed in 0u64..100,
        ) {
            let gt = line_trajectory(15);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let est: Vec<_> = gt.iter().map(|(f, p)| (*f, PoseSE3::from_translation(rng.random_range(-0.01..0.01), rng.random_range(-0.01..0.01), 0.0).compose(p))).collect();
            let g = PoseSE3::from_scaled_axis(Vector3::from(axis), Vector3::from(t));
            let moved: Vec<_> = est.iter().map(|(f, p)| (*f, g.compose(p))).collect();
            let a = trajectory_ate(&est, &gt).unwrap().rmse;
            let b = trajectory_ate(&moved, &gt).unwrap().rmse;
            prop_assert!((a - b).abs() < 1e-9);
        }

        #[test]
        fn f1_is_harmonic_mean(tp in 0usize..50, fp in 0usize..50, fn_ in 0usize..50) {
            let r = MatchReport::from_counts(tp, fp, fn_);
            if let (Some(p), Some(rc), Some(f)) = (r.precision, r.recall, r.f1) {
                prop_assert!((0.0..=1.0).contains(&p) && (0.0..=1.0).contains(&rc));
                if p + rc > 0.0 {
                    prop_assert_eq!(f, 2.0 * p * rc / (p + rc));
                }
            }
        }
    }

    #[test]
    fn trial_seeds_are_deterministic() {
        assert_eq!(trial_seeds(7, 5), trial_seeds(7, 5));
        assert_ne!(trial_seeds(7, 5), trial_seeds(8, 5));
    }
}
