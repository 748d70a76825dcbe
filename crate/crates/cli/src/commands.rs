use std::path::{Path, PathBuf};

use fieldmap::association::MatchRecord;
use fieldmap::cloud::write_ply;
use fieldmap::eval::{
    compare_icp_modes, compare_icp_trials, scene_match_accuracy, score_reconstruction, trajectory_ate, IcpComparison,
    IcpTrials, MatchReport, ModeResult, PublishedTables, BUNDLED_TABLES,
};
use fieldmap::icp::IcpMode;
use fieldmap::io::{read_file, round9, write_file, write_json, write_trajectory};
use fieldmap::pipeline::{
    run_matching, run_reconstruct, run_slam, FailureMode, MatcherKind, PairKind, Registration, SlamMetrics,
};
use fieldmap::simulator::{generate_scene, read_scene, write_scene, Scene, SceneConfig, SceneKind};
use serde::Serialize;

use crate::failure::{CliResult, Failure};
use crate::run_config::{load_scene_config, RunConfig};
use crate::MatchFlags;

fn save_json<T: Serialize>(path: &Path, value: &T) -> CliResult {
    write_json(path, value).map_err(Failure::output)
}

fn save_text(path: &Path, text: &str) -> CliResult {
    write_file(path, text).map_err(Failure::output)
}

fn load_scene(dir: &Path) -> CliResult<Scene> {
    if !dir.is_dir() {
        return Err(Failure::Input(format!("{}: not a scene directory", dir.display())));
    }
    read_scene(dir).map_err(Failure::input)
}

#[derive(Serialize)]
struct SimulateMetrics {
    kind: SceneKind,
    frames: usize,
    path_length: f64,
    detections: usize,
    visible: usize,
    dropped: usize,
    false_positives: usize,
}

pub fn simulate(config: Option<&Path>, out: &Path, seed: Option<u64>) -> CliResult {
    let mut c: SceneConfig = load_scene_config(config)?;
    if let Some(s) = seed {
        c.rng_seed = s;
    }
    c.validate().map_err(Failure::config)?;
    let scene = generate_scene(&c).map_err(Failure::stage)?;
    write_scene(out, &scene).map_err(Failure::output)?;
    let s = scene.stats;
    save_json(
        &out.join("metrics.json"),
        &SimulateMetrics {
            kind: c.kind,
            frames: scene.frames.len(),
            path_length: round9(c.path_length()),
            detections: scene.frames.iter().map(|f| f.left.len() + f.right.len()).sum(),
            visible: s.visible,
            dropped: s.dropped,
            false_positives: s.false_positives,
        },
    )?;
    log::info!("wrote {} frames to {}", scene.frames.len(), out.display());
    Ok(())
}

#[derive(Serialize)]
struct MatchMetrics {
    pairs: usize,
    matches: usize,
    stereo: Option<MatchReport>,
    temporal: Option<MatchReport>,
    overall: Option<MatchReport>,
}

pub fn match_scene(scene_dir: &Path, out: &Path, flags: &MatchFlags) -> CliResult {
    let run = RunConfig::resolve(flags)?;
    let scene = load_scene(scene_dir)?;
    let pairs = run_matching(&scene, &run.matching).map_err(Failure::stage)?;
    for p in &pairs {
        let name = match p.kind {
            PairKind::Stereo => format!("stereo_{:04}.json", p.frame_a),
            PairKind::Temporal => format!("temporal_{:04}_{:04}.json", p.frame_a, p.frame_b),
        };
        let record = MatchRecord::new(p.frame_a, p.frame_b, &p.assignment, run.matching.params);
        save_json(&out.join("matches").join(name), &record)?;
    }
    let accuracy = |kind: Option<PairKind>| -> CliResult<Option<MatchReport>> {
        if scene.gt.is_none() {
            return Ok(None);
        }
        let subset: Vec<_> = pairs.iter().filter(|p| kind.is_none_or(|k| p.kind == k)).cloned().collect();
        scene_match_accuracy(&scene, &subset).map(Some).map_err(Failure::stage)
    };
    let metrics = MatchMetrics {
        pairs: pairs.len(),
        matches: pairs.iter().map(|p| p.assignment.len()).sum(),
        stereo: accuracy(Some(PairKind::Stereo))?,
        temporal: accuracy(Some(PairKind::Temporal))?,
        overall: accuracy(None)?,
    };
    save_text(&out.join("config.toml"), &run.to_toml())?;
    save_json(&out.join("metrics.json"), &metrics)
}

/// The `metrics.json` of a SLAM run.
#[derive(Debug, Clone, Copy, Serialize)]
struct SlamSummary {
    distance_mapped: f64,
    fraction: f64,
    frames_tracked: usize,
    failure_mode: FailureMode,
}

impl From<&SlamMetrics> for SlamSummary {
    fn from(m: &SlamMetrics) -> Self {
        Self {
            distance_mapped: m.distance_mapped,
            fraction: m.fraction,
            frames_tracked: m.frames_tracked,
            failure_mode: m.failure_mode,
        }
    }
}

pub fn slam(scene_dir: &Path, out: &Path, flags: &MatchFlags) -> CliResult {
    let run = RunConfig::resolve(flags)?;
    let scene = load_scene(scene_dir)?;
    let result = run_slam(&scene, &run.slam()).map_err(Failure::stage)?;
    write_trajectory(&out.join("trajectory.txt"), &result.trajectory).map_err(Failure::output)?;
    write_ply(&out.join("map.ply"), &result.map).map_err(Failure::output)?;
    save_text(&out.join("config.toml"), &run.to_toml())?;
    save_json(&out.join("metrics.json"), &SlamSummary::from(&result.metrics))?;
    log::info!(
        "mapped {:.3} m ({:.1}%), failure mode {:?}",
        result.metrics.distance_mapped,
        100.0 * result.metrics.fraction,
        result.metrics.failure_mode
    );
    Ok(())
}

#[derive(Serialize)]
struct ReconstructMetrics {
    mode: IcpMode,
    frames: usize,
    fallbacks: usize,
    points: usize,
    mean_rms: f64,
    /// Present when the scene carries ground truth.
    ground_truth: Option<ModeResult>,
}

pub fn reconstruct(scene_dir: &Path, out: &Path, icp: Option<IcpMode>, flags: &MatchFlags) -> CliResult {
    let mut run = RunConfig::resolve(flags)?;
    if let Some(mode) = icp {
        run.reconstruct.mode = mode;
    }
    let scene = load_scene(scene_dir)?;
    let result = run_reconstruct(&scene, &run.reconstruct).map_err(Failure::stage)?;
    let registered: Vec<&Registration> = result.registrations.iter().skip(1).filter(|r| r.fallback.is_none()).collect();
    let mean_rms = if registered.is_empty() {
        0.0
    } else {
        registered.iter().map(|r| r.rms).sum::<f64>() / registered.len() as f64
    };
    let ground_truth = match scene.gt {
        Some(_) => Some(score_reconstruction(&scene, run.reconstruct.mode, &result).map_err(Failure::stage)?),
        None => None,
    };
    write_ply(&out.join("panicle.ply"), &result.fused).map_err(Failure::output)?;
    save_json(&out.join("registration.json"), &result.registrations)?;
    let poses: Vec<_> = result.poses.iter().copied().enumerate().collect();
    write_trajectory(&out.join("trajectory.txt"), &poses).map_err(Failure::output)?;
    save_text(&out.join("config.toml"), &run.to_toml())?;
    save_json(
        &out.join("metrics.json"),
        &ReconstructMetrics {
            mode: run.reconstruct.mode,
            frames: result.poses.len(),
            fallbacks: result.registrations.iter().filter(|r| r.fallback.is_some()).count(),
            points: result.fused.len(),
            mean_rms: round9(mean_rms),
            ground_truth,
        },
    )
}

#[derive(Debug, Clone, Serialize)]
struct MatcherEval {
    slam: SlamSummary,
    matching: MatchReport,
    /// Over the frames the run mapped; absent below three frames.
    ate_rmse: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum SceneEval {
    Range {
        scene: String,
        length: f64,
        structural: MatcherEval,
        baseline: MatcherEval,
    },
    Orbit {
        scene: String,
        comparison: IcpComparison,
    },
}

#[derive(Debug, Clone, Default, Serialize)]
struct EvalSummary {
    range_scenes: usize,
    mean_fraction_structural: Option<f64>,
    mean_fraction_baseline: Option<f64>,
    f1_structural: Option<f64>,
    f1_baseline: Option<f64>,
    orbit_comparisons: usize,
    seed_centers_wins: usize,
    mean_spread_full_cloud: Option<f64>,
    mean_spread_seed_centers: Option<f64>,
}

#[derive(Serialize)]
struct EvalReport {
    scenes: Vec<SceneEval>,
    icp_trials: Option<IcpTrials>,
    summary: EvalSummary,
}

fn eval_matcher(scene: &Scene, run: &RunConfig, kind: MatcherKind) -> fieldmap::Result<MatcherEval> {
    let mut slam = run.slam();
    slam.matching.matcher = kind;
    let pairs = run_matching(scene, &slam.matching)?;
    let matching = scene_match_accuracy(scene, &pairs)?;
    let result = run_slam(scene, &slam)?;
    let gt = scene.ground_truth()?;
    let ate_rmse = if result.trajectory.len() >= 3 {
        let truth: Vec<_> = result.trajectory.iter().map(|(f, _)| (*f, gt.poses[*f])).collect();
        Some(round9(trajectory_ate(&result.trajectory, &truth)?.rmse))
    } else {
        None
    };
    Ok(MatcherEval {
        slam: SlamSummary::from(&result.metrics),
        matching,
        ate_rmse,
    })
}

fn eval_scene(name: String, scene: &Scene, run: &RunConfig) -> fieldmap::Result<SceneEval> {
    scene.ground_truth()?;
    Ok(match scene.config.kind {
        SceneKind::Range => SceneEval::Range {
            scene: name,
            length: round9(scene.config.path_length()),
            structural: eval_matcher(scene, run, MatcherKind::Structural)?,
            baseline: eval_matcher(scene, run, MatcherKind::Baseline)?,
        },
        SceneKind::Orbit => SceneEval::Orbit {
            scene: name,
            comparison: compare_icp_modes(scene, &run.reconstruct)?,
        },
    })
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| round9(values.iter().sum::<f64>() / values.len() as f64))
}

fn summarize(scenes: &[SceneEval], trials: Option<&IcpTrials>) -> EvalSummary {
    let mut s = EvalSummary::default();
    let (mut fs, mut fb) = (Vec::new(), Vec::new());
    let (mut ms, mut mb) = (MatchReport::empty(), MatchReport::empty());
    let mut comparisons: Vec<IcpComparison> = Vec::new();
    for e in scenes {
        match e {
            SceneEval::Range { structural, baseline, .. } => {
                fs.push(structural.slam.fraction);
                fb.push(baseline.slam.fraction);
                ms = ms.merge(&structural.matching);
                mb = mb.merge(&baseline.matching);
            }
            SceneEval::Orbit { comparison, .. } => comparisons.push(*comparison),
        }
    }
    if let Some(t) = trials {
        comparisons.extend(t.trials.iter().copied());
    }
    s.range_scenes = fs.len();
    s.mean_fraction_structural = mean(&fs);
    s.mean_fraction_baseline = mean(&fb);
    if !fs.is_empty() {
        s.f1_structural = ms.f1.map(round9);
        s.f1_baseline = mb.f1.map(round9);
    }
    s.orbit_comparisons = comparisons.len();
    s.seed_centers_wins = comparisons.iter().filter(|c| c.seed_centers_wins()).count();
    s.mean_spread_full_cloud = mean(&comparisons.iter().map(|c| c.full_cloud.spread).collect::<Vec<_>>());
    s.mean_spread_seed_centers = mean(&comparisons.iter().map(|c| c.seed_centers.spread).collect::<Vec<_>>());
    s
}

fn eval_csv(scenes: &[SceneEval]) -> CliResult<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Failure::Runtime(format!("csv: {e}"));
    w.write_record(["scene", "length", "structural", "baseline"]).map_err(err)?;
    for e in scenes {
        if let SceneEval::Range {
            scene,
            length,
            structural,
            baseline,
        } = e
        {
            w.write_record([
                scene.clone(),
                length.to_string(),
                structural.slam.distance_mapped.to_string(),
                baseline.slam.distance_mapped.to_string(),
            ])
            .map_err(err)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Failure::Runtime(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn eval(scene_dirs: &[PathBuf], out: &Path, trials: usize, seed: u64, csv: bool, flags: &MatchFlags) -> CliResult {
    if scene_dirs.is_empty() && trials == 0 {
        return Err(Failure::Config("nothing to evaluate: give scene directories or --trials".into()));
    }
    let run = RunConfig::resolve(flags)?;
    let scenes: Vec<Scene> = scene_dirs.iter().map(|d| load_scene(d)).collect::<CliResult<_>>()?;

    // Scenes are independent; results are collected in input order.
    let results: Vec<fieldmap::Result<SceneEval>> = std::thread::scope(|s| {
        let handles: Vec<_> = scene_dirs
            .iter()
            .zip(&scenes)
            .map(|(dir, scene)| {
                let run = &run;
                s.spawn(move || eval_scene(dir.display().to_string(), scene, run))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("evaluation thread panicked")).collect()
    });
    let evaluated: Vec<SceneEval> = results.into_iter().collect::<fieldmap::Result<_>>().map_err(Failure::stage)?;

    let icp_trials = if trials > 0 {
        Some(compare_icp_trials(&SceneConfig::orbit(), &run.reconstruct, trials, seed).map_err(Failure::stage)?)
    } else {
        None
    };
    let summary = summarize(&evaluated, icp_trials.as_ref());
    if csv {
        save_text(&out.join("report.csv"), &eval_csv(&evaluated)?)?;
    }
    save_text(&out.join("config.toml"), &run.to_toml())?;
    save_json(&out.join("metrics.json"), &summary)?;
    save_json(
        &out.join("report.json"),
        &EvalReport {
            scenes: evaluated,
            icp_trials,
            summary,
        },
    )
}

#[derive(Serialize)]
struct TableMetrics {
    table1: Vec<fieldmap::eval::MethodSummary>,
    table2: Vec<fieldmap::eval::MethodSummary>,
}

pub fn table1(data: Option<&Path>, out: Option<&Path>) -> CliResult {
    let text = match data {
        Some(p) => read_file(p).map_err(Failure::input)?,
        None => BUNDLED_TABLES.to_string(),
    };
    let tables = PublishedTables::parse(&text).map_err(|e| Failure::Config(e.to_string()))?;
    let config = |e: fieldmap::Error| Failure::Config(e.to_string());
    print!("{}", tables.table1.render().map_err(config)?);
    println!();
    print!("{}", tables.table2.render().map_err(config)?);
    let metrics = TableMetrics {
        table1: tables.table1.summaries().map_err(config)?,
        table2: tables.table2.summaries().map_err(config)?,
    };
    if let Some(out) = out {
        save_text(&out.join("table1.csv"), &tables.table1.to_csv().map_err(config)?)?;
        save_text(&out.join("table2.csv"), &tables.table2.to_csv().map_err(config)?)?;
        save_json(&out.join("metrics.json"), &metrics)?;
    }
    Ok(())
}
