//! Levenberg–Marquardt over poses and landmarks with the landmark blocks
//! eliminated by Schur complement.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector, Matrix3, Matrix6, SMatrix, Vector3, Vector6};

use super::factors::StereoFactor;
use super::graph::FactorGraph;
use crate::error::{Error, Result};
use crate::geometry::StereoCamera;

type Matrix6x3 = SMatrix<f64, 6, 3>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizeConfig {
    pub max_iters: usize,
    pub lambda_init: f64,
    /// Stop once the relative cost decrease of an accepted step falls below this.
    pub tol: f64,
    /// Huber threshold on the whitened residual norm; `None` for plain least squares.
    pub huber: Option<f64>,
}

impl Default for OptimizeConfig {
    fn default() -> Self {
        Self {
            max_iters: 50,
            lambda_init: 1e-4,
            tol: 1e-12,
            huber: Some(2.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizeSummary {
    pub initial_cost: f64,
    pub final_cost: f64,
    pub iterations: usize,
    pub accepted_steps: usize,
}

/// Which variables move. Poses not in `free_poses` stay fixed; landmarks are
/// free when observed by a free pose, unless listed in `fixed_landmarks`.
#[derive(Debug, Clone, Default)]
pub struct Selection {
    pub free_poses: BTreeSet<usize>,
    pub fixed_landmarks: BTreeSet<usize>,
}

impl Selection {
    pub fn all(graph: &FactorGraph) -> Self {
        Self {
            free_poses: graph.poses.keys().copied().collect(),
            fixed_landmarks: BTreeSet::new(),
        }
    }
}

/// Huber loss `ρ(s)` of a squared norm `s`, and the IRLS weight `ρ'(s)`.
fn robust(s: f64, huber: Option<f64>) -> (f64, f64) {
    match huber {
        Some(k) if s > k * k => {
            let n = s.sqrt();
            (2.0 * k * n - k * k, k / n)
        }
        _ => (s, 1.0),
    }
}

struct Problem<'a> {
    cam: &'a StereoCamera,
    huber: Option<f64>,
    pose_index: BTreeMap<usize, usize>,
    landmark_index: BTreeMap<usize, usize>,
    stereo: Vec<usize>,
    odometry: Vec<usize>,
    priors: Vec<usize>,
}

struct Snapshot {
    poses: Vec<crate::geometry::PoseSE3>,
    landmarks: Vec<crate::geometry::Point>,
}

struct LandmarkBlock {
    hll: Matrix3<f64>,
    gl: Vector3<f64>,
    hpl: Vec<(usize, Matrix6x3)>,
}

struct Normal {
    hpp: DMatrix<f64>,
    gp: DVector<f64>,
    blocks: Vec<LandmarkBlock>,
}

impl<'a> Problem<'a> {
    fn new(graph: &FactorGraph, cam: &'a StereoCamera, sel: &Selection, huber: Option<f64>) -> Self {
        let pose_index: BTreeMap<usize, usize> = sel
            .free_poses
            .iter()
            .filter(|p| graph.poses.contains_key(p))
            .enumerate()
            .map(|(i, &p)| (p, i))
            .collect();
        let free_lms: BTreeSet<usize> = graph
            .stereo
            .iter()
            .filter(|f| pose_index.contains_key(&f.frame) && !sel.fixed_landmarks.contains(&f.landmark))
            .map(|f| f.landmark)
            .collect();
        let landmark_index: BTreeMap<usize, usize> = free_lms.iter().enumerate().map(|(i, &l)| (l, i)).collect();
        let stereo = graph
            .stereo
            .iter()
            .enumerate()
            .filter(|(_, f)| pose_index.contains_key(&f.frame) || landmark_index.contains_key(&f.landmark))
            .map(|(i, _)| i)
            .collect();
        let odometry = graph
            .odometry
            .iter()
            .enumerate()
            .filter(|(_, f)| pose_index.contains_key(&f.from) || pose_index.contains_key(&f.to))
            .map(|(i, _)| i)
            .collect();
        let priors = graph
            .priors
            .iter()
            .enumerate()
            .filter(|(_, f)| pose_index.contains_key(&f.frame))
            .map(|(i, _)| i)
            .collect();
        Problem {
            cam,
            huber,
            pose_index,
            landmark_index,
            stereo,
            odometry,
            priors,
        }
    }

    fn stereo_sq(&self, f: &StereoFactor, graph: &FactorGraph) -> f64 {
        f.residual(&graph.poses[&f.frame], &graph.landmarks[&f.landmark], self.cam)
            .norm_squared()
    }

    fn cost(&self, graph: &FactorGraph) -> f64 {
        let mut cost = 0.0;
        for &i in &self.stereo {
            cost += robust(self.stereo_sq(&graph.stereo[i], graph), self.huber).0;
        }
        for &i in &self.odometry {
            let f = &graph.odometry[i];
            cost += f.residual(&graph.poses[&f.from], &graph.poses[&f.to]).norm_squared();
        }
        for &i in &self.priors {
            let f = &graph.priors[i];
            cost += f.residual(&graph.poses[&f.frame]).norm_squared();
        }
        cost
    }

    fn linearize(&self, graph: &FactorGraph) -> Normal {
        let np = self.pose_index.len() * 6;
        let mut hpp = DMatrix::zeros(np, np);
        let mut gp = DVector::zeros(np);
        let mut blocks: Vec<LandmarkBlock> = (0..self.landmark_index.len())
            .map(|_| LandmarkBlock {
                hll: Matrix3::zeros(),
                gl: Vector3::zeros(),
                hpl: Vec::new(),
            })
            .collect();

        let add_pose = |hpp: &mut DMatrix<f64>, a: usize, b: usize, hab: &Matrix6<f64>| {
            let mut view = hpp.view_mut((6 * a, 6 * b), (6, 6));
            view += hab;
        };

        for &i in &self.stereo {
            let f = &graph.stereo[i];
            let lin = f.linearize(&graph.poses[&f.frame], &graph.landmarks[&f.landmark], self.cam);
            if !lin.in_front {
                continue;
            }
            let (_, w) = robust(lin.residual.norm_squared(), self.huber);
            let pi = self.pose_index.get(&f.frame).copied();
            let li = self.landmark_index.get(&f.landmark).copied();
            if let Some(p) = pi {
                let jp = lin.d_pose;
                let h = jp.transpose() * jp * w;
                add_pose(&mut hpp, p, p, &h);
                let g = jp.transpose() * lin.residual * w;
                let mut gv = gp.rows_mut(6 * p, 6);
                gv += g;
            }
            if let Some(l) = li {
                let jl = lin.d_landmark;
                let block = &mut blocks[l];
                block.hll += jl.transpose() * jl * w;
                block.gl += jl.transpose() * lin.residual * w;
                if let Some(p) = pi {
                    let hpl: Matrix6x3 = lin.d_pose.transpose() * jl * w;
                    match block.hpl.iter_mut().find(|(q, _)| *q == p) {
                        Some((_, m)) => *m += hpl,
                        None => block.hpl.push((p, hpl)),
                    }
                }
            }
        }

        for &i in &self.odometry {
            let f = &graph.odometry[i];
            let (r, ja, jb) = f.linearize(&graph.poses[&f.from], &graph.poses[&f.to]);
            let ia = self.pose_index.get(&f.from).copied();
            let ib = self.pose_index.get(&f.to).copied();
            for (x, jx) in [(ia, &ja), (ib, &jb)] {
                let Some(x) = x else { continue };
                let mut gv = gp.rows_mut(6 * x, 6);
                gv += jx.transpose() * r;
                for (y, jy) in [(ia, &ja), (ib, &jb)] {
                    let Some(y) = y else { continue };
                    add_pose(&mut hpp, x, y, &(jx.transpose() * jy));
                }
            }
        }

        for &i in &self.priors {
            let f = &graph.priors[i];
            let (r, j) = f.linearize(&graph.poses[&f.frame]);
            let p = self.pose_index[&f.frame];
            add_pose(&mut hpp, p, p, &(j.transpose() * j));
            let mut gv = gp.rows_mut(6 * p, 6);
            gv += j.transpose() * r;
        }

        Normal { hpp, gp, blocks }
    }

    /// Solves the damped system `(H + λ·D) δ = −g`; `None` if singular.
    fn solve(&self, n: &Normal, lambda: f64) -> Option<(DVector<f64>, Vec<Vector3<f64>>)> {
        const MIN_DIAG: f64 = 1e-6;
        let np = n.hpp.nrows();
        let mut s = n.hpp.clone();
        for k in 0..np {
            s[(k, k)] += lambda * n.hpp[(k, k)].max(MIN_DIAG);
        }
        let mut rhs = -n.gp.clone();
        let mut inv_blocks = Vec::with_capacity(n.blocks.len());
        for b in &n.blocks {
            let mut hll = b.hll;
            for k in 0..3 {
                hll[(k, k)] += lambda * b.hll[(k, k)].max(MIN_DIAG);
            }
            let inv = hll.cholesky()?.inverse();
            for (pa, ha) in &b.hpl {
                let t: Matrix6x3 = ha * inv;
                let mut rv = rhs.rows_mut(6 * pa, 6);
                rv += t * b.gl;
                for (pb, hb) in &b.hpl {
                    let mut view = s.view_mut((6 * pa, 6 * pb), (6, 6));
                    view -= t * hb.transpose();
                }
            }
            inv_blocks.push(inv);
        }
        let dp = if np > 0 { s.cholesky()?.solve(&rhs) } else { DVector::zeros(0) };
        let mut dl = Vec::with_capacity(n.blocks.len());
        for (b, inv) in n.blocks.iter().zip(&inv_blocks) {
            let mut r = -b.gl;
            for (p, h) in &b.hpl {
                r -= h.transpose() * dp.fixed_rows::<6>(6 * p);
            }
            dl.push(inv * r);
        }
        if dp.iter().chain(dl.iter().flat_map(|v| v.iter())).any(|x| !x.is_finite()) {
            return None;
        }
        Some((dp, dl))
    }

    fn snapshot(&self, graph: &FactorGraph) -> Snapshot {
        Snapshot {
            poses: self.pose_index.keys().map(|k| graph.poses[k]).collect(),
            landmarks: self.landmark_index.keys().map(|k| graph.landmarks[k]).collect(),
        }
    }

    fn restore(&self, graph: &mut FactorGraph, snap: &Snapshot) {
        for (frame, pose) in self.pose_index.keys().zip(&snap.poses) {
            graph.poses.insert(*frame, *pose);
        }
        for (id, lm) in self.landmark_index.keys().zip(&snap.landmarks) {
            graph.landmarks.insert(*id, *lm);
        }
    }

    fn apply(&self, graph: &mut FactorGraph, dp: &DVector<f64>, dl: &[Vector3<f64>]) {
        for (frame, &i) in &self.pose_index {
            let delta = Vector6::from_iterator(dp.rows(6 * i, 6).iter().copied());
            let pose = graph.poses.get_mut(frame).expect("pose exists");
            *pose = pose.retract(&delta);
        }
        for (id, &i) in &self.landmark_index {
            let lm = graph.landmarks.get_mut(id).expect("landmark exists");
            *lm += dl[i];
        }
    }
}

/// Optimizes every pose and landmark of `graph` in place.
pub fn optimize(graph: &mut FactorGraph, cam: &StereoCamera, config: &OptimizeConfig) -> Result<OptimizeSummary> {
    let sel = Selection::all(graph);
    optimize_selected(graph, cam, config, &sel)
}

/// Optimizes the selected variables in place; the rest act as constants.
///
/// Fails with [`Error::BackendFailure`] when the cost is not finite or the
/// undamped normal equations are singular at the starting point.
pub fn optimize_selected(
    graph: &mut FactorGraph,
    cam: &StereoCamera,
    config: &OptimizeConfig,
    selection: &Selection,
) -> Result<OptimizeSummary> {
    debug_assert!(graph.is_consistent());
    let problem = Problem::new(graph, cam, selection, config.huber);
    let initial_cost = problem.cost(graph);
    if !initial_cost.is_finite() {
        return Err(Error::BackendFailure("non-finite initial cost".into()));
    }
    let mut summary = OptimizeSummary {
        initial_cost,
        final_cost: initial_cost,
        iterations: 0,
        accepted_steps: 0,
    };
    if problem.pose_index.is_empty() && problem.landmark_index.is_empty() {
        return Ok(summary);
    }

    let mut cost = initial_cost;
    let mut lambda = config.lambda_init;
    let mut normal = problem.linearize(graph);
    if problem.solve(&normal, 0.0).is_none() {
        return Err(Error::BackendFailure("singular normal equations".into()));
    }

    const LAMBDA_MAX: f64 = 1e12;
    const STEP_TOL: f64 = 1e-12;
    while summary.iterations < config.max_iters && cost > 0.0 {
        summary.iterations += 1;
        let Some((dp, dl)) = problem.solve(&normal, lambda) else {
            lambda *= 10.0;
            if lambda > LAMBDA_MAX {
                return Err(Error::BackendFailure("singular damped system".into()));
            }
            continue;
        };
        let step = dp.amax().max(dl.iter().map(|d| d.amax()).fold(0.0, f64::max));
        if step < STEP_TOL {
            break;
        }
        let snapshot = problem.snapshot(graph);
        problem.apply(graph, &dp, &dl);
        let new_cost = problem.cost(graph);
        if new_cost.is_finite() && new_cost < cost {
            let rel = (cost - new_cost) / cost;
            cost = new_cost;
            summary.accepted_steps += 1;
            lambda = (lambda / 3.0).max(1e-12);
            if rel < config.tol {
                break;
            }
            normal = problem.linearize(graph);
        } else {
            problem.restore(graph, &snapshot);
            lambda *= 4.0;
            if lambda > LAMBDA_MAX {
                break;
            }
        }
    }
    summary.final_cost = cost;
    Ok(summary)
}
