//! Structural data association between two sets of seed keypoints.
//!
//! Stereo pairs and consecutive frames are matched by solving a linear sum
//! assignment over a cost that compares each seed's local constellation
//! (summed distances to its left/right/top/bottom neighbours) and penalises
//! vertical offset. Low-confidence matches are then dropped by a cost
//! threshold and a motion-consistency filter.

mod baseline;
mod cost;
mod filter;
mod lsap;
mod neighbors;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::SeedKeypoint;
use crate::geometry::StereoCamera;

pub use baseline::baseline_nn_match;
pub use cost::{build_cost_matrix, structural_cost, CostMatrix, CostVariant, DEGENERATE_TERM_COST};
pub use filter::{filter_by_cost, filter_by_motion, MotionFilter, TravelDirection};
pub use lsap::{hungarian, solve_lsap};
pub use neighbors::{neighbor_sets, NeighborSets};

/// Keypoints of image A (`u_nodes`) and image B (`v_nodes`).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BipartiteGraph {
    pub u_nodes: Vec<SeedKeypoint>,
    pub v_nodes: Vec<SeedKeypoint>,
}

impl BipartiteGraph {
    pub fn new(u_nodes: Vec<SeedKeypoint>, v_nodes: Vec<SeedKeypoint>) -> Self {
        Self { u_nodes, v_nodes }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Match {
    pub u_index: usize,
    pub v_index: usize,
    pub cost: f64,
}

/// A one-to-one matching over a subset of both node sets.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub matches: Vec<Match>,
    pub unmatched_u: Vec<usize>,
    pub unmatched_v: Vec<usize>,
}

impl Assignment {
    pub fn total_cost(&self) -> f64 {
        self.matches.iter().map(|m| m.cost).sum()
    }

    pub fn len(&self) -> usize {
        self.matches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matches.is_empty()
    }

    /// `v` index matched to each `u` index, `None` where unmatched.
    pub fn u_to_v(&self, n_u: usize) -> Vec<Option<usize>> {
        let mut out = vec![None; n_u];
        for m in &self.matches {
            out[m.u_index] = Some(m.v_index);
        }
        out
    }

    /// Keeps matches satisfying `keep`; the rest move to the unmatched lists.
    pub fn retain(&self, mut keep: impl FnMut(&Match) -> bool) -> Assignment {
        let mut out = Assignment {
            matches: Vec::with_capacity(self.matches.len()),
            unmatched_u: self.unmatched_u.clone(),
            unmatched_v: self.unmatched_v.clone(),
        };
        for m in &self.matches {
            if keep(m) {
                out.matches.push(*m);
            } else {
                out.unmatched_u.push(m.u_index);
                out.unmatched_v.push(m.v_index);
            }
        }
        out.unmatched_u.sort_unstable();
        out.unmatched_v.sort_unstable();
        out
    }

    /// True when no node index appears twice.
    pub fn is_one_to_one(&self) -> bool {
        let mut us: Vec<usize> = self.matches.iter().map(|m| m.u_index).chain(self.unmatched_u.iter().copied()).collect();
        let mut vs: Vec<usize> = self.matches.iter().map(|m| m.v_index).chain(self.unmatched_v.iter().copied()).collect();
        let (nu, nv) = (us.len(), vs.len());
        us.sort_unstable();
        us.dedup();
        vs.sort_unstable();
        vs.dedup();
        us.len() == nu && vs.len() == nv
    }
}

/// Tunables of the structural matcher.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MatcherParams {
    /// Neighbour window length Δ, pixels.
    pub delta: f64,
    /// Neighbour band half-width ε, pixels.
    pub epsilon: f64,
    /// Weight on the constellation terms.
    pub r: f64,
    /// Matches costing more than this are dropped.
    pub threshold: f64,
    pub cost_variant: CostVariant,
}

impl MatcherParams {
    /// Δ = 0.1·width, ε = Δ/4, r = ε, threshold = 2·(4r + ε).
    pub fn for_camera(cam: &StereoCamera) -> Self {
        let delta = 0.1 * cam.width as f64;
        let epsilon = 0.25 * delta;
        let r = epsilon;
        Self {
            delta,
            epsilon,
            r,
            threshold: 2.0 * (4.0 * r + epsilon),
            cost_variant: CostVariant::Literal,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::config(format!("matcher.{name}"), "must be > 0"))
            }
        };
        positive("delta", self.delta)?;
        positive("epsilon", self.epsilon)?;
        positive("threshold", self.threshold)?;
        if !(self.r.is_finite() && self.r >= 0.0) {
            return Err(Error::config("matcher.r", "must be >= 0"));
        }
        Ok(())
    }
}

impl Default for MatcherParams {
    fn default() -> Self {
        Self::for_camera(&StereoCamera::default())
    }
}

/// Builds the cost matrix, solves the assignment and applies the cost threshold.
pub fn structural_match(graph: &BipartiteGraph, params: &MatcherParams) -> Result<Assignment> {
    if graph.u_nodes.is_empty() || graph.v_nodes.is_empty() {
        return Ok(Assignment {
            matches: Vec::new(),
            unmatched_u: (0..graph.u_nodes.len()).collect(),
            unmatched_v: (0..graph.v_nodes.len()).collect(),
        });
    }
    let costs = build_cost_matrix(graph, params)?;
    Ok(filter_by_cost(&solve_lsap(&costs), params.threshold))
}

/// Serialized result of matching one image pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatchRecord {
    pub frame_a: usize,
    pub frame_b: usize,
    pub matches: Vec<Match>,
    pub unmatched_u: Vec<usize>,
    pub unmatched_v: Vec<usize>,
    pub params: MatcherParams,
}

impl MatchRecord {
    pub fn new(frame_a: usize, frame_b: usize, assignment: &Assignment, params: MatcherParams) -> Self {
        Self {
            frame_a,
            frame_b,
            matches: assignment.matches.clone(),
            unmatched_u: assignment.unmatched_u.clone(),
            unmatched_v: assignment.unmatched_v.clone(),
            params,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_params() {
        let p = MatcherParams::default();
        assert_eq!(p.delta, 64.0);
        assert_eq!(p.epsilon, 16.0);
        assert_eq!(p.r, 16.0);
        assert_eq!(p.threshold, 160.0);
        assert_eq!(p.cost_variant, CostVariant::Literal);
    }

    #[test]
    fn match_record_json_shape() {
        let a = Assignment {
            matches: vec![Match { u_index: 0, v_index: 2, cost: 1.5 }],
            unmatched_u: vec![1],
            unmatched_v: vec![0, 1],
        };
        let json = serde_json::to_value(MatchRecord::new(3, 4, &a, MatcherParams::default())).unwrap();
        assert_eq!(json["frame_a"], 3);
        assert_eq!(json["matches"][0]["v_index"], 2);
        assert_eq!(json["params"]["cost_variant"], "literal");
        assert_eq!(json["params"]["delta"], 64.0);
        assert_eq!(json["unmatched_v"], serde_json::json!([0, 1]));
    }
}
