use serde::{Deserialize, Serialize};

use super::{Assignment, BipartiteGraph};

/// Expected horizontal image motion of a keypoint from image A to image B.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TravelDirection {
    /// `u_B ≥ u_A`.
    LeftToRight,
    /// `u_B ≤ u_A` (e.g. left→right image of a stereo pair, or a camera
    /// translating towards `+x`).
    RightToLeft,
    Any,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MotionFilter {
    /// Largest accepted `|v_B − v_A|`, pixels.
    pub max_vertical: f64,
    pub direction: TravelDirection,
}

/// Drops matches whose cost exceeds `threshold`.
pub fn filter_by_cost(assignment: &Assignment, threshold: f64) -> Assignment {
    assignment.retain(|m| m.cost <= threshold)
}

/// Drops matches that contradict horizontal travel: too much vertical
/// displacement, or horizontal displacement against `direction`.
pub fn filter_by_motion(assignment: &Assignment, graph: &BipartiteGraph, filter: &MotionFilter) -> Assignment {
    assignment.retain(|m| {
        let a = graph.u_nodes[m.u_index].center;
        let b = graph.v_nodes[m.v_index].center;
        let du = b.u - a.u;
        let dv = (b.v - a.v).abs();
        let sign_ok = match filter.direction {
            TravelDirection::LeftToRight => du >= 0.0,
            TravelDirection::RightToLeft => du <= 0.0,
            TravelDirection::Any => true,
        };
        sign_ok && dv <= filter.max_vertical
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::association::Match;
    use crate::features::SeedKeypoint;
    use crate::geometry::{ImagePoint, Side};
    use proptest::prelude::*;

    fn assignment(costs: &[f64]) -> Assignment {
        Assignment {
            matches: costs
                .iter()
                .enumerate()
                .map(|(i, &c)| Match { u_index: i, v_index: i, cost: c })
                .collect(),
            unmatched_u: vec![],
            unmatched_v: vec![],
        }
    }

    #[test]
    fn cost_threshold() {
        let a = assignment(&[2.0, 7.0, 11.0]);
        let f = filter_by_cost(&a, 10.0);
        assert_eq!(f.matches.iter().map(|m| m.cost).collect::<Vec<_>>(), vec![2.0, 7.0]);
        assert_eq!(f.unmatched_u, vec![2]);
        assert_eq!(f.unmatched_v, vec![2]);
        assert_eq!(filter_by_cost(&a, 100.0), a);
        assert!(filter_by_cost(&a, 1e-9).matches.is_empty());
    }

    fn graph(pairs: &[((f64, f64), (f64, f64))]) -> BipartiteGraph {
        BipartiteGraph::new(
            pairs.iter().map(|(a, _)| SeedKeypoint::new(ImagePoint::new(a.0, a.1), 0, Side::Left)).collect(),
            pairs.iter().map(|(_, b)| SeedKeypoint::new(ImagePoint::new(b.0, b.1), 1, Side::Left)).collect(),
        )
    }

    #[test]
    fn motion_rules() {
        let g = graph(&[
            ((100.0, 50.0), (60.0, 50.0)),  // horizontal, right-to-left
            ((100.0, 50.0), (60.0, 90.0)),  // 40 px vertical
            ((100.0, 50.0), (130.0, 50.0)), // wrong direction
        ]);
        let a = assignment(&[1.0, 1.0, 1.0]);
        let f = filter_by_motion(&a, &g, &MotionFilter { max_vertical: 20.0, direction: TravelDirection::RightToLeft });
        assert_eq!(f.matches.len(), 1);
        assert_eq!(f.matches[0].u_index, 0);
        let f = filter_by_motion(&a, &g, &MotionFilter { max_vertical: 20.0, direction: TravelDirection::Any });
        assert_eq!(f.matches.len(), 2);
        let f = filter_by_motion(&a, &g, &MotionFilter { max_vertical: 20.0, direction: TravelDirection::LeftToRight });
        assert_eq!(f.matches.iter().map(|m| m.u_index).collect::<Vec<_>>(), vec![2]);
    }

    #[test]
    fn direction_serde() {
        assert_eq!(serde_json::to_string(&TravelDirection::RightToLeft).unwrap(), "\"right-to-left\"");
    }

    proptest! {
        #[test]
        fn cost_filter_idempotent(costs in prop::collection::vec(0.0f64..100.0, 0..30), t in 0.1f64..100.0) {
            let a = assignment(&costs);
            let once = filter_by_cost(&a, t);
            prop_assert_eq!(filter_by_cost(&once, t), once.clone());
            prop_assert_eq!(filter_by_cost(&a, f64::INFINITY), a);
            prop_assert!(once.is_one_to_one());
        }
    }
}
