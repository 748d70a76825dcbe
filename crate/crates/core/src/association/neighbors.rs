use crate::geometry::ImagePoint;

/// Peers of one keypoint falling in its left/right/top/bottom windows.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct NeighborSets {
    pub left: Vec<ImagePoint>,
    pub right: Vec<ImagePoint>,
    pub top: Vec<ImagePoint>,
    pub bottom: Vec<ImagePoint>,
    pub delta: f64,
    pub epsilon: f64,
}

impl NeighborSets {
    pub fn is_empty(&self) -> bool {
        self.left.is_empty() && self.right.is_empty() && self.top.is_empty() && self.bottom.is_empty()
    }
}

/// Collects the neighbours of `node = (a, b)` among `peers`. A peer `(c, d)` is
///
/// * left   if `0 < a − c < Δ` and `|d − b| < ε`
/// * right  if `0 < c − a < Δ` and `|d − b| < ε`
/// * top    if `0 < b − d < Δ` and `|c − a| < ε`
/// * bottom if `0 < d − b < Δ` and `|c − a| < ε`
///
/// Coincident peers (including `node` itself) satisfy none of these. The sets
/// may overlap when `ε` is large relative to `Δ`.
pub fn neighbor_sets(node: &ImagePoint, peers: &[ImagePoint], delta: f64, epsilon: f64) -> NeighborSets {
    let (a, b) = (node.u, node.v);
    let mut sets = NeighborSets {
        delta,
        epsilon,
        ..NeighborSets::default()
    };
    for p in peers {
        let (c, d) = (p.u, p.v);
        if (d - b).abs() < epsilon {
            if 0.0 < a - c && a - c < delta {
                sets.left.push(*p);
            }
            if 0.0 < c - a && c - a < delta {
                sets.right.push(*p);
            }
        }
        if (c - a).abs() < epsilon {
            if 0.0 < b - d && b - d < delta {
                sets.top.push(*p);
            }
            if 0.0 < d - b && d - b < delta {
                sets.bottom.push(*p);
            }
        }
    }
    sets
}
