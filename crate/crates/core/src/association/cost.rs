use serde::{Deserialize, Serialize};

use super::neighbors::{neighbor_sets, NeighborSets};
use super::{BipartiteGraph, MatcherParams};
use crate::error::{Error, Result};
use crate::geometry::ImagePoint;

/// Contribution of a constellation term whose denominator sums to zero while
/// the numerator set is non-empty.
pub const DEGENERATE_TERM_COST: f64 = 1e6;

/// How a constellation ratio `C′(X, Y) = ΣX / ΣY` enters the cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CostVariant {
    /// The ratio itself.
    #[default]
    Literal,
    /// `|1 − ratio|`, zero when both constellations have equal extent.
    Deviation,
}

impl std::str::FromStr for CostVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "literal" => Ok(CostVariant::Literal),
            "deviation" => Ok(CostVariant::Deviation),
            other => Err(Error::config("cost_variant", format!("unknown variant `{other}`"))),
        }
    }
}

fn spread(center: &ImagePoint, set: &[ImagePoint]) -> f64 {
    set.iter().map(|s| s.distance(center)).sum()
}

/// Spread of a set around its center, `None` when the set is empty.
fn set_spread(center: &ImagePoint, set: &[ImagePoint]) -> Option<f64> {
    (!set.is_empty()).then(|| spread(center, set))
}

fn ratio_from_spreads(x: Option<f64>, y: Option<f64>, variant: CostVariant) -> f64 {
    let (Some(num), Some(den)) = (x, y) else {
        return 0.0;
    };
    if den == 0.0 {
        return DEGENERATE_TERM_COST;
    }
    let ratio = num / den;
    match variant {
        CostVariant::Literal => ratio,
        CostVariant::Deviation => (1.0 - ratio).abs(),
    }
}

/// Spreads of the left, right, bottom and top sets.
fn spreads(center: &ImagePoint, sets: &NeighborSets) -> [Option<f64>; 4] {
    [&sets.left, &sets.right, &sets.bottom, &sets.top].map(|s| set_spread(center, s))
}

fn cost_from_spreads(a: &ImagePoint, sa: &[Option<f64>; 4], m: &ImagePoint, sm: &[Option<f64>; 4], r: f64, variant: CostVariant) -> f64 {
    let mut c = 0.0;
    for k in 0..4 {
        c += r * ratio_from_spreads(sa[k], sm[k], variant);
    }
    c + (a.v - m.v).abs()
}

/// Cost of associating `s_ab` (image A) with `s_mn` (image B):
/// `r·C′(L) + r·C′(R) + r·C′(B) + r·C′(T) + |b − n|`.
///
/// A term is skipped when either of its neighbour sets is empty.
pub fn structural_cost(
    s_ab: &ImagePoint,
    sets_ab: &NeighborSets,
    s_mn: &ImagePoint,
    sets_mn: &NeighborSets,
    r: f64,
    variant: CostVariant,
) -> f64 {
    cost_from_spreads(s_ab, &spreads(s_ab, sets_ab), s_mn, &spreads(s_mn, sets_mn), r, variant)
}

/// Square LSAP instance. Real entries occupy the top-left `rows × cols`
/// block; padding rows/columns hold `dummy_cost`.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    size: usize,
    rows: usize,
    cols: usize,
    values: Vec<f64>,
    pub r: f64,
    pub dummy_cost: f64,
}

impl CostMatrix {
    /// Wraps a dense `rows × cols` matrix, padding to square.
    pub fn from_rows(rows: usize, cols: usize, real: &[f64], r: f64) -> Self {
        assert_eq!(real.len(), rows * cols);
        assert!(real.iter().all(|c| c.is_finite() && *c >= 0.0), "costs must be finite and >= 0");
        let max_real = real.iter().copied().fold(0.0, f64::max);
        let dummy_cost = 10.0 * max_real + 1.0;
        let size = rows.max(cols);
        let mut values = vec![dummy_cost; size * size];
        for i in 0..rows {
            values[i * size..i * size + cols].copy_from_slice(&real[i * cols..(i + 1) * cols]);
        }
        Self {
            size,
            rows,
            cols,
            values,
            r,
            dummy_cost,
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    /// Number of real `U` nodes.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Number of real `V` nodes.
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.size + j]
    }

    pub fn is_dummy(&self, i: usize, j: usize) -> bool {
        i >= self.rows || j >= self.cols
    }

    /// Row-major padded values.
    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Evaluates `structural_cost` for every `(u, v)` pair. Neighbour sets are
/// taken within each image.
pub fn build_cost_matrix(graph: &BipartiteGraph, params: &MatcherParams) -> Result<CostMatrix> {
    if graph.u_nodes.is_empty() || graph.v_nodes.is_empty() {
        return Err(Error::EmptySide);
    }
    let centers = |nodes: &[crate::features::SeedKeypoint]| -> Vec<ImagePoint> { nodes.iter().map(|k| k.center).collect() };
    let u = centers(&graph.u_nodes);
    let v = centers(&graph.v_nodes);
    let sets = |pts: &[ImagePoint]| -> Vec<[Option<f64>; 4]> {
        pts.iter()
            .map(|p| spreads(p, &neighbor_sets(p, pts, params.delta, params.epsilon)))
            .collect()
    };
    let u_sets = sets(&u);
    let v_sets = sets(&v);

    let mut real = Vec::with_capacity(u.len() * v.len());
    for (a, sa) in u.iter().zip(&u_sets) {
        for (m, sm) in v.iter().zip(&v_sets) {
            real.push(cost_from_spreads(a, sa, m, sm, params.r, params.cost_variant));
        }
    }
    Ok(CostMatrix::from_rows(u.len(), v.len(), &real, params.r))
}
