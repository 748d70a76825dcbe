use super::{Assignment, BipartiteGraph, Match};

fn nearest(from: &crate::geometry::ImagePoint, to: &[crate::features::SeedKeypoint], max_dist: f64) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (j, k) in to.iter().enumerate() {
        let d = from.distance(&k.center);
        if d <= max_dist && best.is_none_or(|(_, bd)| d < bd) {
            best = Some((j, d));
        }
    }
    best
}

/// Descriptor-free baseline: mutual nearest neighbours in pixel space within
/// `max_dist`. The match cost is the pixel distance.
pub fn baseline_nn_match(graph: &BipartiteGraph, max_dist: f64) -> Assignment {
    let (u, v) = (&graph.u_nodes, &graph.v_nodes);
    let v_best: Vec<Option<usize>> = v.iter().map(|k| nearest(&k.center, u, max_dist).map(|(i, _)| i)).collect();
    let mut out = Assignment::default();
    let mut v_taken = vec![false; v.len()];
    for (i, k) in u.iter().enumerate() {
        match nearest(&k.center, v, max_dist) {
            Some((j, d)) if v_best[j] == Some(i) => {
                v_taken[j] = true;
                out.matches.push(Match { u_index: i, v_index: j, cost: d });
            }
            _ => out.unmatched_u.push(i),
        }
    }
    out.unmatched_v = (0..v.len()).filter(|&j| !v_taken[j]).collect();
    out
}
