use super::cost::CostMatrix;
use super::{Assignment, Match};

/// Minimum-cost perfect matching on a dense `n × n` row-major matrix
/// (Hungarian method with row/column potentials, O(n³)).
///
/// Returns the column assigned to each row. The shortest-path scan takes the
/// lowest column index among equal slacks, so ties resolve deterministically
/// (not necessarily to the lexicographically smallest optimal permutation).
pub fn hungarian(n: usize, cost: &[f64]) -> Vec<usize> {
    assert_eq!(cost.len(), n * n, "cost matrix must be n x n");
    if n == 0 {
        return Vec::new();
    }
    // 1-based: index 0 is the virtual root column.
    let mut row_pot = vec![0.0f64; n + 1];
    let mut col_pot = vec![0.0f64; n + 1];
    let mut col_owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut min_slack = vec![0.0f64; n + 1];
    let mut used = vec![false; n + 1];

    for row in 1..=n {
        col_owner[0] = row;
        let mut j0 = 0usize;
        min_slack.fill(f64::INFINITY);
        used.fill(false);
        loop {
            used[j0] = true;
            let i0 = col_owner[j0];
            let base = (i0 - 1) * n;
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let reduced = cost[base + j - 1] - row_pot[i0] - col_pot[j];
                if reduced < min_slack[j] {
                    min_slack[j] = reduced;
                    way[j] = j0;
                }
                if min_slack[j] < delta {
                    delta = min_slack[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    row_pot[col_owner[j]] += delta;
                    col_pot[j] -= delta;
                } else {
                    min_slack[j] -= delta;
                }
            }
            j0 = j1;
            if col_owner[j0] == 0 {
                break;
            }
        }
        // augment along the alternating path
        loop {
            let j1 = way[j0];
            col_owner[j0] = col_owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut row_to_col = vec![0usize; n];
    for j in 1..=n {
        row_to_col[col_owner[j] - 1] = j - 1;
    }
    row_to_col
}

/// Solves the padded LSAP; pairs involving padding become unmatched nodes.
pub fn solve_lsap(costs: &CostMatrix) -> Assignment {
    let row_to_col = hungarian(costs.size(), costs.values());
    let mut out = Assignment::default();
    for (i, &j) in row_to_col.iter().enumerate() {
        if costs.is_dummy(i, j) {
            if i < costs.rows() {
                out.unmatched_u.push(i);
            }
            if j < costs.cols() {
                out.unmatched_v.push(j);
            }
        } else {
            out.matches.push(Match {
                u_index: i,
                v_index: j,
                cost: costs.get(i, j),
            });
        }
    }
    out.unmatched_v.sort_unstable();
    out
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Exhaustive minimum over all permutations (Heap's algorithm), summing
    /// in row order.
    pub(crate) fn brute_force_min(n: usize, cost: &[f64]) -> f64 {
        let mut perm: Vec<usize> = (0..n).collect();
        let total = |p: &[usize]| p.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum::<f64>();
        let mut best = total(&perm);
        let mut c = vec![0usize; n];
        let mut i = 1;
        while i < n {
            if c[i] < i {
                if i % 2 == 0 {
                    perm.swap(0, i);
                } else {
                    perm.swap(c[i], i);
                }
                best = best.min(total(&perm));
                c[i] += 1;
                i = 1;
            } else {
                c[i] = 0;
                i += 1;
            }
        }
        best
    }

    fn total(n: usize, cost: &[f64], assign: &[usize]) -> f64 {
        (0..n).map(|i| cost[i * n + assign[i]]).sum()
    }

    #[test]
    fn identity_favoring() {
        let n = 4;
        let cost: Vec<f64> = (0..n * n).map(|k| if k / n == k % n { 0.0 } else { 1.0 }).collect();
        assert_eq!(hungarian(n, &cost), vec![0, 1, 2, 3]);
    }

    #[test]
    fn three_by_three() {
        let cost = [4.0, 1.0, 3.0, 2.0, 0.0, 5.0, 3.0, 2.0, 2.0];
        let a = hungarian(3, &cost);
        assert_eq!(a, vec![1, 0, 2]);
        assert_eq!(total(3, &cost, &a), 5.0);
        assert_eq!(brute_force_min(3, &cost), 5.0);
    }

    #[test]
    fn ties_are_deterministic() {
        let cost = vec![1.0; 9];
        let a = hungarian(3, &cost);
        assert_eq!(total(3, &cost, &a), 3.0);
        for _ in 0..5 {
            assert_eq!(hungarian(3, &cost), a);
        }
    }

    #[test]
    fn random_eight_by_eight() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let cost: Vec<f64> = (0..64).map(|_| rng.random_range(0.0..100.0)).collect();
            let a = hungarian(8, &cost);
            assert_eq!(total(8, &cost, &a), brute_force_min(8, &cost));
        }
    }

    #[test]
    fn dummy_pairs_reported_unmatched() {
        let m = CostMatrix::from_rows(2, 3, &[0.0, 5.0, 5.0, 5.0, 5.0, 0.0], 1.0);
        let a = solve_lsap(&m);
        assert_eq!(a.matches.len(), 2);
        assert_eq!(a.unmatched_v, vec![1]);
        assert!(a.unmatched_u.is_empty());
        assert_eq!(a.total_cost(), 0.0);
    }

    proptest! {
        #[test]
        fn one_to_one(rows in 1usize..12, cols in 1usize..12, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let real: Vec<f64> = (0..rows * cols).map(|_| rng.random_range(0.0..10.0)).collect();
            let m = CostMatrix::from_rows(rows, cols, &real, 1.0);
            let a = solve_lsap(&m);
            prop_assert!(a.is_one_to_one());
            prop_assert_eq!(a.matches.len(), rows.min(cols));
            prop_assert_eq!(a.matches.len() + a.unmatched_u.len(), rows);
            prop_assert_eq!(a.matches.len() + a.unmatched_v.len(), cols);
            let sum: f64 = a.matches.iter().map(|m| m.cost).sum();
            prop_assert_eq!(a.total_cost(), sum);
        }
    }
}
