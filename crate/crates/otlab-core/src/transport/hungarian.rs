//! Dense Hungarian algorithm for square assignment problems.
//!
//! Shortest-augmenting-path formulation with dual potentials, O(n³). Used as
//! an independent cross-check for the transportation solver on equal-atom
//! instances, where the optimal coupling is a permutation.

use crate::error::{Error, Result};

/// Solves min Σ cost[i][σ(i)] over permutations σ. `cost` is row-major n×n.
/// Returns the assigned column per row and the total cost.
pub fn solve_assignment(n: usize, cost: &[f64]) -> Result<(Vec<usize>, f64)> {
    if n == 0 {
        return Err(Error::EmptySupport);
    }
    if cost.len() != n * n {
        return Err(Error::LengthMismatch { got: cost.len(), want: n * n });
    }
    if let Some(bad) = cost.iter().find(|c| !c.is_finite()) {
        return Err(Error::InvalidParameter { reason: format!("non-finite assignment cost {bad}") });
    }

    // Potentials for rows (u) and columns (v); p[j] = row matched to column
    // j. Index n is a virtual column that seeds each augmentation.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut p = vec![n; n + 1];
    let mut way = vec![0usize; n + 1];

    for i in 0..n {
        p[n] = i;
        let mut j0 = n;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 0..n {
                if !used[j] {
                    let cur = cost[i0 * n + j] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    // Every used column is matched (the virtual column holds
                    // the row being inserted), so p[j] is a valid row.
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == n {
                break;
            }
        }
        // Augment along the alternating path recorded in `way`.
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == n {
                break;
            }
        }
    }

    let mut assignment = vec![usize::MAX; n];
    for j in 0..n {
        assignment[p[j]] = j;
    }
    let total = (0..n).map(|i| cost[i * n + assignment[i]]).sum();
    Ok((assignment, total))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Independent oracle: exhaustive permutation search.
    fn brute_force(n: usize, cost: &[f64]) -> f64 {
        fn rec(n: usize, cost: &[f64], row: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
            if row == n {
                if acc < *best {
                    *best = acc;
                }
                return;
            }
            if acc >= *best {
                return;
            }
            for j in 0..n {
                if !used[j] {
                    used[j] = true;
                    rec(n, cost, row + 1, used, acc + cost[row * n + j], best);
                    used[j] = false;
                }
            }
        }
        let mut best = f64::INFINITY;
        rec(n, cost, 0, &mut vec![false; n], 0.0, &mut best);
        best
    }

    #[test]
    fn identity_cost_prefers_diagonal() {
        let n = 4;
        let cost: Vec<f64> = (0..n * n)
            .map(|k| if k / n == k % n { 0.0 } else { 1.0 })
            .collect();
        let (assignment, total) = solve_assignment(n, &cost).unwrap();
        assert_eq!(assignment, vec![0, 1, 2, 3]);
        assert_eq!(total, 0.0);
    }

    #[test]
    fn hand_computed_three_by_three() {
        // Optimal: 0->1 (1), 1->0 (2), 2->2 (2), total 5.
        let cost = [4.0, 1.0, 3.0, 2.0, 0.0, 5.0, 3.0, 2.0, 2.0];
        let (_, total) = solve_assignment(3, &cost).unwrap();
        assert_eq!(total, brute_force(3, &cost));
        assert_eq!(total, 5.0);
    }

    #[test]
    fn matches_brute_force_on_random_instances() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(41);
        for _ in 0..40 {
            let n = rng.gen_range(1..8);
            let cost: Vec<f64> = (0..n * n).map(|_| rng.gen_range(0..64) as f64 * 0.125).collect();
            let (assignment, total) = solve_assignment(n, &cost).unwrap();
            // assignment is a permutation
            let mut seen = vec![false; n];
            for &j in &assignment {
                assert!(!seen[j]);
                seen[j] = true;
            }
            let want = brute_force(n, &cost);
            assert!((total - want).abs() <= 1e-9 * (1.0 + want), "n={n} got={total} want={want}");
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(solve_assignment(0, &[]), Err(Error::EmptySupport)));
        assert!(matches!(solve_assignment(2, &[1.0; 3]), Err(Error::LengthMismatch { .. })));
        assert!(matches!(
            solve_assignment(1, &[f64::NAN]),
            Err(Error::InvalidParameter { .. })
        ));
    }
}
