//! Maximum-weight bipartite assignment (Hungarian method) for CEAF.

/// Solves the rectangular maximum-weight assignment problem.
///
/// Returns the optimal total and the matched `(row, col)` pairs. Each row and
/// column is used at most once; `min(rows, cols)` pairs are returned. Runs in
/// `O(k^3)` with `k = max(rows, cols)`.
pub fn max_weight_assignment(weights: &[Vec<f64>]) -> (f64, Vec<(usize, usize)>) {
    let rows = weights.len();
    let cols = weights.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 {
        return (0.0, Vec::new());
    }
    let k = rows.max(cols);
    // Minimize negated weights on a zero-padded square matrix.
    let cost = |i: usize, j: usize| -> f64 {
        if i < rows && j < cols {
            -weights[i][j]
        } else {
            0.0
        }
    };

    // Potentials-based shortest augmenting path, 1-based with a virtual
    // column 0.
    let mut u = vec![0.0; k + 1];
    let mut v = vec![0.0; k + 1];
    let mut p = vec![0usize; k + 1];
    let mut way = vec![0usize; k + 1];
    for i in 1..=k {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; k + 1];
        let mut used = vec![false; k + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=k {
                if used[j] {
                    continue;
                }
                let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=k {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut pairs = Vec::with_capacity(rows.min(cols));
    let mut total = 0.0;
    for j in 1..=k {
        let i = p[j];
        if i >= 1 && i - 1 < rows && j - 1 < cols {
            pairs.push((i - 1, j - 1));
            total += weights[i - 1][j - 1];
        }
    }
    pairs.sort_unstable();
    (total, pairs)
}

/// Exhaustive search over all partial one-to-one alignments.
///
/// Exponential; intended as an oracle for small instances.
pub fn brute_force_max_assignment(weights: &[Vec<f64>]) -> f64 {
    fn go(weights: &[Vec<f64>], row: usize, used: &mut Vec<bool>) -> f64 {
        if row == weights.len() {
            return 0.0;
        }
        // leave this row unmatched
        let mut best = go(weights, row + 1, used);
        for j in 0..used.len() {
            if !used[j] {
                used[j] = true;
                best = best.max(weights[row][j] + go(weights, row + 1, used));
                used[j] = false;
            }
        }
        best
    }
    let cols = weights.first().map_or(0, Vec::len);
    go(weights, 0, &mut vec![false; cols])
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn small_cases() {
        assert_eq!(max_weight_assignment(&[]).0, 0.0);
        let w = vec![vec![0.8, 0.4], vec![0.0, 2.0 / 3.0]];
        let (total, pairs) = max_weight_assignment(&w);
        assert!((total - (0.8 + 2.0 / 3.0)).abs() < 1e-12);
        assert_eq!(pairs, vec![(0, 0), (1, 1)]);

        let w = vec![vec![1.0, 5.0, 2.0]];
        let (total, pairs) = max_weight_assignment(&w);
        assert_eq!(total, 5.0);
        assert_eq!(pairs, vec![(0, 1)]);

        let w = vec![vec![1.0], vec![3.0], vec![2.0]];
        assert_eq!(max_weight_assignment(&w).0, 3.0);
    }

    proptest! {
        #[test]
        fn hungarian_matches_enumeration(
            w in (1usize..=6, 1usize..=6).prop_flat_map(|(r, c)| {
                proptest::collection::vec(proptest::collection::vec(0.0f64..10.0, c), r)
            })
        ) {
            let (fast, pairs) = max_weight_assignment(&w);
            let slow = brute_force_max_assignment(&w);
            prop_assert!((fast - slow).abs() < 1e-9, "{} vs {}", fast, slow);
            prop_assert_eq!(pairs.len(), w.len().min(w[0].len()));
        }
    }
}
