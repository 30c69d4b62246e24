//! Entity membership probabilities derived from antecedent link probabilities.
//!
//! A document with `n` mentions has `n` potential entities; entity `u` is the
//! one whose first mention is mention `u`. Given `p(a_i = j)`, the probability
//! that mention `i` belongs to entity `u` is
//!
//! ```text
//! q[i][u] = sum_{j=u}^{i-1} p[i][j] * q[j][u]   for u < i
//! q[i][i] = p[i][i]
//! q[i][u] = 0                                    for u > i
//! ```
//!
//! Each row of `q` is a probability distribution, and no later mention can be
//! more likely to belong to entity `u` than mention `u` itself. Both facts are
//! exercised as property tests below and in the acceptance suite.

use crate::clustering::{argmax, AntecedentVector, Clustering};
use crate::error::{Error, Result};

/// Row-sum tolerance for link distributions.
pub const ROW_TOLERANCE: f64 = 1e-9;

/// Largest document accepted by [`brute_force_membership`].
pub const BRUTE_FORCE_MAX_MENTIONS: usize = 8;

/// Lower-triangular, row-stochastic matrix `p[i][j] = p(a_i = j)`, `j <= i`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkDistribution {
    rows: Vec<Vec<f64>>,
}

impl LinkDistribution {
    /// Validates shape, non-negativity and row sums.
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        for (i, row) in rows.iter().enumerate() {
            if row.len() != i + 1 {
                return Err(Error::InvalidDistribution(format!(
                    "row {i} has {} entries, expected {}",
                    row.len(),
                    i + 1
                )));
            }
            if row.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
                return Err(Error::InvalidDistribution(format!(
                    "row {i} has a negative or non-finite entry"
                )));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_TOLERANCE {
                return Err(Error::InvalidDistribution(format!("row {i} sums to {sum}")));
            }
        }
        Ok(Self { rows })
    }

    /// Row-wise softmax of a lower-triangular score matrix.
    pub fn from_scores<R: AsRef<[f64]>>(scores: &[R]) -> Self {
        Self {
            rows: scores.iter().map(|r| softmax(r.as_ref())).collect(),
        }
    }

    /// Deterministic distribution placing all mass on `a[i]`.
    pub fn one_hot(a: &AntecedentVector) -> Self {
        let rows = a
            .as_slice()
            .iter()
            .enumerate()
            .map(|(i, &ai)| {
                let mut row = vec![0.0; i + 1];
                row[ai] = 1.0;
                row
            })
            .collect();
        Self { rows }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j > i {
            0.0
        } else {
            self.rows[i][j]
        }
    }
}

/// Numerically stable softmax.
pub fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = z.iter().map(|&v| (v - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    for v in &mut out {
        *v /= sum;
    }
    out
}

/// Lower-triangular `q[i][u] = p(m_i in E_u)`, optionally sharpened by a
/// temperature.
#[derive(Debug, Clone, PartialEq)]
pub struct MembershipMatrix {
    rows: Vec<Vec<f64>>,
    temperature: Option<f64>,
}

impl MembershipMatrix {
    /// Wraps raw rows; row `i` must have `i + 1` entries.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        for (i, row) in rows.iter().enumerate() {
            if row.len() != i + 1 {
                return Err(Error::Shape(format!(
                    "membership row {i} has {} entries, expected {}",
                    row.len(),
                    i + 1
                )));
            }
        }
        Ok(Self {
            rows,
            temperature: None,
        })
    }

    /// One-hot membership for a hard clustering: each mention belongs to the
    /// entity named after the first mention of its cluster.
    pub fn from_clustering(c: &Clustering) -> Self {
        let first = c.first_mentions();
        let rows = first
            .iter()
            .enumerate()
            .map(|(i, &u)| {
                let mut row = vec![0.0; i + 1];
                row[u] = 1.0;
                row
            })
            .collect();
        Self {
            rows,
            temperature: None,
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn get(&self, i: usize, u: usize) -> f64 {
        if u > i {
            0.0
        } else {
            self.rows[i][u]
        }
    }

    /// Temperature used to produce this matrix, if it was tempered.
    pub fn temperature(&self) -> Option<f64> {
        self.temperature
    }

    /// `log q[i][u]` for `u <= i`; structural and exact zeros map to `-inf`.
    pub fn log_row(&self, i: usize) -> Vec<f64> {
        self.rows[i].iter().map(|&q| q.ln()).collect()
    }

    /// Column `u` as a dense vector of length `n` (zeros above the diagonal).
    pub fn column(&self, u: usize) -> Vec<f64> {
        (0..self.len()).map(|i| self.get(i, u)).collect()
    }

    /// Most probable entity per mention (ties to the smallest index).
    pub fn argmax_entities(&self) -> Vec<usize> {
        self.rows.iter().map(|r| argmax(r)).collect()
    }

    /// Hard clustering obtained by assigning each mention to its most
    /// probable entity. This is the limit of the tempered matrix as the
    /// temperature goes to zero.
    pub fn argmax_clustering(&self) -> Clustering {
        Clustering::from_labels(&self.argmax_entities())
    }
}

/// Runs the triangular recursion; `O(n^3)` time and `O(n^2)` space.
pub fn membership(p: &LinkDistribution) -> MembershipMatrix {
    let n = p.len();
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(n);
    for i in 0..n {
        let pi = &p.rows()[i];
        let mut row = vec![0.0; i + 1];
        for (j, qj) in q.iter().enumerate() {
            let pij = pi[j];
            if pij == 0.0 {
                continue;
            }
            for (u, &qju) in qj.iter().enumerate() {
                row[u] += pij * qju;
            }
        }
        row[i] = pi[i];
        q.push(row);
    }
    MembershipMatrix {
        rows: q,
        temperature: None,
    }
}

/// Reverse sweep of [`membership`]: maps `dL/dq` to `dL/dp`.
pub fn membership_backward(
    p: &LinkDistribution,
    q: &MembershipMatrix,
    grad_q: &[Vec<f64>],
) -> Vec<Vec<f64>> {
    let n = p.len();
    let mut gq: Vec<Vec<f64>> = grad_q.to_vec();
    let mut gp: Vec<Vec<f64>> = (0..n).map(|i| vec![0.0; i + 1]).collect();
    for i in (0..n).rev() {
        gp[i][i] += gq[i][i];
        let pi = &p.rows()[i];
        for j in 0..i {
            let qj = &q.rows()[j];
            let mut acc = 0.0;
            for u in 0..=j {
                let g = gq[i][u];
                acc += g * qj[u];
                gq[j][u] += g * pi[j];
            }
            gp[i][j] += acc;
        }
    }
    gp
}

/// Enumerates every antecedent vector; test oracle for [`membership`].
pub fn brute_force_membership(p: &LinkDistribution) -> Result<MembershipMatrix> {
    let n = p.len();
    if n > BRUTE_FORCE_MAX_MENTIONS {
        return Err(Error::Domain(format!(
            "brute force limited to {BRUTE_FORCE_MAX_MENTIONS} mentions, got {n}"
        )));
    }
    let mut q: Vec<Vec<f64>> = (0..n).map(|i| vec![0.0; i + 1]).collect();
    let mut a = vec![0usize; n];
    loop {
        let weight: f64 = a
            .iter()
            .enumerate()
            .map(|(i, &ai)| p.rows()[i][ai])
            .product();
        if weight != 0.0 {
            let roots = AntecedentVector::new(a.clone())
                .expect("odometer yields valid vectors")
                .roots();
            for (i, &r) in roots.iter().enumerate() {
                q[i][r] += weight;
            }
        }
        // odometer over a_i in 0..=i
        let mut k = 0;
        while k < n {
            if a[k] < k {
                a[k] += 1;
                break;
            }
            a[k] = 0;
            k += 1;
        }
        if k == n {
            break;
        }
    }
    Ok(MembershipMatrix {
        rows: q,
        temperature: None,
    })
}

/// Temperature softmax over `log q` within each row, restricted to `u <= i`.
/// Zero entries stay zero at every temperature.
pub fn tempered_membership(q: &MembershipMatrix, t: f64) -> Result<MembershipMatrix> {
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::Domain(format!(
            "temperature must be positive, got {t}"
        )));
    }
    let rows = q
        .rows()
        .iter()
        .map(|row| {
            let logits: Vec<f64> = row
                .iter()
                .map(|&v| {
                    if v > 0.0 {
                        v.ln() / t
                    } else {
                        f64::NEG_INFINITY
                    }
                })
                .collect();
            let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            if max == f64::NEG_INFINITY {
                return vec![0.0; row.len()];
            }
            let mut out: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
            let sum: f64 = out.iter().sum();
            for v in &mut out {
                *v /= sum;
            }
            out
        })
        .collect();
    Ok(MembershipMatrix {
        rows,
        temperature: Some(t),
    })
}

/// Backward pass of [`tempered_membership`]: maps `dL/dq_T` to `dL/dq`.
pub fn tempered_backward(
    q: &MembershipMatrix,
    tempered: &MembershipMatrix,
    t: f64,
    grad_tempered: &[Vec<f64>],
) -> Vec<Vec<f64>> {
    q.rows()
        .iter()
        .zip(tempered.rows())
        .zip(grad_tempered)
        .map(|((qr, tr), gr)| {
            let dot: f64 = tr.iter().zip(gr).map(|(a, b)| a * b).sum();
            qr.iter()
                .zip(tr)
                .zip(gr)
                .map(|((&qv, &tv), &g)| {
                    if qv > 0.0 {
                        tv * (g - dot) / (t * qv)
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn example3() -> LinkDistribution {
        LinkDistribution::new(vec![vec![1.0], vec![0.6, 0.4], vec![0.5, 0.3, 0.2]]).unwrap()
    }

    fn random_dist(rng: &mut ChaCha8Rng, n: usize) -> LinkDistribution {
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..=i).map(|_| rng.random_range(-3.0..3.0)).collect())
            .collect();
        LinkDistribution::from_scores(&rows)
    }

    #[test]
    fn single_mention() {
        let p = LinkDistribution::new(vec![vec![1.0]]).unwrap();
        assert_eq!(membership(&p).rows(), &[vec![1.0]]);
        assert_eq!(brute_force_membership(&p).unwrap().rows(), &[vec![1.0]]);
    }

    #[test]
    fn three_mention_fixture() {
        // Brute force over the six antecedent vectors by hand:
        // q3 = (0.5 + 0.3*0.6, 0.3*0.4, 0.2) = (0.68, 0.12, 0.20).
        for q in [
            membership(&example3()),
            brute_force_membership(&example3()).unwrap(),
        ] {
            let expected = [0.68, 0.12, 0.20];
            for (u, e) in expected.iter().enumerate() {
                assert!((q.get(2, u) - e).abs() < 1e-12, "{:?}", q.rows());
            }
            assert!((q.get(1, 0) - 0.6).abs() < 1e-12);
            assert!((q.get(1, 1) - 0.4).abs() < 1e-12);
        }
    }

    #[test]
    fn one_hot_chain_collapses_to_first_column() {
        let a = AntecedentVector::new(vec![0, 0, 1]).unwrap();
        let q = membership(&LinkDistribution::one_hot(&a));
        for i in 0..3 {
            assert_eq!(q.get(i, 0), 1.0);
            for u in 1..=i {
                assert_eq!(q.get(i, u), 0.0);
            }
        }
    }

    #[test]
    fn uniform_rows_match_oracle() {
        let rows: Vec<Vec<f64>> = (0..4).map(|i| vec![1.0 / (i + 1) as f64; i + 1]).collect();
        let p = LinkDistribution::new(rows).unwrap();
        let fast = membership(&p);
        let slow = brute_force_membership(&p).unwrap();
        for i in 0..4 {
            for u in 0..=i {
                assert!((fast.get(i, u) - slow.get(i, u)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn brute_force_refuses_large() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = random_dist(&mut rng, 9);
        assert!(matches!(brute_force_membership(&p), Err(Error::Domain(_))));
    }

    #[test]
    fn invalid_distribution_rejected() {
        assert!(LinkDistribution::new(vec![vec![1.0], vec![0.7, 0.7]]).is_err());
        assert!(LinkDistribution::new(vec![vec![1.0], vec![1.5, -0.5]]).is_err());
        assert!(LinkDistribution::new(vec![vec![0.5, 0.5]]).is_err());
    }

    #[test]
    fn temperature_examples() {
        let q = membership(&example3());
        let same = tempered_membership(&q, 1.0).unwrap();
        for i in 0..3 {
            for u in 0..=i {
                assert!((same.get(i, u) - q.get(i, u)).abs() < 1e-12);
            }
        }
        let sharp = tempered_membership(&q, 0.01).unwrap();
        assert!((sharp.get(2, 0) - 1.0).abs() < 1e-12);
        assert!(sharp.get(2, 1) < 1e-12 && sharp.get(2, 2) < 1e-12);

        let uniform = MembershipMatrix::from_rows(vec![vec![1.0], vec![0.5, 0.5]]).unwrap();
        for t in [0.05, 0.7, 3.0] {
            let u = tempered_membership(&uniform, t).unwrap();
            assert!((u.get(1, 0) - 0.5).abs() < 1e-15);
        }
        assert!(tempered_membership(&q, 0.0).is_err());
        assert!(tempered_membership(&q, -1.0).is_err());
    }

    #[test]
    fn zeros_survive_tempering() {
        let a = AntecedentVector::new(vec![0, 1, 1]).unwrap();
        let q = membership(&LinkDistribution::one_hot(&a));
        for t in [0.1, 1.0, 5.0] {
            let qt = tempered_membership(&q, t).unwrap();
            assert_eq!(qt.rows(), q.rows());
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 6;
        let scores: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..=i).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let weights: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..=i).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let t = 0.7;
        // Objective: sum of w * q_T with q built from raw (unnormalized) p.
        let objective = |p: &[Vec<f64>]| -> f64 {
            let q = membership(&LinkDistribution { rows: p.to_vec() });
            let qt = tempered_membership(&q, t).unwrap();
            qt.rows()
                .iter()
                .zip(&weights)
                .map(|(r, w)| r.iter().zip(w).map(|(a, b)| a * b).sum::<f64>())
                .sum()
        };
        let p = LinkDistribution::from_scores(&scores);
        let q = membership(&p);
        let qt = tempered_membership(&q, t).unwrap();
        let gq = tempered_backward(&q, &qt, t, &weights);
        let gp = membership_backward(&p, &q, &gq);
        let h = 1e-6;
        for i in 0..n {
            for j in 0..=i {
                let mut plus = p.rows().to_vec();
                plus[i][j] += h;
                let mut minus = p.rows().to_vec();
                minus[i][j] -= h;
                let fd = (objective(&plus) - objective(&minus)) / (2.0 * h);
                assert!(
                    (fd - gp[i][j]).abs() < 1e-6,
                    "({i},{j}) fd={fd} an={}",
                    gp[i][j]
                );
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn dist(max_n: usize) -> impl Strategy<Value = LinkDistribution> {
            (1..=max_n)
                .prop_flat_map(|n| {
                    (0..n)
                        .map(|i| proptest::collection::vec(-5.0f64..5.0, i + 1))
                        .collect::<Vec<_>>()
                })
                .prop_map(|rows| LinkDistribution::from_scores(&rows))
        }

        proptest! {
            #[test]
            fn rows_sum_to_one(p in dist(30)) {
                let q = membership(&p);
                for row in q.rows() {
                    prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                }
            }

            #[test]
            fn later_mentions_never_exceed_founder(p in dist(30)) {
                let q = membership(&p);
                for i in 0..q.len() {
                    for u in 0..i {
                        prop_assert!(q.get(i, u) <= q.get(u, u) + 1e-12);
                    }
                }
            }

            #[test]
            fn recursion_matches_enumeration(p in dist(7)) {
                let fast = membership(&p);
                let slow = brute_force_membership(&p).unwrap();
                for i in 0..p.len() {
                    for u in 0..=i {
                        prop_assert!((fast.get(i, u) - slow.get(i, u)).abs() < 1e-10);
                    }
                }
            }

            #[test]
            fn tempering_keeps_rows_normalized_and_ranking(p in dist(12), t in 0.01f64..5.0) {
                let q = membership(&p);
                let qt = tempered_membership(&q, t).unwrap();
                for i in 0..q.len() {
                    prop_assert!((qt.rows()[i].iter().sum::<f64>() - 1.0).abs() < 1e-9);
                }
                prop_assert_eq!(qt.argmax_entities(), q.argmax_entities());
            }
        }
    }

    #[test]
    fn from_scores_shift_invariant() {
        let a = LinkDistribution::from_scores(&[vec![0.3], vec![1.0, 0.0]]);
        let b = LinkDistribution::from_scores(&[vec![100.3], vec![101.0, 100.0]]);
        for i in 0..2 {
            for j in 0..=i {
                assert!((a.get(i, j) - b.get(i, j)).abs() < 1e-12);
            }
        }
    }
}
