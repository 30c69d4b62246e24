//! Hard clusterings, antecedent vectors and argmax decoding.
//!
//! Mention indices are 0-based throughout the library. Files and reports that
//! are meant for people use 1-based numbering and convert at the boundary.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::soft_entity::LinkDistribution;

/// Tolerance on row sums accepted by [`decode_argmax`].
pub const DECODE_ROW_TOLERANCE: f64 = 1e-6;

/// A partition of the mentions `0..n` into non-empty, disjoint entities.
///
/// Stored in canonical form: every cluster sorted ascending and clusters
/// ordered by their first mention, so structural equality is partition
/// equality.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Clustering {
    n: usize,
    clusters: Vec<Vec<usize>>,
}

impl Clustering {
    /// Validates that `clusters` partitions `0..n`.
    pub fn new(n: usize, clusters: Vec<Vec<usize>>) -> Result<Self> {
        let mut seen = vec![false; n];
        for cluster in &clusters {
            if cluster.is_empty() {
                return Err(Error::Input("empty cluster".into()));
            }
            for &m in cluster {
                if m >= n {
                    return Err(Error::Input(format!(
                        "mention {m} out of range for {n} mentions"
                    )));
                }
                if seen[m] {
                    return Err(Error::Input(format!("mention {m} appears in two clusters")));
                }
                seen[m] = true;
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::Input(format!("mention {missing} is not covered")));
        }
        Ok(Self::canonical(n, clusters))
    }

    /// Groups mentions by an arbitrary label per mention.
    pub fn from_labels<L: Eq + std::hash::Hash + Clone>(labels: &[L]) -> Self {
        let mut index: std::collections::HashMap<L, usize> = Default::default();
        let mut clusters: Vec<Vec<usize>> = Vec::new();
        for (m, label) in labels.iter().enumerate() {
            let slot = *index.entry(label.clone()).or_insert_with(|| {
                clusters.push(Vec::new());
                clusters.len() - 1
            });
            clusters[slot].push(m);
        }
        Self::canonical(labels.len(), clusters)
    }

    /// Every mention in its own cluster.
    pub fn singletons(n: usize) -> Self {
        Self {
            n,
            clusters: (0..n).map(|m| vec![m]).collect(),
        }
    }

    fn canonical(n: usize, mut clusters: Vec<Vec<usize>>) -> Self {
        for c in &mut clusters {
            c.sort_unstable();
        }
        clusters.sort_unstable_by_key(|c| c[0]);
        Self { n, clusters }
    }

    /// Number of mentions covered.
    pub fn num_mentions(&self) -> usize {
        self.n
    }

    pub fn num_clusters(&self) -> usize {
        self.clusters.len()
    }

    pub fn clusters(&self) -> &[Vec<usize>] {
        &self.clusters
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Cluster index (in canonical order) for every mention.
    pub fn labels(&self) -> Vec<usize> {
        let mut labels = vec![0; self.n];
        for (c, cluster) in self.clusters.iter().enumerate() {
            for &m in cluster {
                labels[m] = c;
            }
        }
        labels
    }

    /// For each mention, the first mention of its cluster.
    pub fn first_mentions(&self) -> Vec<usize> {
        let mut first = vec![0; self.n];
        for cluster in &self.clusters {
            for &m in cluster {
                first[m] = cluster[0];
            }
        }
        first
    }
}

/// Antecedent choice per mention: `a[i] <= i`, with `a[i] == i` a self-link.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct AntecedentVector(Vec<usize>);

impl AntecedentVector {
    pub fn new(a: Vec<usize>) -> Result<Self> {
        if let Some((i, &ai)) = a.iter().enumerate().find(|(i, &ai)| ai > *i) {
            return Err(Error::Input(format!(
                "antecedent {ai} of mention {i} points forward"
            )));
        }
        Ok(Self(a))
    }

    /// Every mention links to itself.
    pub fn self_links(n: usize) -> Self {
        Self((0..n).collect())
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Entity root (first mention of the chain) for every mention.
    pub fn roots(&self) -> Vec<usize> {
        let mut root = Vec::with_capacity(self.0.len());
        for (i, &a) in self.0.iter().enumerate() {
            let r = if a == i { i } else { root[a] };
            root.push(r);
        }
        root
    }

    /// Clusters are the chains rooted at self-linked mentions.
    pub fn to_clustering(&self) -> Clustering {
        Clustering::from_labels(&self.roots())
    }
}

impl std::ops::Index<usize> for AntecedentVector {
    type Output = usize;

    fn index(&self, i: usize) -> &usize {
        &self.0[i]
    }
}

/// Index of the largest entry; ties go to the smallest index.
pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (j, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = j;
        }
    }
    best
}

/// Picks the highest-probability antecedent for each mention.
///
/// Row `i` must hold `i + 1` probabilities summing to one within
/// [`DECODE_ROW_TOLERANCE`].
pub fn decode_argmax<R: AsRef<[f64]>>(rows: &[R]) -> Result<AntecedentVector> {
    let mut a = Vec::with_capacity(rows.len());
    for (i, row) in rows.iter().enumerate() {
        let row = row.as_ref();
        if row.len() != i + 1 {
            return Err(Error::InvalidDistribution(format!(
                "row {i} has {} entries, expected {}",
                row.len(),
                i + 1
            )));
        }
        let sum: f64 = row.iter().sum();
        if !sum.is_finite() || (sum - 1.0).abs() > DECODE_ROW_TOLERANCE {
            return Err(Error::InvalidDistribution(format!("row {i} sums to {sum}")));
        }
        a.push(argmax(row));
    }
    Ok(AntecedentVector(a))
}

impl LinkDistribution {
    /// Convenience wrapper around [`decode_argmax`].
    pub fn decode(&self) -> AntecedentVector {
        AntecedentVector(self.rows().iter().map(|r| argmax(r)).collect())
    }
}
