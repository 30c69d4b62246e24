//! Differentiable B³ and LEA over soft clusters.
//!
//! A soft cluster `S_u` holds the tempered membership probabilities
//! `q_T[i][u]` of every mention. Indicators in the exact metrics are replaced
//! by these probabilities:
//!
//! ```text
//! |S_u|_d         = sum_i q[i][u]
//! link_d(S_u)     = sum_{j<i} q[i][u] q[j][u]
//! |G_v ∩ S_u|_d   = sum_{i in G_v} q[i][u]
//! link_d(G_v∩S_u) = sum_{j<i; i,j in G_v} q[i][u] q[j][u]
//! ```
//!
//! Terms whose soft denominator falls below [`EPSILON`] contribute zero,
//! mirroring the 0/0 := 0 convention of the exact metrics. Gold-side
//! quantities stay hard.

use serde::{Deserialize, Serialize};

use crate::clustering::Clustering;
use crate::error::{Error, Result};
use crate::metrics::f_beta;
use crate::soft_entity::MembershipMatrix;

/// Soft denominators below this are treated as zero.
pub const EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RelaxedMetric {
    BCubed,
    Lea,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelaxedScore {
    /// Relaxed F_beta.
    pub value: f64,
    pub recall: f64,
    pub precision: f64,
    pub beta: f64,
    pub temperature: f64,
}

fn check_u(q: &MembershipMatrix, u: usize) -> Result<()> {
    if u >= q.len() {
        return Err(Error::Input(format!(
            "entity {u} out of range for {} mentions",
            q.len()
        )));
    }
    Ok(())
}

/// `|S_u|_d`.
pub fn soft_size(q: &MembershipMatrix, u: usize) -> Result<f64> {
    check_u(q, u)?;
    Ok((u..q.len()).map(|i| q.get(i, u)).sum())
}

/// `link_d(S_u)`, optionally restricted to pairs inside `restrict`.
pub fn soft_link(q: &MembershipMatrix, u: usize, restrict: Option<&[usize]>) -> Result<f64> {
    check_u(q, u)?;
    let mut keep = vec![restrict.is_none(); q.len()];
    if let Some(r) = restrict {
        for &m in r {
            if m >= q.len() {
                return Err(Error::Input(format!("mention {m} out of range")));
            }
            keep[m] = true;
        }
    }
    let (_, link) = (u..q.len())
        .filter(|&i| keep[i])
        .map(|i| q.get(i, u))
        .fold((0.0, 0.0), |(prefix, link), x| {
            (prefix + x, link + x * prefix)
        });
    Ok(link)
}

/// Gradient of `f_beta(p, r)` with respect to `p` and `r`.
fn f_beta_partials(p: f64, r: f64, beta: f64) -> (f64, f64) {
    let b2 = beta * beta;
    let den = b2 * p + r;
    if p + r <= 0.0 || den <= 0.0 {
        return (0.0, 0.0);
    }
    let scale = (1.0 + b2) / (den * den);
    (scale * r * r, scale * b2 * p * p)
}

/// Column statistics shared by both metrics.
struct SoftStats {
    n: usize,
    gold_of: Vec<usize>,
    gold_sizes: Vec<usize>,
    /// `a[u] = |S_u|_d`
    size: Vec<f64>,
    /// `inter[v][u] = |G_v ∩ S_u|_d`
    inter: Vec<Vec<f64>>,
}

impl SoftStats {
    fn new(q: &MembershipMatrix, gold: &Clustering) -> Result<Self> {
        let n = q.len();
        if gold.num_mentions() != n {
            return Err(Error::Input(format!(
                "gold covers {} mentions but the membership matrix has {n}",
                gold.num_mentions()
            )));
        }
        let gold_of = gold.labels();
        let k = gold.num_clusters();
        let mut size = vec![0.0; n];
        let mut inter = vec![vec![0.0; n]; k];
        for (i, row) in q.rows().iter().enumerate() {
            for (u, &x) in row.iter().enumerate() {
                size[u] += x;
                inter[gold_of[i]][u] += x;
            }
        }
        Ok(Self {
            n,
            gold_of,
            gold_sizes: gold.clusters().iter().map(Vec::len).collect(),
            size,
            inter,
        })
    }
}

/// Per-entry partials of recall and precision.
type SideGrads = (Vec<Vec<f64>>, Vec<Vec<f64>>);

fn finish(
    recall: f64,
    precision: f64,
    beta: f64,
    q: &MembershipMatrix,
    grads: Option<SideGrads>,
) -> (RelaxedScore, Option<Vec<Vec<f64>>>) {
    let score = RelaxedScore {
        value: f_beta(precision, recall, beta),
        recall,
        precision,
        beta,
        temperature: q.temperature().unwrap_or(1.0),
    };
    let grad = grads.map(|(gr, gp)| {
        let (dp, dr) = f_beta_partials(precision, recall, beta);
        gr.iter()
            .zip(&gp)
            .map(|(r, p)| r.iter().zip(p).map(|(a, b)| dr * a + dp * b).collect())
            .collect()
    });
    (score, grad)
}

fn b3_impl(
    q: &MembershipMatrix,
    gold: &Clustering,
    beta: f64,
    want_grad: bool,
) -> Result<(RelaxedScore, Option<Vec<Vec<f64>>>)> {
    let st = SoftStats::new(q, gold)?;
    let n = st.n;
    let total: f64 = n as f64;
    let recall_num: f64 = st
        .inter
        .iter()
        .zip(&st.gold_sizes)
        .map(|(row, &g)| row.iter().map(|x| x * x).sum::<f64>() / g as f64)
        .sum();
    let recall = if n == 0 { 0.0 } else { recall_num / total };

    // b[u] = sum_v |G_v ∩ S_u|_d^2
    let b: Vec<f64> = (0..n)
        .map(|u| st.inter.iter().map(|row| row[u] * row[u]).sum())
        .collect();
    let live: Vec<bool> = st.size.iter().map(|&a| a >= EPSILON).collect();
    let precision_num: f64 = (0..n).filter(|&u| live[u]).map(|u| b[u] / st.size[u]).sum();
    let precision_den: f64 = st.size.iter().sum();
    let precision = if precision_den < EPSILON {
        0.0
    } else {
        precision_num / precision_den
    };

    let grads = (want_grad && n > 0).then(|| {
        let mut gr = Vec::with_capacity(n);
        let mut gp = Vec::with_capacity(n);
        for i in 0..n {
            let v = st.gold_of[i];
            let g = st.gold_sizes[v] as f64;
            gr.push(
                (0..=i)
                    .map(|u| 2.0 * st.inter[v][u] / (g * total))
                    .collect::<Vec<_>>(),
            );
            gp.push(
                (0..=i)
                    .map(|u| {
                        let dnum = if live[u] {
                            let a = st.size[u];
                            2.0 * st.inter[v][u] / a - b[u] / (a * a)
                        } else {
                            0.0
                        };
                        if precision_den < EPSILON {
                            0.0
                        } else {
                            (dnum - precision) / precision_den
                        }
                    })
                    .collect::<Vec<_>>(),
            );
        }
        (gr, gp)
    });
    Ok(finish(recall, precision, beta, q, grads))
}

fn lea_impl(
    q: &MembershipMatrix,
    gold: &Clustering,
    beta: f64,
    want_grad: bool,
) -> Result<(RelaxedScore, Option<Vec<Vec<f64>>>)> {
    let st = SoftStats::new(q, gold)?;
    let n = st.n;
    let k = st.gold_sizes.len();
    let total = n as f64;

    // pairwise products accumulated against running prefix sums
    let mut link_inter = vec![vec![0.0; n]; k];
    let mut link_size = vec![0.0; n];
    let mut prefix_inter = vec![vec![0.0; n]; k];
    let mut prefix_size = vec![0.0; n];
    for (i, row) in q.rows().iter().enumerate() {
        let v = st.gold_of[i];
        for (u, &x) in row.iter().enumerate() {
            link_size[u] += x * prefix_size[u];
            prefix_size[u] += x;
            link_inter[v][u] += x * prefix_inter[v][u];
            prefix_inter[v][u] += x;
        }
    }
    let gold_links: Vec<f64> = st
        .gold_sizes
        .iter()
        .map(|&g| (g * g.saturating_sub(1)) as f64 / 2.0)
        .collect();

    let recall_num: f64 = (0..k)
        .filter(|&v| gold_links[v] > 0.0)
        .map(|v| st.gold_sizes[v] as f64 * link_inter[v].iter().sum::<f64>() / gold_links[v])
        .sum();
    let recall = if n == 0 { 0.0 } else { recall_num / total };

    // lambda[u] = sum_v link_d(G_v ∩ S_u)
    let lambda: Vec<f64> = (0..n)
        .map(|u| link_inter.iter().map(|r| r[u]).sum())
        .collect();
    let live: Vec<bool> = link_size.iter().map(|&l| l >= EPSILON).collect();
    let precision_num: f64 = (0..n)
        .filter(|&u| live[u])
        .map(|u| st.size[u] * lambda[u] / link_size[u])
        .sum();
    let precision_den: f64 = st.size.iter().sum();
    let precision = if precision_den < EPSILON {
        0.0
    } else {
        precision_num / precision_den
    };

    let grads = (want_grad && n > 0).then(|| {
        let mut gr = Vec::with_capacity(n);
        let mut gp = Vec::with_capacity(n);
        for (i, row) in q.rows().iter().enumerate() {
            let v = st.gold_of[i];
            let rscale = if gold_links[v] > 0.0 {
                st.gold_sizes[v] as f64 / (gold_links[v] * total)
            } else {
                0.0
            };
            gr.push(
                row.iter()
                    .enumerate()
                    .map(|(u, &x)| rscale * (st.inter[v][u] - x))
                    .collect::<Vec<_>>(),
            );
            gp.push(
                row.iter()
                    .enumerate()
                    .map(|(u, &x)| {
                        let dnum = if live[u] {
                            let (a, l, lam) = (st.size[u], link_size[u], lambda[u]);
                            lam / l + a * (st.inter[v][u] - x) / l - a * lam * (a - x) / (l * l)
                        } else {
                            0.0
                        };
                        if precision_den < EPSILON {
                            0.0
                        } else {
                            (dnum - precision) / precision_den
                        }
                    })
                    .collect::<Vec<_>>(),
            );
        }
        (gr, gp)
    });
    Ok(finish(recall, precision, beta, q, grads))
}

/// Relaxed B³ F_beta of a (tempered) membership matrix against gold.
pub fn relaxed_b3(q: &MembershipMatrix, gold: &Clustering, beta: f64) -> Result<RelaxedScore> {
    Ok(b3_impl(q, gold, beta, false)?.0)
}

/// Relaxed LEA F_beta of a (tempered) membership matrix against gold.
pub fn relaxed_lea(q: &MembershipMatrix, gold: &Clustering, beta: f64) -> Result<RelaxedScore> {
    Ok(lea_impl(q, gold, beta, false)?.0)
}

pub fn relaxed_score(
    metric: RelaxedMetric,
    q: &MembershipMatrix,
    gold: &Clustering,
    beta: f64,
) -> Result<RelaxedScore> {
    match metric {
        RelaxedMetric::BCubed => relaxed_b3(q, gold, beta),
        RelaxedMetric::Lea => relaxed_lea(q, gold, beta),
    }
}

/// Score plus `dF/dq[i][u]` for every `u <= i`.
pub fn relaxed_score_grad(
    metric: RelaxedMetric,
    q: &MembershipMatrix,
    gold: &Clustering,
    beta: f64,
) -> Result<(RelaxedScore, Vec<Vec<f64>>)> {
    let (score, grad) = match metric {
        RelaxedMetric::BCubed => b3_impl(q, gold, beta, true)?,
        RelaxedMetric::Lea => lea_impl(q, gold, beta, true)?,
    };
    Ok((score, grad.unwrap_or_default()))
}

/// `-F_beta + lambda * ||theta||_1`.
pub fn relaxed_loss(
    q: &MembershipMatrix,
    gold: &Clustering,
    metric: RelaxedMetric,
    beta: f64,
    lambda: f64,
    params_l1: f64,
) -> Result<f64> {
    if !(lambda >= 0.0) {
        return Err(Error::Domain(format!("lambda must be >= 0, got {lambda}")));
    }
    Ok(-relaxed_score(metric, q, gold, beta)?.value + lambda * params_l1)
}
