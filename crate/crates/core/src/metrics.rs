//! Exact coreference metrics: MUC, B³, CEAF_m, CEAF_e, BLANC and LEA.
//!
//! Every metric is computed as a [`Tally`] of recall/precision numerators and
//! denominators so that corpus scores can be micro-aggregated by summing
//! tallies before dividing. Ratios with a zero denominator are 0.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::assignment::max_weight_assignment;
use crate::clustering::Clustering;
use crate::error::{Error, Result};

/// Precision, recall and F-score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f: f64,
    pub beta: f64,
}

impl Prf {
    pub fn new(precision: f64, recall: f64, beta: f64) -> Self {
        Self {
            precision,
            recall,
            f: f_beta(precision, recall, beta),
            beta,
        }
    }

    pub fn perfect() -> Self {
        Self::new(1.0, 1.0, 1.0)
    }
}

/// `(1 + b^2) p r / (b^2 p + r)`, and 0 when `p + r = 0`.
pub fn f_beta(p: f64, r: f64, beta: f64) -> f64 {
    let b2 = beta * beta;
    let den = b2 * p + r;
    if p + r <= 0.0 || den <= 0.0 {
        0.0
    } else {
        (1.0 + b2) * p * r / den
    }
}

/// Mean of MUC, B³ and CEAF_e F-scores.
pub fn conll_average(muc_f: f64, b3_f: f64, ceafe_f: f64) -> f64 {
    (muc_f + b3_f + ceafe_f) / 3.0
}

fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Additive numerator/denominator pairs behind a precision/recall score.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Tally {
    pub recall_num: f64,
    pub recall_den: f64,
    pub precision_num: f64,
    pub precision_den: f64,
}

impl Tally {
    pub fn recall(&self) -> f64 {
        ratio(self.recall_num, self.recall_den)
    }

    pub fn precision(&self) -> f64 {
        ratio(self.precision_num, self.precision_den)
    }

    pub fn prf(&self, beta: f64) -> Prf {
        Prf::new(self.precision(), self.recall(), beta)
    }
}

impl std::ops::AddAssign for Tally {
    fn add_assign(&mut self, o: Self) {
        self.recall_num += o.recall_num;
        self.recall_den += o.recall_den;
        self.precision_num += o.precision_num;
        self.precision_den += o.precision_den;
    }
}

/// BLANC keeps separate tallies for coreference and non-coreference links.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BlancTally {
    pub coref: Tally,
    pub non_coref: Tally,
}

impl BlancTally {
    /// Averages the link classes that are non-empty on at least one side.
    /// Returns a perfect score when there are no mention pairs at all.
    pub fn prf(&self) -> Prf {
        let classes: Vec<Prf> = [self.coref, self.non_coref]
            .iter()
            .filter(|t| t.recall_den > 0.0 || t.precision_den > 0.0)
            .map(|t| t.prf(1.0))
            .collect();
        if classes.is_empty() {
            return Prf::perfect();
        }
        let k = classes.len() as f64;
        Prf {
            precision: classes.iter().map(|c| c.precision).sum::<f64>() / k,
            recall: classes.iter().map(|c| c.recall).sum::<f64>() / k,
            f: classes.iter().map(|c| c.f).sum::<f64>() / k,
            beta: 1.0,
        }
    }
}

impl std::ops::AddAssign for BlancTally {
    fn add_assign(&mut self, o: Self) {
        self.coref += o.coref;
        self.non_coref += o.non_coref;
    }
}

/// Entity similarity used by CEAF.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CeafSimilarity {
    /// `|G ∩ S|`, normalized by mention counts.
    Mention,
    /// `2|G ∩ S| / (|G| + |S|)`, normalized by entity counts.
    Entity,
}

/// How LEA treats single-mention entities, which have no links.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum LeaSingletons {
    /// `link(E) = 0` for singletons: they add nothing to the numerators but
    /// still count in the denominators.
    #[default]
    NoLinks,
    /// Singletons carry one self-link, resolved only when the other side has
    /// the same singleton.
    SelfLink,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Metric {
    Muc,
    BCubed,
    CeafM,
    CeafE,
    Blanc,
    Lea,
}

impl Metric {
    pub const ALL: [Metric; 6] = [
        Metric::Muc,
        Metric::BCubed,
        Metric::CeafM,
        Metric::CeafE,
        Metric::Blanc,
        Metric::Lea,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Muc => "MUC",
            Metric::BCubed => "B3",
            Metric::CeafM => "CEAFm",
            Metric::CeafE => "CEAFe",
            Metric::Blanc => "BLANC",
            Metric::Lea => "LEA",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Cluster-overlap counts `|G_v ∩ S_u|` plus cluster sizes.
struct Overlap {
    counts: Vec<Vec<usize>>,
    gold_sizes: Vec<usize>,
    sys_sizes: Vec<usize>,
}

impl Overlap {
    fn new(gold: &Clustering, sys: &Clustering) -> Result<Self> {
        check_same_mentions(gold, sys)?;
        let sys_labels = sys.labels();
        let mut counts = vec![vec![0; sys.num_clusters()]; gold.num_clusters()];
        for (v, g) in gold.clusters().iter().enumerate() {
            for &m in g {
                counts[v][sys_labels[m]] += 1;
            }
        }
        Ok(Self {
            counts,
            gold_sizes: gold.clusters().iter().map(Vec::len).collect(),
            sys_sizes: sys.clusters().iter().map(Vec::len).collect(),
        })
    }

    fn transposed(&self) -> Self {
        let m = self.sys_sizes.len();
        let counts = (0..m)
            .map(|u| self.counts.iter().map(|row| row[u]).collect())
            .collect();
        Self {
            counts,
            gold_sizes: self.sys_sizes.clone(),
            sys_sizes: self.gold_sizes.clone(),
        }
    }
}

fn check_same_mentions(gold: &Clustering, sys: &Clustering) -> Result<()> {
    if gold.num_mentions() != sys.num_mentions() {
        return Err(Error::Input(format!(
            "gold covers {} mentions but response covers {}",
            gold.num_mentions(),
            sys.num_mentions()
        )));
    }
    Ok(())
}

fn links(size: usize) -> f64 {
    (size * size.saturating_sub(1)) as f64 / 2.0
}

pub fn muc_tally(gold: &Clustering, sys: &Clustering) -> Result<Tally> {
    let ov = Overlap::new(gold, sys)?;
    // (numerator, denominator) of one direction: |K| - |p(K)| over |K| - 1
    let side = |ov: &Overlap| -> (f64, f64) {
        ov.counts
            .iter()
            .zip(&ov.gold_sizes)
            .fold((0.0, 0.0), |(num, den), (row, &size)| {
                let parts = row.iter().filter(|&&c| c > 0).count();
                (num + (size - parts) as f64, den + (size - 1) as f64)
            })
    };
    let (recall_num, recall_den) = side(&ov);
    let (precision_num, precision_den) = side(&ov.transposed());
    Ok(Tally {
        recall_num,
        recall_den,
        precision_num,
        precision_den,
    })
}

pub fn b_cubed_tally(gold: &Clustering, sys: &Clustering) -> Result<Tally> {
    let ov = Overlap::new(gold, sys)?;
    let side = |ov: &Overlap| -> (f64, f64) {
        ov.counts
            .iter()
            .zip(&ov.gold_sizes)
            .fold((0.0, 0.0), |(num, den), (row, &size)| {
                let sq: usize = row.iter().map(|&c| c * c).sum();
                (num + sq as f64 / size as f64, den + size as f64)
            })
    };
    let (recall_num, recall_den) = side(&ov);
    let (precision_num, precision_den) = side(&ov.transposed());
    Ok(Tally {
        recall_num,
        recall_den,
        precision_num,
        precision_den,
    })
}

pub fn ceaf_tally(gold: &Clustering, sys: &Clustering, sim: CeafSimilarity) -> Result<Tally> {
    let ov = Overlap::new(gold, sys)?;
    let weights: Vec<Vec<f64>> = ov
        .counts
        .iter()
        .zip(&ov.gold_sizes)
        .map(|(row, &g)| {
            row.iter()
                .zip(&ov.sys_sizes)
                .map(|(&c, &s)| match sim {
                    CeafSimilarity::Mention => c as f64,
                    CeafSimilarity::Entity => 2.0 * c as f64 / (g + s) as f64,
                })
                .collect()
        })
        .collect();
    let (best, _) = max_weight_assignment(&weights);
    let (recall_den, precision_den) = match sim {
        CeafSimilarity::Mention => (
            ov.gold_sizes.iter().sum::<usize>() as f64,
            ov.sys_sizes.iter().sum::<usize>() as f64,
        ),
        CeafSimilarity::Entity => (ov.gold_sizes.len() as f64, ov.sys_sizes.len() as f64),
    };
    Ok(Tally {
        recall_num: best,
        recall_den,
        precision_num: best,
        precision_den,
    })
}

pub fn lea_tally(gold: &Clustering, sys: &Clustering, singletons: LeaSingletons) -> Result<Tally> {
    let ov = Overlap::new(gold, sys)?;
    let side = |ov: &Overlap| -> (f64, f64) {
        let mut num = 0.0;
        let mut den = 0.0;
        for (row, &size) in ov.counts.iter().zip(&ov.gold_sizes) {
            den += size as f64;
            let resolved = match (singletons, size) {
                (LeaSingletons::SelfLink, 1) => {
                    let u = row.iter().position(|&c| c > 0).expect("covered mention");
                    if ov.sys_sizes[u] == 1 {
                        1.0
                    } else {
                        0.0
                    }
                }
                (LeaSingletons::NoLinks, 1) => continue,
                _ => row.iter().map(|&c| links(c)).sum::<f64>() / links(size),
            };
            num += size as f64 * resolved;
        }
        (num, den)
    };
    let (recall_num, recall_den) = side(&ov);
    let (precision_num, precision_den) = side(&ov.transposed());
    Ok(Tally {
        recall_num,
        recall_den,
        precision_num,
        precision_den,
    })
}

pub fn blanc_tally(gold: &Clustering, sys: &Clustering) -> Result<BlancTally> {
    let ov = Overlap::new(gold, sys)?;
    let n = gold.num_mentions();
    let pairs = links(n);
    let gold_coref: f64 = ov.gold_sizes.iter().map(|&s| links(s)).sum();
    let sys_coref: f64 = ov.sys_sizes.iter().map(|&s| links(s)).sum();
    let both_coref: f64 = ov.counts.iter().flatten().map(|&c| links(c)).sum();
    let gold_non = pairs - gold_coref;
    let sys_non = pairs - sys_coref;
    // pairs split on both sides = all pairs minus those coreferent on either
    let both_non = pairs - gold_coref - sys_coref + both_coref;
    Ok(BlancTally {
        coref: Tally {
            recall_num: both_coref,
            recall_den: gold_coref,
            precision_num: both_coref,
            precision_den: sys_coref,
        },
        non_coref: Tally {
            recall_num: both_non,
            recall_den: gold_non,
            precision_num: both_non,
            precision_den: sys_non,
        },
    })
}

pub fn muc(gold: &Clustering, sys: &Clustering) -> Result<Prf> {
    Ok(muc_tally(gold, sys)?.prf(1.0))
}

pub fn b_cubed(gold: &Clustering, sys: &Clustering) -> Result<Prf> {
    Ok(b_cubed_tally(gold, sys)?.prf(1.0))
}

pub fn ceaf(gold: &Clustering, sys: &Clustering, sim: CeafSimilarity) -> Result<Prf> {
    Ok(ceaf_tally(gold, sys, sim)?.prf(1.0))
}

/// LEA with the default singleton convention.
pub fn lea(gold: &Clustering, sys: &Clustering) -> Result<Prf> {
    Ok(lea_tally(gold, sys, LeaSingletons::default())?.prf(1.0))
}

pub fn blanc(gold: &Clustering, sys: &Clustering) -> Result<Prf> {
    Ok(blanc_tally(gold, sys)?.prf())
}

/// Scores one metric with F1.
pub fn score(metric: Metric, gold: &Clustering, sys: &Clustering) -> Result<Prf> {
    match metric {
        Metric::Muc => muc(gold, sys),
        Metric::BCubed => b_cubed(gold, sys),
        Metric::CeafM => ceaf(gold, sys, CeafSimilarity::Mention),
        Metric::CeafE => ceaf(gold, sys, CeafSimilarity::Entity),
        Metric::Blanc => blanc(gold, sys),
        Metric::Lea => lea(gold, sys),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(n: usize, clusters: &[&[usize]]) -> Clustering {
        // fixtures are written 1-based
        Clustering::new(
            n,
            clusters
                .iter()
                .map(|c| c.iter().map(|m| m - 1).collect())
                .collect(),
        )
        .unwrap()
    }

    fn fixture() -> (Clustering, Clustering) {
        (c(4, &[&[1, 2, 3], &[4]]), c(4, &[&[1, 2], &[3, 4]]))
    }

    fn close(a: f64, b: f64) {
        assert!((a - b).abs() < 1e-12, "{a} != {b}");
    }

    #[test]
    fn b_cubed_fixture() {
        let (g, s) = fixture();
        let prf = b_cubed(&g, &s).unwrap();
        close(prf.recall, 2.0 / 3.0);
        close(prf.precision, 0.75);
        close(prf.f, 12.0 / 17.0);

        let prf = b_cubed(&c(2, &[&[1, 2]]), &Clustering::singletons(2)).unwrap();
        close(prf.recall, 0.5);
        close(prf.precision, 1.0);
    }

    #[test]
    fn lea_fixture() {
        let (g, s) = fixture();
        let prf = lea(&g, &s).unwrap();
        close(prf.recall, 0.25);
        close(prf.precision, 0.5);
        close(prf.f, 1.0 / 3.0);

        let prf = lea(&c(2, &[&[1, 2]]), &Clustering::singletons(2)).unwrap();
        assert_eq!((prf.precision, prf.recall, prf.f), (0.0, 0.0, 0.0));
    }

    #[test]
    fn lea_self_link_variant() {
        let g = c(3, &[&[1, 2], &[3]]);
        let default = lea(&g, &g).unwrap();
        close(default.recall, 2.0 / 3.0);
        let variant = lea_tally(&g, &g, LeaSingletons::SelfLink).unwrap().prf(1.0);
        close(variant.f, 1.0);
        // the singleton is only credited when it stays a singleton
        let s = c(3, &[&[1, 2, 3]]);
        let t = lea_tally(&g, &s, LeaSingletons::SelfLink).unwrap();
        close(t.recall_num, 2.0);
    }

    #[test]
    fn muc_fixture() {
        let (g, s) = fixture();
        let prf = muc(&g, &s).unwrap();
        close(prf.recall, 0.5);
        close(prf.precision, 0.5);
        close(prf.f, 0.5);

        let g = c(3, &[&[1, 2, 3]]);
        assert_eq!(muc(&g, &g).unwrap(), Prf::perfect());

        let s = Clustering::singletons(3);
        let prf = muc(&s, &s).unwrap();
        assert_eq!((prf.precision, prf.recall, prf.f), (0.0, 0.0, 0.0));
    }

    #[test]
    fn ceaf_fixture() {
        let (g, s) = fixture();
        let e = ceaf(&g, &s, CeafSimilarity::Entity).unwrap();
        close(e.recall, (0.8 + 2.0 / 3.0) / 2.0);
        close(e.precision, (0.8 + 2.0 / 3.0) / 2.0);
        assert!((e.f - 0.7333).abs() < 1e-4);
        let m = ceaf(&g, &s, CeafSimilarity::Mention).unwrap();
        close(m.recall, 0.75);
        close(m.precision, 0.75);
        for sim in [CeafSimilarity::Mention, CeafSimilarity::Entity] {
            let prf = ceaf(&g, &g, sim).unwrap();
            close(prf.f, 1.0);
        }
    }

    #[test]
    fn blanc_fixture() {
        let (g, s) = fixture();
        let t = blanc_tally(&g, &s).unwrap();
        close(t.coref.prf(1.0).f, 2.0 / 5.0);
        close(t.non_coref.prf(1.0).f, 4.0 / 7.0);
        let prf = blanc(&g, &s).unwrap();
        close(prf.f, 17.0 / 35.0);
        assert!((prf.f - 0.4857).abs() < 1e-4);
        close(blanc(&g, &g).unwrap().f, 1.0);
    }

    #[test]
    fn blanc_edge_classes() {
        let one = Clustering::singletons(1);
        assert_eq!(blanc(&one, &one).unwrap().f, 1.0);
        // all singletons: coref class empty on both sides and skipped
        let s = Clustering::singletons(3);
        assert_eq!(blanc(&s, &s).unwrap().f, 1.0);
        // one entity: non-coref class empty on both sides
        let g = c(3, &[&[1, 2, 3]]);
        assert_eq!(blanc(&g, &g).unwrap().f, 1.0);
        // coref class empty only in the response: scored 0
        let prf = blanc(&g, &s).unwrap();
        close(prf.f, 0.0);
        let g = c(3, &[&[1, 2], &[3]]);
        let prf = blanc(&g, &s).unwrap();
        // coref: F=0; non-coref: R=1, P=2/3
        close(prf.f, 0.4);
    }

    #[test]
    fn f_beta_examples() {
        close(f_beta(0.75, 2.0 / 3.0, 1.0), 12.0 / 17.0);
        for beta in [0.5, 1.0, 2.0] {
            close(f_beta(0.3, 0.3, beta), 0.3);
        }
        assert_eq!(f_beta(0.0, 0.0, 1.0), 0.0);
    }

    #[test]
    fn conll_average_examples() {
        close(conll_average(1.0, 1.0, 1.0), 1.0);
        assert!((conll_average(0.7322, 0.6144, 0.5774) - 0.6413).abs() < 5e-5);
        assert_eq!(conll_average(0.0, 0.0, 0.0), 0.0);
    }

    #[test]
    fn mention_mismatch() {
        let a = Clustering::singletons(2);
        let b = Clustering::singletons(3);
        for m in Metric::ALL {
            assert!(matches!(score(m, &a, &b), Err(Error::Input(_))));
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn pair() -> impl Strategy<Value = (Clustering, Clustering)> {
            (1usize..15).prop_flat_map(|n| {
                (
                    proptest::collection::vec(0usize..5, n),
                    proptest::collection::vec(0usize..5, n),
                )
                    .prop_map(|(a, b)| (Clustering::from_labels(&a), Clustering::from_labels(&b)))
            })
        }

        proptest! {
            #[test]
            fn scores_in_unit_interval((g, s) in pair()) {
                for m in Metric::ALL {
                    let prf = score(m, &g, &s).unwrap();
                    for v in [prf.precision, prf.recall, prf.f] {
                        prop_assert!((-1e-12..=1.0 + 1e-12).contains(&v), "{} {:?}", m, prf);
                    }
                }
            }

            #[test]
            fn identical_clusterings_are_perfect((g, _s) in pair()) {
                for m in [Metric::BCubed, Metric::CeafM, Metric::CeafE, Metric::Blanc] {
                    prop_assert!((score(m, &g, &g).unwrap().f - 1.0).abs() < 1e-12);
                }
                let lea = lea_tally(&g, &g, LeaSingletons::SelfLink).unwrap().prf(1.0);
                prop_assert!((lea.f - 1.0).abs() < 1e-12);
                if g.clusters().iter().all(|c| c.len() > 1) {
                    prop_assert!((score(Metric::Lea, &g, &g).unwrap().f - 1.0).abs() < 1e-12);
                }
                if g.clusters().iter().any(|c| c.len() > 1) {
                    prop_assert!((score(Metric::Muc, &g, &g).unwrap().f - 1.0).abs() < 1e-12);
                }
            }

            #[test]
            fn swapping_roles_swaps_p_and_r((g, s) in pair()) {
                for m in [Metric::BCubed, Metric::CeafM, Metric::CeafE, Metric::Blanc, Metric::Lea, Metric::Muc] {
                    let a = score(m, &g, &s).unwrap();
                    let b = score(m, &s, &g).unwrap();
                    prop_assert!((a.precision - b.recall).abs() < 1e-12);
                    prop_assert!((a.recall - b.precision).abs() < 1e-12);
                }
            }

            #[test]
            fn splitting_a_correct_cluster_never_raises_recall(
                (g, _s) in pair(),
                pick in any::<proptest::sample::Index>(),
                cut in any::<proptest::sample::Index>(),
            ) {
                let target = pick.index(g.num_clusters());
                let cluster = &g.clusters()[target];
                prop_assume!(cluster.len() > 1);
                let at = 1 + cut.index(cluster.len() - 1);
                let mut clusters: Vec<Vec<usize>> = g.clusters().to_vec();
                let tail = clusters[target].split_off(at);
                clusters.push(tail);
                let split = Clustering::new(g.num_mentions(), clusters).unwrap();
                let before = b_cubed(&g, &g).unwrap().recall;
                let after = b_cubed(&g, &split).unwrap().recall;
                prop_assert!(after <= before + 1e-12);
            }
        }
    }
}
