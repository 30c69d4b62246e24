use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::network::{backward, forward};
use super::{CostConfig, ModelParams};
use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::relaxed::{relaxed_score_grad, RelaxedMetric};
use crate::soft_entity::{
    membership, membership_backward, tempered_backward, tempered_membership, LinkDistribution,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LossKind {
    /// Softmax-margin mention-ranking loss.
    #[serde(rename = "mr-heuristic")]
    MentionRanking,
    /// Cost-augmented cross entropy over entity memberships.
    #[serde(rename = "ec-heuristic")]
    EntityCentric,
    #[serde(rename = "b3")]
    RelaxedBCubed,
    #[serde(rename = "lea")]
    RelaxedLea,
}

impl LossKind {
    pub const ALL: [LossKind; 4] = [
        LossKind::MentionRanking,
        LossKind::EntityCentric,
        LossKind::RelaxedBCubed,
        LossKind::RelaxedLea,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LossKind::MentionRanking => "mr-heuristic",
            LossKind::EntityCentric => "ec-heuristic",
            LossKind::RelaxedBCubed => "b3",
            LossKind::RelaxedLea => "lea",
        }
    }

    fn relaxed_metric(self) -> Option<RelaxedMetric> {
        match self {
            LossKind::RelaxedBCubed => Some(RelaxedMetric::BCubed),
            LossKind::RelaxedLea => Some(RelaxedMetric::Lea),
            _ => None,
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        LossKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown loss {s:?}; expected one of mr-heuristic, ec-heuristic, b3, lea"
                ))
            })
    }
}

/// A fully specified per-document training objective.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub kind: LossKind,
    pub costs: CostConfig,
    /// Recall weight of the relaxed F-measure.
    pub beta: f64,
    pub temperature: f64,
    /// L1 penalty weight.
    pub lambda: f64,
}

impl Objective {
    pub fn new(kind: LossKind) -> Self {
        Self {
            kind,
            costs: CostConfig::default(),
            beta: 1.0,
            temperature: 1.0,
            lambda: 1e-6,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.costs.validate()?;
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return Err(Error::Config(format!(
                "beta must be > 0, got {}",
                self.beta
            )));
        }
        if !(self.temperature > 0.0) || !self.temperature.is_finite() {
            return Err(Error::Config(format!(
                "temperature must be > 0, got {}",
                self.temperature
            )));
        }
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::Config(format!(
                "lambda must be >= 0, got {}",
                self.lambda
            )));
        }
        Ok(())
    }
}

fn log_sum_exp<I: IntoIterator<Item = f64> + Clone>(xs: I) -> f64 {
    let max = xs.clone().into_iter().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.into_iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Data loss (without the penalty) and `dL/ds` of the softmax-margin loss.
fn mention_ranking_terms(
    doc: &Document,
    scores: &[Vec<f64>],
    costs: &CostConfig,
) -> Result<(f64, Vec<Vec<f64>>)> {
    let mut total = 0.0;
    let mut grads = Vec::with_capacity(scores.len());
    for (i, row) in scores.iter().enumerate() {
        let correct = doc.correct_antecedents(i);
        if correct.is_empty() {
            return Err(Error::Data(format!(
                "document {}: mention {} has no correct antecedent",
                doc.id(),
                i + 1
            )));
        }
        let aug: Vec<f64> = row
            .iter()
            .enumerate()
            .map(|(j, s)| s + costs.delta(j, i, &correct))
            .collect();
        let all = log_sum_exp(aug.iter().copied());
        let gold = log_sum_exp(correct.iter().map(|&j| aug[j]));
        total += all - gold;
        let mut g: Vec<f64> = aug.iter().map(|z| (z - all).exp()).collect();
        for &j in &correct {
            g[j] -= (aug[j] - gold).exp();
        }
        grads.push(g);
    }
    Ok((total, grads))
}

/// `dL/ds` from `dL/dp` through the row softmax.
fn softmax_backward(p: &LinkDistribution, grad_p: &[Vec<f64>]) -> Vec<Vec<f64>> {
    p.rows()
        .iter()
        .zip(grad_p)
        .map(|(pr, gr)| {
            let dot: f64 = pr.iter().zip(gr).map(|(a, b)| a * b).sum();
            pr.iter().zip(gr).map(|(pv, g)| pv * (g - dot)).collect()
        })
        .collect()
}

fn entity_centric_terms(
    doc: &Document,
    scores: &[Vec<f64>],
    costs: &CostConfig,
) -> Result<(f64, Vec<Vec<f64>>)> {
    let p = LinkDistribution::from_scores(scores);
    let q = membership(&p);
    let mut total = 0.0;
    let mut grad_q = Vec::with_capacity(q.len());
    for (i, row) in q.rows().iter().enumerate() {
        let gold = doc.mentions()[i].gold_entity;
        let weights: Vec<f64> = row
            .iter()
            .enumerate()
            .map(|(u, &v)| v * costs.gamma(u, i, gold).exp())
            .collect();
        let norm: f64 = weights.iter().sum();
        total -= (weights[gold] / norm).ln();
        // d/dq_u of -log(q_e e^G_e / sum_w q_w e^G_w)
        let mut g: Vec<f64> = (0..row.len())
            .map(|u| costs.gamma(u, i, gold).exp() / norm)
            .collect();
        g[gold] -= 1.0 / row[gold];
        grad_q.push(g);
    }
    let grad_p = membership_backward(&p, &q, &grad_q);
    Ok((total, softmax_backward(&p, &grad_p)))
}

fn relaxed_terms(
    doc: &Document,
    scores: &[Vec<f64>],
    metric: RelaxedMetric,
    beta: f64,
    temperature: f64,
) -> Result<(f64, Vec<Vec<f64>>)> {
    let p = LinkDistribution::from_scores(scores);
    let q = membership(&p);
    let qt = tempered_membership(&q, temperature)?;
    let (score, d_score) = relaxed_score_grad(metric, &qt, doc.gold_clusters(), beta)?;
    let grad_qt: Vec<Vec<f64>> = d_score
        .iter()
        .map(|r| r.iter().map(|g| -g).collect())
        .collect();
    let grad_q = tempered_backward(&q, &qt, temperature, &grad_qt);
    let grad_p = membership_backward(&p, &q, &grad_q);
    Ok((-score.value, softmax_backward(&p, &grad_p)))
}

fn data_terms(
    doc: &Document,
    scores: &[Vec<f64>],
    objective: &Objective,
) -> Result<(f64, Vec<Vec<f64>>)> {
    match objective.kind {
        LossKind::MentionRanking => mention_ranking_terms(doc, scores, &objective.costs),
        LossKind::EntityCentric => entity_centric_terms(doc, scores, &objective.costs),
        kind => relaxed_terms(
            doc,
            scores,
            kind.relaxed_metric().expect("relaxed kind"),
            objective.beta,
            objective.temperature,
        ),
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda >= 0.0) {
        return Err(Error::Domain(format!("lambda must be >= 0, got {lambda}")));
    }
    Ok(())
}

/// Per-document loss including `lambda * ||theta||_1`.
pub fn loss(doc: &Document, params: &ModelParams, objective: &Objective) -> Result<f64> {
    check_lambda(objective.lambda)?;
    let fwd = forward(doc, params)?;
    let (data, _) = data_terms(doc, &fwd.scores, objective)?;
    Ok(data + objective.lambda * params.l1_norm())
}

/// Per-document loss and its gradient. The penalty uses the subgradient
/// `sign(theta)` with 0 at 0.
pub fn loss_and_grad(
    doc: &Document,
    params: &ModelParams,
    objective: &Objective,
) -> Result<(f64, ModelParams)> {
    check_lambda(objective.lambda)?;
    let fwd = forward(doc, params)?;
    let (data, grad_scores) = data_terms(doc, &fwd.scores, objective)?;
    let mut grad = backward(doc, params, &fwd, &grad_scores);
    if objective.lambda > 0.0 {
        for (g, &w) in grad.as_mut_slice().iter_mut().zip(params.as_slice()) {
            if w != 0.0 {
                *g += objective.lambda * w.signum();
            }
        }
    }
    Ok((data + objective.lambda * params.l1_norm(), grad))
}

pub fn mention_ranking_loss(
    doc: &Document,
    params: &ModelParams,
    costs: &CostConfig,
    lambda: f64,
) -> Result<f64> {
    loss(
        doc,
        params,
        &Objective {
            costs: *costs,
            lambda,
            ..Objective::new(LossKind::MentionRanking)
        },
    )
}

pub fn entity_centric_loss(
    doc: &Document,
    params: &ModelParams,
    costs: &CostConfig,
    lambda: f64,
) -> Result<f64> {
    loss(
        doc,
        params,
        &Objective {
            costs: *costs,
            lambda,
            ..Objective::new(LossKind::EntityCentric)
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Mention, MentionType};
    use crate::model::ModelDims;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn doc_with(gold: &[usize]) -> Document {
        let mentions = gold
            .iter()
            .enumerate()
            .map(|(i, &g)| Mention {
                mention_type: MentionType::ALL[i % 3],
                gold_entity: g,
                features: vec![0.3 * i as f64, -0.2, 0.1 * (i * i) as f64],
            })
            .collect();
        let n = gold.len();
        let pairs = (0..n * n.saturating_sub(1) / 2)
            .map(|k| vec![(k as f64 * 0.37).sin(), (k as f64 * 0.11).cos()])
            .collect();
        Document::new("t", 3, 2, mentions, pairs).unwrap()
    }

    fn dims() -> ModelDims {
        ModelDims {
            d_a: 3,
            d_p: 2,
            h_a: 4,
            h_p: 5,
        }
    }

    #[test]
    fn uniform_two_mentions() {
        // zero params give uniform link probabilities
        let doc = doc_with(&[0, 0]);
        let params = ModelParams::zeros(dims());
        let zero = CostConfig::zero();
        let l = mention_ranking_loss(&doc, &params, &zero, 0.0).unwrap();
        // mention 1 contributes log 1 = 0
        assert!((l - 2f64.ln()).abs() < 1e-15);

        let costs = CostConfig {
            alphas: [0.0, 3.0, 0.0],
            ..zero
        };
        let l = mention_ranking_loss(&doc, &params, &costs, 0.0).unwrap();
        assert!((l - (1.0 + 3f64.exp()).ln()).abs() < 1e-12);
    }

    #[test]
    fn penalty_is_added() {
        let doc = doc_with(&[0, 0, 2]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let params = ModelParams::random(dims(), 0.3, &mut rng);
        let costs = CostConfig::default();
        let base = mention_ranking_loss(&doc, &params, &costs, 0.0).unwrap();
        let pen = mention_ranking_loss(&doc, &params, &costs, 1e-3).unwrap();
        assert!((pen - base - 1e-3 * params.l1_norm()).abs() < 1e-12);
        assert!(matches!(
            mention_ranking_loss(&doc, &params, &costs, -1.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn confident_correct_model_has_near_zero_loss() {
        // one dimension, self-link score large for mention 1, pair score large
        let dims = ModelDims {
            d_a: 1,
            d_p: 1,
            h_a: 1,
            h_p: 1,
        };
        let mentions = vec![
            Mention {
                mention_type: MentionType::Proper,
                gold_entity: 0,
                features: vec![1.0],
            },
            Mention {
                mention_type: MentionType::Pronominal,
                gold_entity: 0,
                features: vec![1.0],
            },
        ];
        let doc = Document::new("c", 1, 1, mentions, vec![vec![1.0]]).unwrap();
        // h_a = tanh(0)=0, h_p = tanh(10)~1; pair score = 60, self = 0
        let params =
            ModelParams::from_flat(dims, vec![0.0, 0.0, 10.0, 0.0, 0.0, 60.0, 0.0, 0.0, 0.0])
                .unwrap();
        let l = mention_ranking_loss(&doc, &params, &CostConfig::zero(), 0.0).unwrap();
        assert!(l < 1e-20, "{l}");
        let l = entity_centric_loss(&doc, &params, &CostConfig::zero(), 0.0).unwrap();
        assert!(l < 1e-20, "{l}");
    }

    #[test]
    fn entity_centric_fixture() {
        // scores chosen so p rows are (1), (0.6, 0.4), (0.5, 0.3, 0.2)
        let doc = doc_with(&[0, 0, 0]);
        let scores = vec![
            vec![0.0],
            vec![0.6f64.ln(), 0.4f64.ln()],
            vec![0.5f64.ln(), 0.3f64.ln(), 0.2f64.ln()],
        ];
        let (l, _) = entity_centric_terms(&doc, &scores, &CostConfig::zero()).unwrap();
        // rows: -log 1, -log 0.6, -log 0.68
        let expected = -(0.6f64.ln()) - 0.68f64.ln();
        assert!((l - expected).abs() < 1e-12, "{l} vs {expected}");

        // false-new cost inflates the self-entity weight of mention 3 by e^3
        let costs = CostConfig {
            gammas: [0.0, 3.0, 0.0],
            ..CostConfig::zero()
        };
        let (l3, _) = entity_centric_terms(&doc, &scores, &costs).unwrap();
        let row3 = 0.68 / (0.68 + 0.12 + 0.20 * 3f64.exp());
        let row2 = 0.6 / (0.6 + 0.4 * 3f64.exp());
        assert!((l3 - (-row2.ln() - row3.ln())).abs() < 1e-12);
    }

    #[test]
    fn zero_costs_give_marginal_cross_entropy() {
        let doc = doc_with(&[0, 1, 0, 1, 4, 0]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let params = ModelParams::random(dims(), 0.8, &mut rng);
        let l = mention_ranking_loss(&doc, &params, &CostConfig::zero(), 0.0).unwrap();
        let p = LinkDistribution::from_scores(&forward(&doc, &params).unwrap().scores);
        let expected: f64 = (0..doc.len())
            .map(|i| {
                -doc.correct_antecedents(i)
                    .iter()
                    .map(|&j| p.get(i, j))
                    .sum::<f64>()
                    .ln()
            })
            .sum();
        assert!((l - expected).abs() < 1e-12);
    }

    #[test]
    fn raising_any_alpha_raises_the_loss() {
        // mentions 0 and 2 are new, 1 and 3 anaphoric: every error type is possible
        let doc = doc_with(&[0, 0, 2, 2]);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let params = ModelParams::random(dims(), 0.5, &mut rng);
        let base = CostConfig::default();
        let l0 = mention_ranking_loss(&doc, &params, &base, 0.0).unwrap();
        for k in 0..3 {
            let mut costs = base;
            costs.alphas[k] += 0.5;
            let l = mention_ranking_loss(&doc, &params, &costs, 0.0).unwrap();
            assert!(l > l0, "alpha {k}: {l} <= {l0}");
        }
    }

    #[test]
    fn gold_entity_after_mention_is_rejected() {
        let doc = doc_with(&[0, 0, 2]);
        let mut mentions = doc.mentions().to_vec();
        mentions[1].gold_entity = 2;
        assert!(Document::new("bad", 3, 2, mentions, doc.packed_pair_features().to_vec()).is_err());
    }

    #[test]
    fn relaxed_loss_of_perfect_hard_model_is_minus_one() {
        let doc = doc_with(&[0, 0, 2, 2]);
        // huge scores on a correct antecedent and correct self-links
        let scores = vec![
            vec![0.0],
            vec![80.0, 0.0],
            vec![0.0, 0.0, 80.0],
            vec![0.0, 0.0, 80.0, 0.0],
        ];
        for metric in [RelaxedMetric::BCubed, RelaxedMetric::Lea] {
            let (l, _) = relaxed_terms(&doc, &scores, metric, 1.0, 1.0).unwrap();
            assert!((l + 1.0).abs() < 1e-12, "{metric:?}: {l}");
        }
    }

    #[test]
    fn loss_kind_names_round_trip() {
        for k in LossKind::ALL {
            assert_eq!(k.name().parse::<LossKind>().unwrap(), k);
        }
        assert!("hinge".parse::<LossKind>().is_err());
    }

    fn fd_check(kind: LossKind, temperature: f64, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let doc = doc_with(&[0, 0, 2, 0, 2, 5, 2]);
        let params = ModelParams::random(dims(), 0.7, &mut rng);
        let objective = Objective {
            temperature,
            lambda: 0.0,
            beta: 1.2,
            ..Objective::new(kind)
        };
        let (_, grad) = loss_and_grad(&doc, &params, &objective).unwrap();
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        for k in 0..params.len() {
            let mut plus = params.clone();
            plus.as_mut_slice()[k] += h;
            let mut minus = params.clone();
            minus.as_mut_slice()[k] -= h;
            let fd = (loss(&doc, &plus, &objective).unwrap()
                - loss(&doc, &minus, &objective).unwrap())
                / (2.0 * h);
            let ga = grad.as_slice()[k];
            worst = worst.max((ga - fd).abs() / 1f64.max(ga.abs()).max(fd.abs()));
        }
        worst
    }

    #[test]
    fn analytic_gradients_match_finite_differences() {
        for kind in LossKind::ALL {
            for seed in 0..3 {
                let err = fd_check(kind, 1.0, seed);
                assert!(err < 1e-6, "{kind} seed {seed}: {err}");
            }
        }
        for kind in [LossKind::RelaxedBCubed, LossKind::RelaxedLea] {
            let err = fd_check(kind, 0.3, 9);
            assert!(err < 1e-5, "{kind} T=0.3: {err}");
        }
    }
}
