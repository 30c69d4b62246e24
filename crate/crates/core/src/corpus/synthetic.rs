//! Parametric generator of feature corpora with controllable signal-to-noise.
//!
//! Each document draws a number of latent entities, each with a random unit
//! prototype vector in `R^PROTOTYPE_DIM`, and assigns mentions to them. The
//! un-noised feature layouts are
//!
//! ```text
//! mention (d_a): [type one-hot (3) | position i/64 (1) | prototype[..]]
//! pair    (d_p): [prototype similarity (1) | distance bucket one-hot (8) | type-pair one-hot (9)]
//! ```
//!
//! truncated to `d_a` / `d_p`, or zero-padded when the requested dimension is
//! larger. Independent `N(0, noise^2)` noise is then added to every entry.
//! Prototype similarity is the dot product of the two entities' prototypes,
//! so before noise it is exactly 1 for same-entity pairs. Pronominal mentions
//! carry a weaker identity signal: their prototype slice and the similarity
//! of any pair they take part in are scaled by [`PRONOMINAL_SIGNAL`].

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{Document, Mention, MentionType, MAX_MENTIONS};
use crate::error::{Error, Result};

pub const PROTOTYPE_DIM: usize = 32;

/// Scale applied to the identity signal carried by pronominal mentions: their
/// prototype slice and the prototype similarity of every pair they take part in.
pub const PRONOMINAL_SIGNAL: f64 = 0.35;

/// Upper bounds (inclusive) of the antecedent-distance buckets; the last
/// bucket is open-ended.
pub const DISTANCE_BUCKETS: [usize; 7] = [1, 2, 3, 4, 7, 15, 31];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub num_docs: usize,
    /// Inclusive range of mentions per document.
    pub mentions: (usize, usize),
    /// Inclusive range of entities per document, clipped to the mention count.
    pub entities: (usize, usize),
    pub d_a: usize,
    pub d_p: usize,
    /// Standard deviation of the additive feature noise.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            num_docs: 100,
            mentions: (8, 24),
            entities: (2, 8),
            d_a: 12,
            d_p: 18,
            noise: 0.1,
            seed: 42,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let (m_lo, m_hi) = self.mentions;
        let (e_lo, e_hi) = self.entities;
        if m_lo == 0 || m_lo > m_hi {
            return Err(Error::Config(format!(
                "invalid mention range {m_lo}..={m_hi}"
            )));
        }
        if m_hi > MAX_MENTIONS {
            return Err(Error::Config(format!(
                "at most {MAX_MENTIONS} mentions per document, got {m_hi}"
            )));
        }
        if e_lo == 0 || e_lo > e_hi {
            return Err(Error::Config(format!(
                "invalid entity range {e_lo}..={e_hi}"
            )));
        }
        if self.d_a == 0 || self.d_p == 0 {
            return Err(Error::Config(
                "feature dimensions must be at least 1".into(),
            ));
        }
        if !(self.noise >= 0.0) || !self.noise.is_finite() {
            return Err(Error::Config(format!(
                "noise must be >= 0, got {}",
                self.noise
            )));
        }
        Ok(())
    }
}

fn distance_bucket(d: usize) -> usize {
    DISTANCE_BUCKETS
        .iter()
        .position(|&hi| d <= hi)
        .unwrap_or(DISTANCE_BUCKETS.len())
}

fn sample_type(rng: &mut ChaCha8Rng, first: bool) -> MentionType {
    // discourse-new mentions lean proper, later ones lean pronominal
    let weights = if first {
        [0.6, 0.3, 0.1]
    } else {
        [0.2, 0.3, 0.5]
    };
    let x: f64 = rng.random();
    if x < weights[0] {
        MentionType::Proper
    } else if x < weights[0] + weights[1] {
        MentionType::Nominal
    } else {
        MentionType::Pronominal
    }
}

fn fit(mut v: Vec<f64>, dim: usize, noise: &Option<Normal<f64>>, rng: &mut ChaCha8Rng) -> Vec<f64> {
    v.resize(dim, 0.0);
    if let Some(normal) = noise {
        for x in &mut v {
            *x += normal.sample(rng);
        }
    }
    v
}

/// Generates a corpus; identical configs give identical corpora.
pub fn generate_synthetic(config: &SyntheticConfig) -> Result<Vec<Document>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let noise =
        (config.noise > 0.0).then(|| Normal::new(0.0, config.noise).expect("validated noise"));
    let mut docs = Vec::with_capacity(config.num_docs);
    for d in 0..config.num_docs {
        let n = rng.random_range(config.mentions.0..=config.mentions.1);
        let k_lo = config.entities.0.min(n);
        let k_hi = config.entities.1.min(n);
        let k = rng.random_range(k_lo..=k_hi);

        let mut labels: Vec<usize> = (0..k).collect();
        labels.extend((k..n).map(|_| rng.random_range(0..k)));
        labels.shuffle(&mut rng);

        let prototypes: Vec<Vec<f64>> = (0..k)
            .map(|_| {
                let v: Vec<f64> = (0..PROTOTYPE_DIM)
                    .map(|_| StandardNormal.sample(&mut rng))
                    .collect();
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                v.into_iter().map(|x| x / norm).collect()
            })
            .collect();

        let mut first_of: Vec<Option<usize>> = vec![None; k];
        let mut mentions = Vec::with_capacity(n);
        for (i, &e) in labels.iter().enumerate() {
            let first = first_of[e].is_none();
            let gold_entity = *first_of[e].get_or_insert(i);
            let mention_type = sample_type(&mut rng, first);
            let mut base = vec![0.0; 3];
            base[mention_type.index()] = 1.0;
            base.push(i as f64 / MAX_MENTIONS as f64);
            let signal = if mention_type == MentionType::Pronominal {
                PRONOMINAL_SIGNAL
            } else {
                1.0
            };
            base.extend(prototypes[e].iter().map(|x| signal * x));
            mentions.push(Mention {
                mention_type,
                gold_entity,
                features: fit(base, config.d_a, &noise, &mut rng),
            });
        }

        let mut pair_features = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 1..n {
            for j in 0..i {
                let similarity: f64 = prototypes[labels[i]]
                    .iter()
                    .zip(&prototypes[labels[j]])
                    .map(|(a, b)| a * b)
                    .sum();
                let pronominal = [i, j]
                    .iter()
                    .any(|&m| mentions[m].mention_type == MentionType::Pronominal);
                let mut base = vec![0.0; 1 + DISTANCE_BUCKETS.len() + 1 + 9];
                base[0] = if pronominal {
                    PRONOMINAL_SIGNAL * similarity
                } else {
                    similarity
                };
                base[1 + distance_bucket(i - j)] = 1.0;
                let type_pair =
                    3 * mentions[j].mention_type.index() + mentions[i].mention_type.index();
                base[1 + DISTANCE_BUCKETS.len() + 1 + type_pair] = 1.0;
                pair_features.push(fit(base, config.d_p, &noise, &mut rng));
            }
        }
        docs.push(Document::new(
            format!("synthetic-{d:04}"),
            config.d_a,
            config.d_p,
            mentions,
            pair_features,
        )?);
    }
    Ok(docs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_entity_document() {
        let docs = generate_synthetic(&SyntheticConfig {
            num_docs: 1,
            mentions: (3, 3),
            entities: (1, 1),
            seed: 7,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(docs.len(), 1);
        assert_eq!(docs[0].gold_clusters().clusters(), &[vec![0, 1, 2]]);
    }

    #[test]
    fn noiseless_same_entity_similarity() {
        let docs = generate_synthetic(&SyntheticConfig {
            num_docs: 5,
            noise: 0.0,
            seed: 19,
            ..Default::default()
        })
        .unwrap();
        let mut pronominal_pairs = 0;
        for doc in &docs {
            let entities = doc.gold_entities();
            let pronominal = |k: usize| doc.mentions()[k].mention_type == MentionType::Pronominal;
            for i in 1..doc.len() {
                for j in (0..i).filter(|&j| entities[j] == entities[i]) {
                    let expected = if pronominal(i) || pronominal(j) {
                        pronominal_pairs += 1;
                        PRONOMINAL_SIGNAL
                    } else {
                        1.0
                    };
                    let sim = doc.pair_features(j, i)[0];
                    assert!((sim - expected).abs() < 1e-12, "{sim} vs {expected}");
                }
            }
        }
        assert!(pronominal_pairs > 0);
    }

    #[test]
    fn deterministic() {
        let cfg = SyntheticConfig::default();
        assert_eq!(
            generate_synthetic(&cfg).unwrap(),
            generate_synthetic(&cfg).unwrap()
        );
        let other = SyntheticConfig {
            seed: 43,
            ..cfg.clone()
        };
        assert_ne!(
            generate_synthetic(&cfg).unwrap(),
            generate_synthetic(&other).unwrap()
        );
    }

    #[test]
    fn generated_documents_validate() {
        for seed in 0..5 {
            let cfg = SyntheticConfig {
                num_docs: 20,
                mentions: (1, 64),
                entities: (1, 20),
                d_a: 3,
                d_p: 40,
                noise: 1.0,
                seed,
            };
            for doc in generate_synthetic(&cfg).unwrap() {
                doc.validate().unwrap();
                assert!(doc.len() <= 64);
                assert_eq!(
                    doc.packed_pair_features().len(),
                    doc.len() * doc.len().saturating_sub(1) / 2
                );
                if doc.len() > 1 {
                    assert_eq!(doc.pair_features(0, 1).len(), 40);
                }
            }
        }
    }

    #[test]
    fn bad_configs() {
        let base = SyntheticConfig::default();
        for bad in [
            SyntheticConfig {
                mentions: (5, 4),
                ..base.clone()
            },
            SyntheticConfig {
                mentions: (0, 4),
                ..base.clone()
            },
            SyntheticConfig {
                mentions: (1, 65),
                ..base.clone()
            },
            SyntheticConfig {
                entities: (0, 2),
                ..base.clone()
            },
            SyntheticConfig {
                d_a: 0,
                ..base.clone()
            },
            SyntheticConfig {
                d_p: 0,
                ..base.clone()
            },
            SyntheticConfig {
                noise: -0.1,
                ..base.clone()
            },
        ] {
            assert!(
                matches!(generate_synthetic(&bad), Err(Error::Config(_))),
                "{bad:?}"
            );
        }
    }

    #[test]
    fn buckets() {
        assert_eq!(distance_bucket(1), 0);
        assert_eq!(distance_bucket(4), 3);
        assert_eq!(distance_bucket(5), 4);
        assert_eq!(distance_bucket(31), 6);
        assert_eq!(distance_bucket(63), 7);
    }
}
