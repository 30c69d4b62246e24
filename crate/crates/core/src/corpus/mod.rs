//! Documents, synthetic corpora and file formats.

mod conll;
mod jsonl;
mod synthetic;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use crate::clustering::Clustering;
use crate::error::{Error, Result};
pub use conll::{
    align_response, parse_conll_key, parse_conll_str, write_conll, write_conll_response,
    ConllDocument, Span,
};
pub use jsonl::{load_corpus, read_corpus, save_corpus, write_corpus};
pub use synthetic::{generate_synthetic, SyntheticConfig, DISTANCE_BUCKETS, PROTOTYPE_DIM};

/// Upper bound on mentions per document.
pub const MAX_MENTIONS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MentionType {
    Proper,
    Nominal,
    Pronominal,
}

impl MentionType {
    pub const ALL: [MentionType; 3] = [
        MentionType::Proper,
        MentionType::Nominal,
        MentionType::Pronominal,
    ];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for MentionType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MentionType::Proper => "proper",
            MentionType::Nominal => "nominal",
            MentionType::Pronominal => "pronominal",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mention {
    pub mention_type: MentionType,
    /// Index of the first mention of this mention's gold entity; equal to the
    /// mention's own index when it starts an entity.
    pub gold_entity: usize,
    pub features: Vec<f64>,
}

/// A document: mentions in order, dense features for every ordered pair
/// `(j, i)` with `j < i`, and the gold clustering.
#[derive(Debug, Clone, PartialEq)]
pub struct Document {
    id: String,
    d_a: usize,
    d_p: usize,
    mentions: Vec<Mention>,
    pair_features: Vec<Vec<f64>>,
    gold: Clustering,
}

/// Position of pair `(j, i)`, `j < i`, in the packed lower triangle.
pub fn pair_index(j: usize, i: usize) -> usize {
    debug_assert!(j < i);
    i * (i - 1) / 2 + j
}

impl Document {
    /// Builds and validates a document. `pair_features` is packed by
    /// [`pair_index`].
    pub fn new(
        id: impl Into<String>,
        d_a: usize,
        d_p: usize,
        mentions: Vec<Mention>,
        pair_features: Vec<Vec<f64>>,
    ) -> Result<Self> {
        let gold =
            Clustering::from_labels(&mentions.iter().map(|m| m.gold_entity).collect::<Vec<_>>());
        let doc = Self {
            id: id.into(),
            d_a,
            d_p,
            mentions,
            pair_features,
            gold,
        };
        doc.validate()?;
        Ok(doc)
    }

    /// Checks every structural invariant.
    pub fn validate(&self) -> Result<()> {
        let n = self.mentions.len();
        if n > MAX_MENTIONS {
            return Err(Error::Format(format!(
                "document {}: {n} mentions exceeds the limit of {MAX_MENTIONS}",
                self.id
            )));
        }
        if self.d_a == 0 || self.d_p == 0 {
            return Err(Error::Format(format!(
                "document {}: feature dimensions must be positive",
                self.id
            )));
        }
        for (i, m) in self.mentions.iter().enumerate() {
            if m.features.len() != self.d_a {
                return Err(Error::Format(format!(
                    "document {}: mention {} has {} features, expected {}",
                    self.id,
                    i + 1,
                    m.features.len(),
                    self.d_a
                )));
            }
            let e = m.gold_entity;
            if e > i || self.mentions[e].gold_entity != e {
                return Err(Error::Format(format!(
                    "document {}: mention {} names entity {} which does not start at or before it",
                    self.id,
                    i + 1,
                    e + 1
                )));
            }
        }
        let expected = n * n.saturating_sub(1) / 2;
        if self.pair_features.len() != expected {
            return Err(Error::Format(format!(
                "document {}: {} pair feature vectors, expected {expected}",
                self.id,
                self.pair_features.len()
            )));
        }
        if let Some(k) = self.pair_features.iter().position(|f| f.len() != self.d_p) {
            return Err(Error::Format(format!(
                "document {}: pair vector {k} has wrong dimension (expected {})",
                self.id, self.d_p
            )));
        }
        let all_finite = self
            .mentions
            .iter()
            .flat_map(|m| m.features.iter())
            .chain(self.pair_features.iter().flatten())
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::Format(format!(
                "document {}: non-finite feature",
                self.id
            )));
        }
        Ok(())
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn d_a(&self) -> usize {
        self.d_a
    }

    pub fn d_p(&self) -> usize {
        self.d_p
    }

    pub fn len(&self) -> usize {
        self.mentions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mentions.is_empty()
    }

    pub fn mentions(&self) -> &[Mention] {
        &self.mentions
    }

    pub fn pair_features(&self, j: usize, i: usize) -> &[f64] {
        &self.pair_features[pair_index(j, i)]
    }

    /// All pair vectors packed by [`pair_index`].
    pub fn packed_pair_features(&self) -> &[Vec<f64>] {
        &self.pair_features
    }

    pub fn gold_clusters(&self) -> &Clustering {
        &self.gold
    }

    /// First-mention index of each mention's gold entity.
    pub fn gold_entities(&self) -> Vec<usize> {
        self.mentions.iter().map(|m| m.gold_entity).collect()
    }

    pub fn is_anaphoric(&self, i: usize) -> bool {
        self.mentions[i].gold_entity != i
    }

    /// Correct antecedents of mention `i`: earlier mentions of its entity, or
    /// `{i}` when it starts one.
    pub fn correct_antecedents(&self, i: usize) -> Vec<usize> {
        let e = self.mentions[i].gold_entity;
        if e == i {
            return vec![i];
        }
        (0..i)
            .filter(|&j| self.mentions[j].gold_entity == e)
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mention(e: usize) -> Mention {
        Mention {
            mention_type: MentionType::Nominal,
            gold_entity: e,
            features: vec![0.0],
        }
    }

    #[test]
    fn pair_index_is_dense() {
        let mut seen = Vec::new();
        for i in 0..6 {
            for j in 0..i {
                seen.push(pair_index(j, i));
            }
        }
        assert_eq!(seen, (0..15).collect::<Vec<_>>());
    }

    #[test]
    fn antecedent_sets() {
        let doc = Document::new(
            "d",
            1,
            1,
            vec![mention(0), mention(1), mention(0), mention(0)],
            vec![vec![0.0]; 6],
        )
        .unwrap();
        assert_eq!(doc.correct_antecedents(0), vec![0]);
        assert_eq!(doc.correct_antecedents(1), vec![1]);
        assert_eq!(doc.correct_antecedents(3), vec![0, 2]);
        assert!(doc.is_anaphoric(2));
        assert_eq!(doc.gold_clusters().clusters(), &[vec![0, 2, 3], vec![1]]);
    }

    #[test]
    fn invalid_documents() {
        // entity named after a later mention
        assert!(Document::new("d", 1, 1, vec![mention(1), mention(1)], vec![vec![0.0]]).is_err());
        // entity named after a mention that is itself anaphoric
        assert!(Document::new(
            "d",
            1,
            1,
            vec![mention(0), mention(0), mention(1)],
            vec![vec![0.0]; 3]
        )
        .is_err());
        // missing pair
        assert!(Document::new("d", 1, 1, vec![mention(0), mention(0)], vec![]).is_err());
        // wrong width
        assert!(Document::new("d", 2, 1, vec![mention(0)], vec![]).is_err());
    }
}
