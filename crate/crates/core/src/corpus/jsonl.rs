//! Line-delimited JSON feature corpus: one document per line.
//!
//! ```text
//! {"id":"doc-0","d_a":12,"d_p":18,
//!  "mentions":[{"index":1,"type":"proper","gold_entity":1,"features":[...]}, ...],
//!  "pairs":[{"j":1,"i":2,"features":[...]}, ...]}
//! ```
//!
//! Indices in the file are 1-based. `gold_entity` is the index of the first
//! mention of the entity. Pairs may appear in any order but every `j < i`
//! must be present exactly once.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{pair_index, Document, Mention, MentionType};
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct DocRecord {
    id: String,
    d_a: usize,
    d_p: usize,
    mentions: Vec<MentionRecord>,
    pairs: Vec<PairRecord>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MentionRecord {
    index: usize,
    #[serde(rename = "type")]
    mention_type: MentionType,
    gold_entity: usize,
    features: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PairRecord {
    j: usize,
    i: usize,
    features: Vec<f64>,
}

impl From<&Document> for DocRecord {
    fn from(doc: &Document) -> Self {
        let mentions = doc
            .mentions()
            .iter()
            .enumerate()
            .map(|(i, m)| MentionRecord {
                index: i + 1,
                mention_type: m.mention_type,
                gold_entity: m.gold_entity + 1,
                features: m.features.clone(),
            })
            .collect();
        let mut pairs = Vec::with_capacity(doc.packed_pair_features().len());
        for i in 1..doc.len() {
            for j in 0..i {
                pairs.push(PairRecord {
                    j: j + 1,
                    i: i + 1,
                    features: doc.pair_features(j, i).to_vec(),
                });
            }
        }
        Self {
            id: doc.id().to_string(),
            d_a: doc.d_a(),
            d_p: doc.d_p(),
            mentions,
            pairs,
        }
    }
}

fn into_document(rec: DocRecord, line: usize) -> Result<Document> {
    let fmt = |msg: String| Error::Format(format!("line {line}: document {}: {msg}", rec.id));
    let n = rec.mentions.len();
    let mut mentions = Vec::with_capacity(n);
    for (pos, m) in rec.mentions.iter().enumerate() {
        if m.index != pos + 1 {
            return Err(fmt(format!(
                "mention index {} at position {}; indices must be 1..n in order",
                m.index,
                pos + 1
            )));
        }
        if m.gold_entity == 0 {
            return Err(fmt(format!("mention {} has gold_entity 0", m.index)));
        }
        mentions.push(Mention {
            mention_type: m.mention_type,
            gold_entity: m.gold_entity - 1,
            features: m.features.clone(),
        });
    }
    let mut slots: Vec<Option<Vec<f64>>> = vec![None; n * n.saturating_sub(1) / 2];
    for p in rec.pairs {
        if p.j == 0 || p.j >= p.i || p.i > n {
            return Err(fmt(format!(
                "pair ({}, {}) is not a valid j < i <= {n} pair",
                p.j, p.i
            )));
        }
        let slot = &mut slots[pair_index(p.j - 1, p.i - 1)];
        if slot.is_some() {
            return Err(fmt(format!("pair ({}, {}) listed twice", p.j, p.i)));
        }
        *slot = Some(p.features);
    }
    let mut pair_features = Vec::with_capacity(slots.len());
    for i in 1..n {
        for j in 0..i {
            match slots[pair_index(j, i)].take() {
                Some(f) => pair_features.push(f),
                None => return Err(fmt(format!("missing pair ({}, {})", j + 1, i + 1))),
            }
        }
    }
    Document::new(rec.id.clone(), rec.d_a, rec.d_p, mentions, pair_features).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("line {line}: {msg}")),
        other => other,
    })
}

/// Reads a corpus; blank lines are skipped.
pub fn read_corpus<R: BufRead>(reader: R) -> Result<Vec<Document>> {
    let mut docs: Vec<Document> = Vec::new();
    for (k, line) in reader.lines().enumerate() {
        let line_no = k + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: DocRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
            line: line_no,
            msg: e.to_string(),
        })?;
        let doc = into_document(rec, line_no)?;
        if let Some(first) = docs.first() {
            if (first.d_a(), first.d_p()) != (doc.d_a(), doc.d_p()) {
                return Err(Error::Format(format!(
                    "line {line_no}: document {} has dimensions (d_a={}, d_p={}) but the corpus uses (d_a={}, d_p={})",
                    doc.id(),
                    doc.d_a(),
                    doc.d_p(),
                    first.d_a(),
                    first.d_p()
                )));
            }
        }
        docs.push(doc);
    }
    Ok(docs)
}

pub fn write_corpus<W: Write>(docs: &[Document], mut writer: W) -> Result<()> {
    for doc in docs {
        let line = serde_json::to_string(&DocRecord::from(doc))
            .map_err(|e| Error::Format(e.to_string()))?;
        writeln!(writer, "{line}")?;
    }
    writer.flush()?;
    Ok(())
}

pub fn save_corpus(docs: &[Document], path: impl AsRef<Path>) -> Result<()> {
    write_corpus(docs, BufWriter::new(File::create(path)?))
}

pub fn load_corpus(path: impl AsRef<Path>) -> Result<Vec<Document>> {
    read_corpus(BufReader::new(File::open(path)?))
}
