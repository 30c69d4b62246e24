//! Error breakdowns by mention type and consolidated metric reports.

use std::fmt::{self, Write as _};
use std::ops::AddAssign;

use rayon::prelude::*;
use serde::Serialize;

use crate::clustering::{AntecedentVector, Clustering};
use crate::corpus::{Document, MentionType};
use crate::error::{Error, Result};
use crate::metrics::{
    b_cubed_tally, blanc_tally, ceaf_tally, conll_average, lea_tally, muc_tally, BlancTally,
    CeafSimilarity, LeaSingletons, Metric, Prf, Tally,
};
use crate::model::{predict_antecedents, ModelParams};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ErrorCounts {
    /// Non-anaphoric mention given an antecedent.
    pub false_anaphor: usize,
    /// Anaphoric mention left without an antecedent.
    pub false_new: usize,
    /// Anaphoric mention linked to a mention of another entity.
    pub wrong_link: usize,
    pub correct: usize,
}

impl ErrorCounts {
    pub fn total(&self) -> usize {
        self.false_anaphor + self.false_new + self.wrong_link + self.correct
    }
}

impl AddAssign for ErrorCounts {
    fn add_assign(&mut self, o: Self) {
        self.false_anaphor += o.false_anaphor;
        self.false_new += o.false_new;
        self.wrong_link += o.wrong_link;
        self.correct += o.correct;
    }
}

/// Error counts split by mention type, indexed by [`MentionType::index`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct ErrorBreakdown {
    pub by_type: [ErrorCounts; 3],
}

impl ErrorBreakdown {
    pub fn get(&self, t: MentionType) -> ErrorCounts {
        self.by_type[t.index()]
    }

    pub fn total(&self) -> ErrorCounts {
        let mut all = ErrorCounts::default();
        for c in self.by_type {
            all += c;
        }
        all
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("type,false_anaphor,false_new,wrong_link,correct\n");
        let total = self.total();
        for (name, c) in MentionType::ALL
            .iter()
            .map(|t| (t.to_string(), self.get(*t)))
            .chain(std::iter::once(("total".to_string(), total)))
        {
            let _ = writeln!(
                out,
                "{name},{},{},{},{}",
                c.false_anaphor, c.false_new, c.wrong_link, c.correct
            );
        }
        out
    }
}

impl AddAssign for ErrorBreakdown {
    fn add_assign(&mut self, o: Self) {
        for (a, b) in self.by_type.iter_mut().zip(o.by_type) {
            *a += b;
        }
    }
}

impl fmt::Display for ErrorBreakdown {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<11} {:>8} {:>8} {:>8} {:>8}",
            "type", "FA", "FN", "WL", "correct"
        )?;
        let total = self.total();
        let rows = MentionType::ALL
            .iter()
            .map(|t| (t.to_string(), self.get(*t)))
            .chain(std::iter::once(("total".to_string(), total)));
        for (name, c) in rows {
            writeln!(
                f,
                "{name:<11} {:>8} {:>8} {:>8} {:>8}",
                c.false_anaphor, c.false_new, c.wrong_link, c.correct
            )?;
        }
        Ok(())
    }
}

/// Classifies each predicted antecedent against the gold clustering.
pub fn classify_errors(
    gold: &Clustering,
    types: &[MentionType],
    predicted: &AntecedentVector,
) -> Result<ErrorBreakdown> {
    let n = gold.num_mentions();
    if predicted.len() != n || types.len() != n {
        return Err(Error::Input(format!(
            "prediction covers {} mentions, document has {n}",
            predicted.len()
        )));
    }
    let first = gold.first_mentions();
    let mut out = ErrorBreakdown::default();
    for i in 0..n {
        let a = predicted[i];
        let anaphoric = first[i] != i;
        let counts = &mut out.by_type[types[i].index()];
        match (anaphoric, a == i) {
            (false, true) => counts.correct += 1,
            (false, false) => counts.false_anaphor += 1,
            (true, true) => counts.false_new += 1,
            (true, false) if first[a] == first[i] => counts.correct += 1,
            (true, false) => counts.wrong_link += 1,
        }
    }
    Ok(out)
}

pub fn error_breakdown(doc: &Document, predicted: &AntecedentVector) -> Result<ErrorBreakdown> {
    let types: Vec<MentionType> = doc.mentions().iter().map(|m| m.mention_type).collect();
    classify_errors(doc.gold_clusters(), &types, predicted).map_err(|e| match e {
        Error::Input(msg) => Error::Input(format!("document {}: {msg}", doc.id())),
        other => other,
    })
}

/// Additive per-metric tallies for micro-aggregation.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MetricTallies {
    pub muc: Tally,
    pub b_cubed: Tally,
    pub ceaf_m: Tally,
    pub ceaf_e: Tally,
    pub blanc: BlancTally,
    pub lea: Tally,
}

impl MetricTallies {
    pub fn compute(gold: &Clustering, sys: &Clustering) -> Result<Self> {
        Self::compute_with(gold, sys, LeaSingletons::default())
    }

    pub fn compute_with(
        gold: &Clustering,
        sys: &Clustering,
        singletons: LeaSingletons,
    ) -> Result<Self> {
        Ok(Self {
            muc: muc_tally(gold, sys)?,
            b_cubed: b_cubed_tally(gold, sys)?,
            ceaf_m: ceaf_tally(gold, sys, CeafSimilarity::Mention)?,
            ceaf_e: ceaf_tally(gold, sys, CeafSimilarity::Entity)?,
            blanc: blanc_tally(gold, sys)?,
            lea: lea_tally(gold, sys, singletons)?,
        })
    }

    pub fn report(&self) -> MetricReport {
        let rows = Metric::ALL
            .iter()
            .map(|&m| {
                let prf = match m {
                    Metric::Muc => self.muc.prf(1.0),
                    Metric::BCubed => self.b_cubed.prf(1.0),
                    Metric::CeafM => self.ceaf_m.prf(1.0),
                    Metric::CeafE => self.ceaf_e.prf(1.0),
                    Metric::Blanc => self.blanc.prf(),
                    Metric::Lea => self.lea.prf(1.0),
                };
                (m, prf)
            })
            .collect();
        MetricReport { rows }
    }
}

impl AddAssign for MetricTallies {
    fn add_assign(&mut self, o: Self) {
        self.muc += o.muc;
        self.b_cubed += o.b_cubed;
        self.ceaf_m += o.ceaf_m;
        self.ceaf_e += o.ceaf_e;
        self.blanc += o.blanc;
        self.lea += o.lea;
    }
}

/// One PRF row per metric, in [`Metric::ALL`] order.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    rows: Vec<(Metric, Prf)>,
}

impl MetricReport {
    pub fn rows(&self) -> &[(Metric, Prf)] {
        &self.rows
    }

    pub fn get(&self, metric: Metric) -> Prf {
        self.rows
            .iter()
            .find(|(m, _)| *m == metric)
            .map(|(_, p)| *p)
            .expect("every metric has a row")
    }

    pub fn conll(&self) -> f64 {
        conll_average(
            self.get(Metric::Muc).f,
            self.get(Metric::BCubed).f,
            self.get(Metric::CeafE).f,
        )
    }

    /// `metric,recall,precision,f1` rows followed by `CoNLL,,,<avg>`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("metric,recall,precision,f1\n");
        for (m, p) in &self.rows {
            let _ = writeln!(out, "{},{},{},{}", m.name(), p.recall, p.precision, p.f);
        }
        let _ = writeln!(out, "CoNLL,,,{}", self.conll());
        out
    }
}

impl fmt::Display for MetricReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<7} {:>9} {:>9} {:>9}",
            "metric", "recall", "precision", "F1"
        )?;
        for (m, p) in &self.rows {
            writeln!(
                f,
                "{:<7} {:>9.4} {:>9.4} {:>9.4}",
                m.name(),
                p.recall,
                p.precision,
                p.f
            )?;
        }
        writeln!(
            f,
            "{:<7} {:>9} {:>9} {:>9.4}",
            "CoNLL",
            "",
            "",
            self.conll()
        )
    }
}

pub fn metric_report(gold: &Clustering, sys: &Clustering) -> Result<MetricReport> {
    Ok(MetricTallies::compute(gold, sys)?.report())
}

/// Micro-aggregated report over `(gold, sys)` document pairs.
pub fn corpus_report<'a, I>(pairs: I) -> Result<MetricReport>
where
    I: IntoIterator<Item = (&'a Clustering, &'a Clustering)>,
{
    corpus_report_with(pairs, LeaSingletons::default())
}

/// [`corpus_report`] with an explicit LEA singleton convention.
pub fn corpus_report_with<'a, I>(pairs: I, singletons: LeaSingletons) -> Result<MetricReport>
where
    I: IntoIterator<Item = (&'a Clustering, &'a Clustering)>,
{
    let mut total = MetricTallies::default();
    for (g, s) in pairs {
        total += MetricTallies::compute_with(g, s, singletons)?;
    }
    Ok(total.report())
}

/// Argmax-decoded predictions of `params` on every document.
pub fn predict_corpus(docs: &[Document], params: &ModelParams) -> Result<Vec<AntecedentVector>> {
    docs.par_iter()
        .map(|d| predict_antecedents(d, params))
        .collect()
}

/// Decodes every document and micro-aggregates the metrics. Documents are
/// scored in parallel; tallies are summed in document order so the result
/// does not depend on the thread count.
pub fn evaluate_model(docs: &[Document], params: &ModelParams) -> Result<MetricReport> {
    evaluate_model_with(docs, params, LeaSingletons::default())
}

/// [`evaluate_model`] with an explicit LEA singleton convention.
pub fn evaluate_model_with(
    docs: &[Document],
    params: &ModelParams,
    singletons: LeaSingletons,
) -> Result<MetricReport> {
    let tallies: Vec<MetricTallies> = docs
        .par_iter()
        .map(|d| {
            let sys = predict_antecedents(d, params)?.to_clustering();
            MetricTallies::compute_with(d.gold_clusters(), &sys, singletons)
        })
        .collect::<Result<_>>()?;
    let mut total = MetricTallies::default();
    for t in tallies {
        total += t;
    }
    Ok(total.report())
}

/// Corpus-level error breakdown of the decoded predictions.
pub fn evaluate_errors(docs: &[Document], params: &ModelParams) -> Result<ErrorBreakdown> {
    let preds = predict_corpus(docs, params)?;
    let mut total = ErrorBreakdown::default();
    for (d, a) in docs.iter().zip(&preds) {
        total += error_breakdown(d, a)?;
    }
    Ok(total)
}
