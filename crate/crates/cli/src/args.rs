use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};
use diffcoref::metrics::LeaSingletons;
use diffcoref::model::LossKind;
use diffcoref::optim::{DEFAULT_EPOCHS, DEFAULT_INIT_SCALE, DEFAULT_LAMBDA, DEFAULT_LEARNING_RATE};

#[derive(Debug, Parser)]
#[command(
    name = "diffcoref",
    version,
    about = "Train and evaluate mention-ranking coreference models"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write a synthetic feature corpus as JSON lines.
    Generate(GenerateArgs),
    /// Train a model on a corpus, selecting the epoch with the best dev CoNLL score.
    Train(TrainArgs),
    /// Decode a corpus with a model and print the metric table.
    Evaluate(EvaluateArgs),
    /// Score a CoNLL response file against a CoNLL key file.
    Score(ScoreArgs),
    /// Break down a model's decisions by error type and mention type.
    Errors(ErrorsArgs),
    /// Compare analytic and finite-difference gradients of a loss.
    Gradcheck(GradcheckArgs),
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, default_value_t = 100)]
    pub docs: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Standard deviation of the feature noise.
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
    #[arg(long, default_value_t = 8)]
    pub min_mentions: usize,
    #[arg(long, default_value_t = 24)]
    pub max_mentions: usize,
    #[arg(long, default_value_t = 2)]
    pub min_entities: usize,
    #[arg(long, default_value_t = 8)]
    pub max_entities: usize,
    /// Mention feature dimension.
    #[arg(long, default_value_t = 12)]
    pub d_a: usize,
    /// Pair feature dimension.
    #[arg(long, default_value_t = 18)]
    pub d_p: usize,
    /// Corpus output (JSON lines).
    #[arg(long)]
    pub out: PathBuf,
    /// Also write the gold clusters as a CoNLL key file.
    #[arg(long)]
    pub key: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training corpus (JSON lines).
    #[arg(long)]
    pub train: PathBuf,
    /// Development corpus used for epoch selection.
    #[arg(long)]
    pub dev: Option<PathBuf>,
    /// One of mr-heuristic, ec-heuristic, b3, lea.
    #[arg(long, default_value = "mr-heuristic", value_parser = parse_loss)]
    pub loss: LossKind,
    /// Recall weight of the relaxed F-score: a number or a preset such as sqrt1.4.
    #[arg(long, default_value = "1", value_parser = parse_beta)]
    pub beta: f64,
    /// Softmax temperature for the relaxed losses.
    #[arg(long, default_value_t = 1.0)]
    pub temp: f64,
    /// Temperature schedule as epoch:T pairs, e.g. 4:0.3,8:0.1.
    #[arg(long, value_parser = parse_anneal)]
    pub anneal: Option<Schedule>,
    #[arg(long, default_value_t = DEFAULT_LEARNING_RATE)]
    pub lr: f64,
    #[arg(long, default_value_t = DEFAULT_EPOCHS)]
    pub epochs: usize,
    /// L1 penalty weight.
    #[arg(long, default_value_t = DEFAULT_LAMBDA)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Start from this model instead of a random initialization.
    #[arg(long)]
    pub init: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_INIT_SCALE)]
    pub init_scale: f64,
    #[arg(long, default_value_t = diffcoref::model::DEFAULT_HIDDEN_A)]
    pub hidden_a: usize,
    #[arg(long, default_value_t = diffcoref::model::DEFAULT_HIDDEN_P)]
    pub hidden_p: usize,
    /// Mention-ranking costs for false anaphor, false new and wrong link.
    #[arg(long, value_parser = parse_triple)]
    pub alphas: Option<Triple>,
    /// Entity-centric costs for false anaphor, false new and wrong link.
    #[arg(long, value_parser = parse_triple)]
    pub gammas: Option<Triple>,
    /// Model output.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-epoch history as CSV.
    #[arg(long)]
    pub history: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    /// Also write the table as CSV.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Write the predicted clusters as a CoNLL response file.
    #[arg(long)]
    pub response: Option<PathBuf>,
    /// LEA treatment of one-mention entities: self-link (reference scorer) or no-links.
    #[arg(long, value_enum, default_value_t = LeaMode::SelfLink)]
    pub lea_singletons: LeaMode,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[arg(long)]
    pub key: PathBuf,
    #[arg(long)]
    pub response: PathBuf,
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// LEA treatment of one-mention entities: self-link (reference scorer) or no-links.
    #[arg(long, value_enum, default_value_t = LeaMode::SelfLink)]
    pub lea_singletons: LeaMode,
}

#[derive(Debug, Args)]
pub struct ErrorsArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Check at these parameters instead of a random model.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, default_value = "mr-heuristic", value_parser = parse_loss)]
    pub loss: LossKind,
    #[arg(long, default_value = "1", value_parser = parse_beta)]
    pub beta: f64,
    #[arg(long, default_value_t = 1.0)]
    pub temp: f64,
    #[arg(long, default_value_t = DEFAULT_LAMBDA)]
    pub lambda: f64,
    /// Central-difference step.
    #[arg(long, default_value_t = 1e-5)]
    pub step: f64,
    /// Largest accepted relative error.
    #[arg(long, default_value_t = 1e-5)]
    pub tol: f64,
    /// Check at most this many documents.
    #[arg(long, default_value_t = 20)]
    pub max_docs: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 8)]
    pub hidden_a: usize,
    #[arg(long, default_value_t = 8)]
    pub hidden_p: usize,
    #[arg(long, default_value_t = 0.5)]
    pub init_scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LeaMode {
    SelfLink,
    NoLinks,
}

impl From<LeaMode> for LeaSingletons {
    fn from(m: LeaMode) -> Self {
        match m {
            LeaMode::SelfLink => LeaSingletons::SelfLink,
            LeaMode::NoLinks => LeaSingletons::NoLinks,
        }
    }
}

pub type Schedule = Vec<(usize, f64)>;
pub type Triple = [f64; 3];

fn parse_loss(s: &str) -> Result<LossKind, String> {
    LossKind::from_str(s).map_err(|e| e.to_string())
}

/// A positive real, or `sqrtX` for the square root of `X` (the recall
/// weights of the sweep grid are sqrt0.8 .. sqrt1.8, 1.5 and 2).
pub fn parse_beta(s: &str) -> Result<f64, String> {
    let value = match s.strip_prefix("sqrt") {
        Some(rest) => rest.parse::<f64>().map(f64::sqrt).map_err(|_| {
            format!("cannot read {s:?}; use a number like 1.2 or a preset like sqrt1.4")
        })?,
        None => s.parse::<f64>().map_err(|_| {
            format!("cannot read {s:?}; use a number like 1.2 or a preset like sqrt1.4")
        })?,
    };
    if !(value > 0.0) || !value.is_finite() {
        return Err(format!("beta must be a positive number, got {s}"));
    }
    Ok(value)
}

pub fn parse_anneal(s: &str) -> Result<Schedule, String> {
    s.split(',')
        .map(|pair| {
            let (e, t) = pair
                .split_once(':')
                .ok_or_else(|| format!("expected epoch:T, got {pair:?}"))?;
            let epoch = e
                .trim()
                .parse()
                .map_err(|_| format!("bad epoch in {pair:?}"))?;
            let t = t
                .trim()
                .parse()
                .map_err(|_| format!("bad temperature in {pair:?}"))?;
            Ok((epoch, t))
        })
        .collect()
}

fn parse_triple(s: &str) -> Result<Triple, String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|x| {
            x.trim()
                .parse::<f64>()
                .map_err(|_| format!("bad number {x:?}"))
        })
        .collect::<Result<_, _>>()?;
    parts
        .try_into()
        .map_err(|_| format!("expected three comma-separated costs, got {s:?}"))
}
