//! AdaGrad training with one-document mini-batches, plus a finite-difference
//! gradient checker.

use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::analysis::{evaluate_model, MetricReport};
use crate::corpus::Document;
use crate::error::{Error, Result};
use crate::metrics::Metric;
use crate::model::{
    loss, loss_and_grad, CostConfig, LossKind, ModelDims, ModelParams, Objective, DEFAULT_HIDDEN_A,
    DEFAULT_HIDDEN_P,
};

pub const ADAGRAD_EPS: f64 = 1e-8;
pub const DEFAULT_LEARNING_RATE: f64 = 0.05;
pub const DEFAULT_LAMBDA: f64 = 1e-6;
pub const DEFAULT_EPOCHS: usize = 10;
pub const DEFAULT_INIT_SCALE: f64 = 0.1;
/// Coordinates sampled by [`grad_check`] when a model has more parameters.
pub const GRAD_CHECK_COORDS: usize = 200;

/// Per-coordinate AdaGrad update:
/// `accum += g^2; theta -= eta * g / (sqrt(accum) + eps)`.
///
/// Nothing is modified when the gradient contains a non-finite entry.
pub fn adagrad_step(
    params: &mut [f64],
    grads: &[f64],
    accum: &mut [f64],
    eta: f64,
    eps: f64,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != accum.len() {
        return Err(Error::Shape(format!(
            "adagrad: {} params, {} gradients, {} accumulators",
            params.len(),
            grads.len(),
            accum.len()
        )));
    }
    if !(eps >= 0.0) || !(eta > 0.0) {
        return Err(Error::Config(format!(
            "adagrad: need eta > 0 and eps >= 0, got {eta}, {eps}"
        )));
    }
    if let Some(k) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFinite(format!(
            "gradient coordinate {k} is {}",
            grads[k]
        )));
    }
    for ((theta, &g), acc) in params.iter_mut().zip(grads).zip(accum.iter_mut()) {
        if g == 0.0 {
            continue;
        }
        *acc += g * g;
        *theta -= eta * g / (acc.sqrt() + eps);
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    /// Uniform in `[-scale, scale]`, drawn from the training seed.
    Random { scale: f64 },
    /// Start from given parameters, typically a trained mention-ranking model.
    Params(ModelParams),
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub loss: LossKind,
    pub beta: f64,
    pub temperature: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub lambda: f64,
    pub seed: u64,
    pub init: Init,
    pub costs: CostConfig,
    /// Hidden sizes for random initialization.
    pub hidden_a: usize,
    pub hidden_p: usize,
    /// `(epoch, T)` pairs: from 1-based `epoch` on, the temperature is `T`.
    /// Empty means the temperature stays fixed.
    pub anneal: Vec<(usize, f64)>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            loss: LossKind::MentionRanking,
            beta: 1.0,
            temperature: 1.0,
            learning_rate: DEFAULT_LEARNING_RATE,
            epochs: DEFAULT_EPOCHS,
            lambda: DEFAULT_LAMBDA,
            seed: 0,
            init: Init::Random {
                scale: DEFAULT_INIT_SCALE,
            },
            costs: CostConfig::default(),
            hidden_a: DEFAULT_HIDDEN_A,
            hidden_p: DEFAULT_HIDDEN_P,
            anneal: Vec::new(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.objective(1).validate()?;
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::Config(format!(
                "learning rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if let Init::Random { scale } = self.init {
            if !(scale >= 0.0) || !scale.is_finite() {
                return Err(Error::Config(format!(
                    "init scale must be >= 0, got {scale}"
                )));
            }
            if self.hidden_a == 0 || self.hidden_p == 0 {
                return Err(Error::Config("hidden sizes must be at least 1".into()));
            }
        }
        for &(epoch, t) in &self.anneal {
            if epoch == 0 || !(t > 0.0) || !t.is_finite() {
                return Err(Error::Config(format!(
                    "annealing entries need epoch >= 1 and T > 0, got ({epoch}, {t})"
                )));
            }
        }
        Ok(())
    }

    /// Temperature in effect during 1-based `epoch`.
    pub fn temperature_at(&self, epoch: usize) -> f64 {
        self.anneal
            .iter()
            .filter(|(e, _)| *e <= epoch)
            .max_by_key(|(e, _)| *e)
            .map_or(self.temperature, |(_, t)| *t)
    }

    pub fn objective(&self, epoch: usize) -> Objective {
        Objective {
            kind: self.loss,
            costs: self.costs,
            beta: self.beta,
            temperature: self.temperature_at(epoch),
            lambda: self.lambda,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub temperature: f64,
    /// Mean per-document training loss, each taken before that document's
    /// update.
    pub mean_loss: f64,
    pub dev: Option<MetricReport>,
    pub seconds: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch whose parameters were returned.
    pub best_epoch: usize,
}

impl TrainHistory {
    pub fn best(&self) -> Option<&EpochRecord> {
        self.epochs.iter().find(|r| r.epoch == self.best_epoch)
    }

    /// `epoch,loss,MUC,B3,CEAFm,CEAFe,BLANC,LEA,CoNLL,seconds`; metric
    /// columns hold dev F1 and are empty without a dev set.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("epoch,loss");
        for m in Metric::ALL {
            out.push(',');
            out.push_str(m.name());
        }
        out.push_str(",CoNLL,seconds\n");
        for r in &self.epochs {
            let _ = write!(out, "{},{}", r.epoch, r.mean_loss);
            match &r.dev {
                Some(rep) => {
                    for m in Metric::ALL {
                        let _ = write!(out, ",{}", rep.get(m).f);
                    }
                    let _ = write!(out, ",{}", rep.conll());
                }
                None => out.push_str(&",".repeat(Metric::ALL.len() + 1)),
            }
            let _ = writeln!(out, ",{:.3}", r.seconds);
        }
        out
    }
}

fn corpus_dims(docs: &[Document]) -> Result<(usize, usize)> {
    let first = docs
        .first()
        .ok_or_else(|| Error::Input("training corpus is empty".into()))?;
    let dims = (first.d_a(), first.d_p());
    if let Some(d) = docs.iter().find(|d| (d.d_a(), d.d_p()) != dims) {
        return Err(Error::Shape(format!(
            "document {} has (d_a={}, d_p={}), corpus started with {dims:?}",
            d.id(),
            d.d_a(),
            d.d_p()
        )));
    }
    Ok(dims)
}

/// Trains with [`train_with_progress`] and no callback.
pub fn train(
    corpus: &[Document],
    dev: &[Document],
    config: &TrainConfig,
) -> Result<(ModelParams, TrainHistory)> {
    train_with_progress(corpus, dev, config, |_| {})
}

/// Runs `config.epochs` passes of one-document AdaGrad updates over
/// `corpus` in a seeded shuffled order. After every epoch the model is
/// decoded on `dev`; the parameters of the epoch with the best dev CoNLL
/// average are returned (the last epoch when `dev` is empty).
pub fn train_with_progress<F: FnMut(&EpochRecord)>(
    corpus: &[Document],
    dev: &[Document],
    config: &TrainConfig,
    mut on_epoch: F,
) -> Result<(ModelParams, TrainHistory)> {
    config.validate()?;
    let (d_a, d_p) = corpus_dims(corpus)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = match &config.init {
        Init::Random { scale } => ModelParams::random(
            ModelDims {
                d_a,
                d_p,
                h_a: config.hidden_a,
                h_p: config.hidden_p,
            },
            *scale,
            &mut rng,
        ),
        Init::Params(p) => {
            let dims = p.dims();
            if (dims.d_a, dims.d_p) != (d_a, d_p) {
                return Err(Error::Shape(format!(
                    "initial model expects (d_a={}, d_p={}), corpus has (d_a={d_a}, d_p={d_p})",
                    dims.d_a, dims.d_p
                )));
            }
            p.clone()
        }
    };
    if !dev.is_empty() && corpus_dims(dev)? != (d_a, d_p) {
        return Err(Error::Shape(
            "dev corpus dimensions differ from the training corpus".into(),
        ));
    }

    let mut accum = vec![0.0; params.len()];
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    let mut history = TrainHistory::default();
    let mut best: Option<(f64, ModelParams)> = None;

    for epoch in 1..=config.epochs {
        let started = Instant::now();
        let objective = config.objective(epoch);
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for &k in &order {
            let doc = &corpus[k];
            let (l, grad) = loss_and_grad(doc, &params, &objective)?;
            if !l.is_finite() {
                return Err(Error::NonFinite(format!(
                    "epoch {epoch}: loss on document {} is {l}",
                    doc.id()
                )));
            }
            adagrad_step(
                params.as_mut_slice(),
                grad.as_slice(),
                &mut accum,
                config.learning_rate,
                ADAGRAD_EPS,
            )
            .map_err(|e| match e {
                Error::NonFinite(msg) => {
                    Error::NonFinite(format!("epoch {epoch}, document {}: {msg}", doc.id()))
                }
                other => other,
            })?;
            total += l;
        }
        let report = if dev.is_empty() {
            None
        } else {
            Some(evaluate_model(dev, &params)?)
        };
        let selection = report
            .as_ref()
            .map_or(f64::NEG_INFINITY, MetricReport::conll);
        if dev.is_empty() || best.as_ref().is_none_or(|(b, _)| selection > *b) {
            best = Some((selection, params.clone()));
            history.best_epoch = epoch;
        }
        let record = EpochRecord {
            epoch,
            temperature: objective.temperature,
            mean_loss: total / corpus.len() as f64,
            dev: report,
            seconds: started.elapsed().as_secs_f64(),
        };
        on_epoch(&record);
        history.epochs.push(record);
    }
    let (_, params) = best.expect("at least one epoch");
    Ok((params, history))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheck {
    pub max_relative_error: f64,
    pub coordinates: usize,
}

/// Compares analytic gradients with central differences of step `h` on all
/// coordinates, or on [`GRAD_CHECK_COORDS`] of them chosen by `seed`.
/// The error measure is `|g_a - g_fd| / max(1, |g_a|, |g_fd|)`. Coordinates
/// at exactly zero are skipped when the L1 penalty is active, where the
/// penalty has no derivative.
pub fn grad_check(
    doc: &Document,
    params: &ModelParams,
    objective: &Objective,
    h: f64,
    seed: u64,
) -> Result<GradCheck> {
    objective.validate()?;
    if !(h > 0.0) {
        return Err(Error::Config(format!("step must be > 0, got {h}")));
    }
    let (_, grad) = loss_and_grad(doc, params, objective)?;
    let n = params.len();
    let coords: Vec<usize> = if n <= GRAD_CHECK_COORDS {
        (0..n).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut c = index::sample(&mut rng, n, GRAD_CHECK_COORDS).into_vec();
        c.sort_unstable();
        c
    };
    let mut probe = params.clone();
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for &k in &coords {
        let theta = params.as_slice()[k];
        if objective.lambda > 0.0 && theta == 0.0 {
            continue;
        }
        probe.as_mut_slice()[k] = theta + h;
        let up = loss(doc, &probe, objective)?;
        probe.as_mut_slice()[k] = theta - h;
        let down = loss(doc, &probe, objective)?;
        probe.as_mut_slice()[k] = theta;
        let fd = (up - down) / (2.0 * h);
        let ga = grad.as_slice()[k];
        worst = worst.max((ga - fd).abs() / 1f64.max(ga.abs()).max(fd.abs()));
        checked += 1;
    }
    Ok(GradCheck {
        max_relative_error: worst,
        coordinates: checked,
    })
}
