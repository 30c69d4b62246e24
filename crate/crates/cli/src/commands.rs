use std::collections::HashMap;
use std::fs;
use std::io::BufWriter;
use std::path::Path;

use diffcoref::analysis::{
    corpus_report_with, evaluate_errors, evaluate_model_with, predict_corpus,
};
use diffcoref::corpus::{
    align_response, generate_synthetic, load_corpus, parse_conll_key, save_corpus, write_conll,
    Document, SyntheticConfig,
};
use diffcoref::model::{load_model, save_model, CostConfig, ModelDims, ModelParams, Objective};
use diffcoref::optim::{grad_check, train_with_progress, Init, TrainConfig};
use diffcoref::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::args::{
    Command, ErrorsArgs, EvaluateArgs, GenerateArgs, GradcheckArgs, ScoreArgs, TrainArgs,
};

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, paths or settings, found before any work starts.
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Runtime(Error),
    #[error("{0}")]
    CheckFailed(String),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(msg) => CliError::Invalid(msg),
            other => CliError::Runtime(other),
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

pub fn execute(command: Command) -> Result<()> {
    match command {
        Command::Generate(a) => generate(a),
        Command::Train(a) => train(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Score(a) => score(a),
        Command::Errors(a) => errors(a),
        Command::Gradcheck(a) => gradcheck(a),
    }
}

fn input(flag: &str, path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Invalid(format!(
            "--{flag} {}: no such file; check the path",
            path.display()
        )))
    }
}

fn output(flag: &str, path: &Path) -> Result<()> {
    let parent = path.parent().filter(|p| !p.as_os_str().is_empty());
    match parent {
        Some(dir) if !dir.is_dir() => Err(CliError::Invalid(format!(
            "--{flag} {}: directory {} does not exist; create it first",
            path.display(),
            dir.display()
        ))),
        _ if path.is_dir() => Err(CliError::Invalid(format!(
            "--{flag} {}: is a directory; give a file name",
            path.display()
        ))),
        _ => Ok(()),
    }
}

fn optional_output(flag: &str, path: &Option<impl AsRef<Path>>) -> Result<()> {
    path.as_ref().map_or(Ok(()), |p| output(flag, p.as_ref()))
}

fn check_dims(params: &ModelParams, docs: &[Document], what: &str) -> Result<()> {
    let dims = params.dims();
    match docs.iter().find(|d| (d.d_a(), d.d_p()) != (dims.d_a, dims.d_p)) {
        Some(d) => Err(CliError::Invalid(format!(
            "dimension mismatch: model expects d_a={} d_p={}, but {what} document {} has d_a={} d_p={}; \
             use a model trained on features of the same size",
            dims.d_a,
            dims.d_p,
            d.id(),
            d.d_a(),
            d.d_p()
        ))),
        None => Ok(()),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| CliError::Runtime(e.into()))
}

fn generate(a: GenerateArgs) -> Result<()> {
    output("out", &a.out)?;
    optional_output("key", &a.key)?;
    let config = SyntheticConfig {
        num_docs: a.docs,
        mentions: (a.min_mentions, a.max_mentions),
        entities: (a.min_entities, a.max_entities),
        d_a: a.d_a,
        d_p: a.d_p,
        noise: a.noise,
        seed: a.seed,
    };
    config.validate()?;
    let docs = generate_synthetic(&config)?;
    save_corpus(&docs, &a.out)?;
    if let Some(key) = &a.key {
        let pairs: Vec<(&str, _)> = docs.iter().map(|d| (d.id(), d.gold_clusters())).collect();
        write_conll(
            &pairs,
            BufWriter::new(fs::File::create(key).map_err(Error::from)?),
        )?;
    }
    let mentions: usize = docs.iter().map(Document::len).sum();
    println!(
        "wrote {} documents ({mentions} mentions) to {}",
        docs.len(),
        a.out.display()
    );
    Ok(())
}

fn train(a: TrainArgs) -> Result<()> {
    input("train", &a.train)?;
    if let Some(dev) = &a.dev {
        input("dev", dev)?;
    }
    if let Some(init) = &a.init {
        input("init", init)?;
    }
    output("out", &a.out)?;
    optional_output("history", &a.history)?;

    let mut costs = CostConfig::default();
    if let Some(alphas) = a.alphas {
        costs.alphas = alphas;
    }
    if let Some(gammas) = a.gammas {
        costs.gammas = gammas;
    }
    let mut config = TrainConfig {
        loss: a.loss,
        beta: a.beta,
        temperature: a.temp,
        learning_rate: a.lr,
        epochs: a.epochs,
        lambda: a.lambda,
        seed: a.seed,
        init: Init::Random {
            scale: a.init_scale,
        },
        costs,
        hidden_a: a.hidden_a,
        hidden_p: a.hidden_p,
        anneal: a.anneal.unwrap_or_default(),
    };
    config.validate()?;

    let corpus = load_corpus(&a.train)?;
    if corpus.is_empty() {
        return Err(CliError::Invalid(format!(
            "--train {}: corpus has no documents",
            a.train.display()
        )));
    }
    let dev = match &a.dev {
        Some(p) => load_corpus(p)?,
        None => Vec::new(),
    };
    let reference = ModelParams::zeros(ModelDims {
        d_a: corpus[0].d_a(),
        d_p: corpus[0].d_p(),
        h_a: 1,
        h_p: 1,
    });
    check_dims(&reference, &corpus, "training")?;
    check_dims(&reference, &dev, "dev")?;
    if let Some(init) = &a.init {
        let params = load_model(init)?;
        check_dims(&params, &corpus, "training")?;
        config.init = Init::Params(params);
    }

    let (params, history) = train_with_progress(&corpus, &dev, &config, |r| {
        let dev = r
            .dev
            .as_ref()
            .map(|d| format!(" dev CoNLL {:.4}", d.conll()))
            .unwrap_or_default();
        eprintln!(
            "epoch {:>3}  T {:<6} loss {:.6}{dev}  ({:.2} s)",
            r.epoch, r.temperature, r.mean_loss, r.seconds
        );
    })?;
    save_model(&params, &a.out)?;
    if let Some(path) = &a.history {
        write_text(path, &history.to_csv())?;
    }
    println!("saved epoch {} to {}", history.best_epoch, a.out.display());
    if let Some(report) = history.best().and_then(|r| r.dev.as_ref()) {
        print!("{report}");
    }
    Ok(())
}

fn load_model_and_corpus(model: &Path, corpus: &Path) -> Result<(ModelParams, Vec<Document>)> {
    let params = load_model(model)?;
    let docs = load_corpus(corpus)?;
    check_dims(&params, &docs, "corpus")?;
    Ok((params, docs))
}

fn evaluate(a: EvaluateArgs) -> Result<()> {
    input("corpus", &a.corpus)?;
    input("model", &a.model)?;
    optional_output("csv", &a.csv)?;
    optional_output("response", &a.response)?;
    let (params, docs) = load_model_and_corpus(&a.model, &a.corpus)?;
    let report = evaluate_model_with(&docs, &params, a.lea_singletons.into())?;
    print!("{report}");
    if let Some(path) = &a.csv {
        write_text(path, &report.to_csv())?;
    }
    if let Some(path) = &a.response {
        let clusters: Vec<_> = predict_corpus(&docs, &params)?
            .iter()
            .map(|p| p.to_clustering())
            .collect();
        let pairs: Vec<(&str, _)> = docs.iter().map(Document::id).zip(&clusters).collect();
        write_conll(
            &pairs,
            BufWriter::new(fs::File::create(path).map_err(Error::from)?),
        )?;
    }
    Ok(())
}

fn score(a: ScoreArgs) -> Result<()> {
    input("key", &a.key)?;
    input("response", &a.response)?;
    optional_output("csv", &a.csv)?;
    let key = parse_conll_key(&a.key)?;
    let response = parse_conll_key(&a.response)?;
    let by_id: HashMap<&str, _> = response.iter().map(|d| (d.id.as_str(), d)).collect();
    if by_id.len() != response.len() {
        return Err(Error::Input("response repeats a document id".into()).into());
    }
    let mut aligned = Vec::with_capacity(key.len());
    for k in &key {
        let r = by_id.get(k.id.as_str()).ok_or_else(|| {
            Error::Input(format!(
                "document {} is in the key but not the response",
                k.id
            ))
        })?;
        aligned.push(align_response(k, r)?);
    }
    if let Some(extra) = response.iter().find(|r| !key.iter().any(|k| k.id == r.id)) {
        return Err(Error::Input(format!(
            "document {} is in the response but not the key",
            extra.id
        ))
        .into());
    }
    let report = corpus_report_with(
        key.iter().map(|k| &k.clustering).zip(&aligned),
        a.lea_singletons.into(),
    )?;
    print!("{report}");
    if let Some(path) = &a.csv {
        write_text(path, &report.to_csv())?;
    }
    Ok(())
}

fn errors(a: ErrorsArgs) -> Result<()> {
    input("corpus", &a.corpus)?;
    input("model", &a.model)?;
    optional_output("csv", &a.csv)?;
    let (params, docs) = load_model_and_corpus(&a.model, &a.corpus)?;
    let breakdown = evaluate_errors(&docs, &params)?;
    print!("{breakdown}");
    if let Some(path) = &a.csv {
        write_text(path, &breakdown.to_csv())?;
    }
    Ok(())
}

fn gradcheck(a: GradcheckArgs) -> Result<()> {
    input("corpus", &a.corpus)?;
    if let Some(model) = &a.model {
        input("model", model)?;
    }
    if !(a.step > 0.0) || !(a.tol > 0.0) {
        return Err(CliError::Invalid(
            "--step and --tol must be positive".into(),
        ));
    }
    let objective = Objective {
        kind: a.loss,
        costs: CostConfig::default(),
        beta: a.beta,
        temperature: a.temp,
        lambda: a.lambda,
    };
    objective.validate()?;
    let docs = load_corpus(&a.corpus)?;
    let first = docs.first().ok_or_else(|| {
        CliError::Invalid(format!(
            "--corpus {}: corpus has no documents",
            a.corpus.display()
        ))
    })?;
    let params = match &a.model {
        Some(path) => load_model(path)?,
        None => {
            if a.hidden_a == 0 || a.hidden_p == 0 {
                return Err(CliError::Invalid(
                    "--hidden-a and --hidden-p must be at least 1".into(),
                ));
            }
            let dims = ModelDims {
                d_a: first.d_a(),
                d_p: first.d_p(),
                h_a: a.hidden_a,
                h_p: a.hidden_p,
            };
            ModelParams::random(dims, a.init_scale, &mut ChaCha8Rng::seed_from_u64(a.seed))
        }
    };
    check_dims(&params, &docs, "corpus")?;

    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for (k, doc) in docs.iter().take(a.max_docs).enumerate() {
        let r = grad_check(
            doc,
            &params,
            &objective,
            a.step,
            a.seed.wrapping_add(k as u64),
        )?;
        worst = worst.max(r.max_relative_error);
        checked += 1;
    }
    let verdict = if worst < a.tol { "PASS" } else { "FAIL" };
    println!(
        "{} on {checked} documents: max relative error {worst:.3e} (tolerance {:e}) {verdict}",
        a.loss, a.tol
    );
    if worst < a.tol {
        Ok(())
    } else {
        Err(CliError::CheckFailed(format!(
            "gradient check failed: {worst:.3e} >= {:e}",
            a.tol
        )))
    }
}
