use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use celetrip::corpus::{
    build_trip_instances, day_candidates, load_corpus, load_ground_truth, load_instances, write_instances, Corpus,
    TripInstance,
};
use celetrip::dataset::{build_samples, DaySample, FeatureContext};
use celetrip::dates::{annotate_corpus_dates, extract_dates};
use celetrip::features::{load_word_vectors, train_cbow, TfidfModel, WordVectors};
use celetrip::geo::{build_gazetteer_index, CorpusLocations};
use celetrip::kb::{KnowledgeBase, DEFAULT_KB_DIM};
use celetrip::model::Model;
use celetrip::pipeline::{corpus_sentences, fit_tfidf};
use celetrip::train_eval::{baseline_predictions, load_model, predict, save_model, split_dataset, train, EvalReport};
use serde::Serialize;

use crate::config::RunConfig;
use crate::{Command, Common};

const RUN_CONFIG: &str = "run.toml";
const CHECKPOINT: &str = "model.ckpt";
const TFIDF: &str = "tfidf.json";
const TRAIN_LOG: &str = "train_log.csv";
const WORD_VECTORS: &str = "word_vectors.txt";

pub fn run(common: &Common, command: &Command) -> Result<()> {
    let overrides = common.overrides()?;
    let env: Vec<(String, String)> = std::env::vars().collect();
    let mut cfg = RunConfig::resolve(RunConfig::default(), common.config.as_deref(), env.clone(), &overrides)?;
    if matches!(command, Command::Evaluate | Command::Predict { .. }) {
        // A trained model's resolved settings become the base layer.
        let dir = cfg.path("model_dir")?.to_path_buf();
        let base: RunConfig = toml::from_str(
            &std::fs::read_to_string(dir.join(RUN_CONFIG))
                .with_context(|| format!("reading {}", dir.join(RUN_CONFIG).display()))?,
        )
        .with_context(|| format!("parsing {}", dir.join(RUN_CONFIG).display()))?;
        cfg = RunConfig::resolve(base, common.config.as_deref(), env, &overrides)?;
    }
    let out = common.out.as_deref();
    match command {
        Command::ExtractDates => extract_dates_cmd(&cfg, out),
        Command::ExtractLocations => extract_locations_cmd(&cfg, out),
        Command::BuildDataset => build_dataset_cmd(&cfg, out),
        Command::TrainEmbeddings => train_embeddings_cmd(&cfg, out),
        Command::Train => train_cmd(&cfg, out),
        Command::Evaluate => evaluate_cmd(&cfg, out),
        Command::Predict { celebrity, date } => predict_cmd(&cfg, out, celebrity, *date),
        Command::Baseline { method, all } => baseline_cmd(&cfg, out, *method, *all),
    }
}

fn output(out: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

fn write_json(out: Option<&Path>, value: &impl Serialize) -> Result<()> {
    let mut w = output(out)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn write_jsonl<T: Serialize>(out: Option<&Path>, rows: impl IntoIterator<Item = T>) -> Result<()> {
    let mut w = output(out)?;
    for row in rows {
        serde_json::to_writer(&mut w, &row)?;
        writeln!(w)?;
    }
    w.flush()?;
    Ok(())
}

fn corpus(cfg: &RunConfig) -> Result<Corpus> {
    let mut corpus = load_corpus(cfg.path("corpus")?)?;
    annotate_corpus_dates(&mut corpus);
    log::info!("loaded {} articles", corpus.len());
    Ok(corpus)
}

fn locations(cfg: &RunConfig, corpus: &Corpus) -> Result<CorpusLocations> {
    let gazetteer = build_gazetteer_index(cfg.path("gazetteer")?)?;
    Ok(CorpusLocations::extract(corpus, &gazetteer, cfg.containment))
}

/// Instances from `instances` when given, else built from the ground truth.
fn instances(cfg: &RunConfig, corpus: &Corpus, locations: &CorpusLocations) -> Result<Vec<TripInstance>> {
    if let Some(path) = cfg.optional_path("instances")? {
        let instances = load_instances(path)?;
        log::info!("loaded {} instances", instances.len());
        return Ok(instances);
    }
    let gt = load_ground_truth(cfg.path("ground_truth").context("pass --instances or --ground-truth")?)?;
    let (instances, missed) = build_trip_instances(corpus, locations, &gt);
    log::info!(
        "built {} instances; {} ground-truth trip(s) missed",
        instances.len(),
        missed.len()
    );
    Ok(instances)
}

fn knowledge_base(cfg: &RunConfig) -> Result<Option<KnowledgeBase>> {
    let Some(triples) = cfg.optional_path("kb_triples")? else {
        return Ok(None);
    };
    let kb = KnowledgeBase::load(
        triples,
        cfg.path("kb_entity_vectors")?,
        cfg.path("kb_relation_vectors")?,
        cfg.optional_path("kb_labels")?,
    )?;
    Ok(Some(kb))
}

fn is_positive(i: &TripInstance) -> bool {
    i.label.is_some_and(|l| l.as_f64() > 0.5)
}

#[derive(Serialize)]
struct ReportJson {
    #[serde(flatten)]
    report: EvalReport,
    instances: usize,
    positives: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    dropped: Option<usize>,
}

fn extract_dates_cmd(cfg: &RunConfig, out: Option<&Path>) -> Result<()> {
    #[derive(Serialize)]
    struct Row<'a> {
        id: &'a str,
        dates: Vec<celetrip::dates::DateMatch>,
    }
    let corpus = load_corpus(cfg.path("corpus")?)?;
    write_jsonl(
        out,
        corpus.articles().iter().map(|a| Row {
            id: &a.id,
            dates: extract_dates(&a.text, a.publish_date),
        }),
    )
}

fn extract_locations_cmd(cfg: &RunConfig, out: Option<&Path>) -> Result<()> {
    #[derive(Serialize)]
    struct Row<'a> {
        id: &'a str,
        mentions: &'a [celetrip::geo::LocationMention],
        candidates: &'a [String],
    }
    let corpus = load_corpus(cfg.path("corpus")?)?;
    let locations = locations(cfg, &corpus)?;
    write_jsonl(
        out,
        corpus.articles().iter().enumerate().map(|(i, a)| Row {
            id: &a.id,
            mentions: locations.mentions(i),
            candidates: locations.candidates(i),
        }),
    )
}

fn build_dataset_cmd(cfg: &RunConfig, out: Option<&Path>) -> Result<()> {
    let corpus = corpus(cfg)?;
    let locations = locations(cfg, &corpus)?;
    let gt = load_ground_truth(cfg.path("ground_truth")?)?;
    let (instances, missed) = build_trip_instances(&corpus, &locations, &gt);
    for m in &missed {
        log::warn!("missed trip: {} {} {} ({})", m.celebrity, m.date, m.location, m.reason);
    }
    let positives = instances.iter().filter(|i| is_positive(i)).count();
    log::info!(
        "{} instances ({positives} positive), {} missed trip(s)",
        instances.len(),
        missed.len()
    );
    let mut w = output(out)?;
    write_instances(&mut w, &instances)?;
    w.flush()?;
    Ok(())
}

fn embeddings(cfg: &RunConfig, corpus: &Corpus) -> Result<WordVectors> {
    let cbow = train_cbow(&corpus_sentences(corpus), &cfg.cbow())?;
    if let Some(loss) = cbow.epoch_losses.last() {
        log::info!(
            "trained {} word vectors, final epoch loss {loss:.4}",
            cbow.vectors.len()
        );
    }
    Ok(cbow.vectors)
}

fn train_embeddings_cmd(cfg: &RunConfig, out: Option<&Path>) -> Result<()> {
    let corpus = corpus(cfg)?;
    let vectors = embeddings(cfg, &corpus)?;
    let mut w = output(out)?;
    vectors.write(&mut w)?;
    w.flush()?;
    Ok(())
}

/// Paths recorded in run.toml are absolute so the model directory can be
/// used from anywhere.
fn absolute(p: &Option<PathBuf>) -> Result<Option<PathBuf>> {
    p.as_deref()
        .map(|p| std::fs::canonicalize(p).with_context(|| format!("resolving {}", p.display())))
        .transpose()
}

fn train_cmd(cfg: &RunConfig, out: Option<&Path>) -> Result<()> {
    let Some(dir) = out else {
        bail!("train needs --out <model directory>");
    };
    let corpus = corpus(cfg)?;
    let locations = locations(cfg, &corpus)?;
    let instances = instances(cfg, &corpus, &locations)?;
    let kb = knowledge_base(cfg)?;
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;

    let mut resolved = cfg.clone();
    let word_vectors = match cfg.optional_path("word_vectors")? {
        Some(p) => load_word_vectors(p)?,
        None => {
            let vectors = embeddings(cfg, &corpus)?;
            let path = dir.join(WORD_VECTORS);
            vectors.save(&path)?;
            resolved.word_vectors = Some(path);
            vectors
        }
    };
    let split = split_dataset(&instances, cfg.split_date, cfg.val_frac, cfg.seed)?;
    log::info!(
        "split: {} train, {} validation, {} test instances",
        split.train.len(),
        split.val.len(),
        split.test.len()
    );
    let tfidf = fit_tfidf(&corpus, cfg.split_date, cfg.max_features);
    let model_cfg = cfg.model(
        word_vectors.dim(),
        tfidf.dim(),
        kb.as_ref().map_or(DEFAULT_KB_DIM, |k| k.dim()),
    );
    let ctx = FeatureContext::new(
        &corpus,
        &locations,
        &word_vectors,
        &tfidf,
        kb.as_ref(),
        cfg.window,
        cfg.q,
    );
    let (train_samples, dropped_train) = build_samples(&split.train, &ctx)?;
    let (val_samples, dropped_val) = build_samples(&split.val, &ctx)?;
    for d in dropped_train.iter().chain(&dropped_val) {
        log::warn!("dropped instance {}: {}", d.index, d.reason);
    }

    let mut model = Model::new(model_cfg, cfg.seed)?;
    let mut log_file = BufWriter::new(File::create(dir.join(TRAIN_LOG))?);
    let report = train(
        &mut model,
        &train_samples,
        &val_samples,
        &cfg.train(),
        Some(&mut log_file),
    )?;
    log_file.flush()?;
    save_model(dir.join(CHECKPOINT), &model, Some(&report.optimizer))?;
    tfidf.save(dir.join(TFIDF))?;

    for field in [
        &mut resolved.corpus,
        &mut resolved.gazetteer,
        &mut resolved.ground_truth,
        &mut resolved.instances,
        &mut resolved.word_vectors,
        &mut resolved.kb_triples,
        &mut resolved.kb_entity_vectors,
        &mut resolved.kb_relation_vectors,
        &mut resolved.kb_labels,
    ] {
        *field = absolute(field)?;
    }
    resolved.model_dir = absolute(&Some(dir.to_path_buf()))?;
    std::fs::write(dir.join(RUN_CONFIG), toml::to_string(&resolved)?)?;

    #[derive(Serialize)]
    struct Summary {
        best_epoch: usize,
        epochs: usize,
        train_instances: usize,
        val_instances: usize,
        test_instances: usize,
        dropped: usize,
    }
    write_json(
        None,
        &Summary {
            best_epoch: report.best_epoch,
            epochs: report.history.len(),
            train_instances: split.train.len(),
            val_instances: split.val.len(),
            test_instances: split.test.len(),
            dropped: dropped_train.len() + dropped_val.len(),
        },
    )
}

/// Everything needed to score samples with a trained model.
struct Trained {
    corpus: Corpus,
    locations: CorpusLocations,
    word_vectors: WordVectors,
    tfidf: TfidfModel,
    kb: Option<KnowledgeBase>,
    model: Model,
}

impl Trained {
    fn load(cfg: &RunConfig) -> Result<Self> {
        let dir = cfg.path("model_dir")?;
        let model = load_model(dir.join(CHECKPOINT))?;
        let tfidf = TfidfModel::load(dir.join(TFIDF))?;
        let word_vectors = load_word_vectors(cfg.path("word_vectors")?)?;
        let corpus = corpus(cfg)?;
        let locations = locations(cfg, &corpus)?;
        Ok(Self {
            corpus,
            locations,
            word_vectors,
            tfidf,
            kb: knowledge_base(cfg)?,
            model,
        })
    }

    /// Per-instance visit probabilities; instances that could not be turned
    /// into samples get `None`.
    fn score(&self, cfg: &RunConfig, instances: &[TripInstance]) -> Result<(Vec<Option<f64>>, Vec<String>)> {
        let ctx = FeatureContext::new(
            &self.corpus,
            &self.locations,
            &self.word_vectors,
            &self.tfidf,
            self.kb.as_ref(),
            cfg.window,
            self.model.config.q,
        );
        let (samples, dropped) = build_samples(instances, &ctx)?;
        let mut probs = vec![None; instances.len()];
        for s in &samples {
            self.fill(s, &mut probs)?;
        }
        let reasons = dropped
            .iter()
            .map(|d| format!("{}: {}", instances[d.index].location, d.reason))
            .collect();
        Ok((probs, reasons))
    }

    fn fill(&self, sample: &DaySample, probs: &mut [Option<f64>]) -> Result<()> {
        for (&i, p) in sample.instance_idx.iter().zip(predict(&self.model, sample)?) {
            probs[i] = Some(p);
        }
        Ok(())
    }
}

fn evaluate_cmd(cfg: &RunConfig, out: Option<&Path>) -> Result<()> {
    let trained = Trained::load(cfg)?;
    let all = instances(cfg, &trained.corpus, &trained.locations)?;
    let test: Vec<TripInstance> = all.into_iter().filter(|i| i.date >= cfg.split_date).collect();
    if test.is_empty() {
        bail!("empty test set: no instances dated on or after {}", cfg.split_date);
    }
    let (probs, dropped) = trained.score(cfg, &test)?;
    for d in &dropped {
        log::warn!("dropped instance counted as negative: {d}");
    }
    let predicted: Vec<bool> = probs.iter().map(|p| p.is_some_and(|p| p >= cfg.threshold)).collect();
    let actual: Vec<bool> = test.iter().map(is_positive).collect();
    write_json(
        out,
        &ReportJson {
            report: EvalReport::from_predictions(&predicted, &actual),
            instances: test.len(),
            positives: actual.iter().filter(|&&a| a).count(),
            dropped: Some(dropped.len()),
        },
    )
}

fn predict_cmd(cfg: &RunConfig, out: Option<&Path>, celebrity: &str, date: chrono::NaiveDate) -> Result<()> {
    #[derive(Serialize)]
    struct Candidate<'a> {
        location: &'a str,
        probability: Option<f64>,
        positive: bool,
    }
    #[derive(Serialize)]
    struct Prediction<'a> {
        celebrity: &'a str,
        date: String,
        candidates: Vec<Candidate<'a>>,
        positives: Vec<&'a str>,
        dropped: Vec<String>,
    }
    let trained = Trained::load(cfg)?;
    let day = day_candidates(&trained.corpus, &trained.locations, celebrity, date);
    if day.candidates.is_empty() {
        log::warn!("no candidate locations for {celebrity} on {date}");
    }
    let instances: Vec<TripInstance> = day
        .candidates
        .iter()
        .map(|(loc, articles)| TripInstance {
            celebrity: celebrity.to_string(),
            location: loc.clone(),
            date,
            article_ids: articles.iter().map(|&i| trained.corpus.get(i).id.clone()).collect(),
            label: None,
        })
        .collect();
    let (probs, dropped) = trained.score(cfg, &instances)?;
    let candidates: Vec<Candidate> = instances
        .iter()
        .zip(&probs)
        .map(|(inst, p)| Candidate {
            location: &inst.location,
            probability: *p,
            positive: p.is_some_and(|p| p >= cfg.threshold),
        })
        .collect();
    let positives = candidates.iter().filter(|c| c.positive).map(|c| c.location).collect();
    write_json(
        out,
        &Prediction {
            celebrity,
            date: date.to_string(),
            candidates,
            positives,
            dropped,
        },
    )
}

fn baseline_cmd(
    cfg: &RunConfig,
    out: Option<&Path>,
    method: celetrip::train_eval::BaselineMethod,
    all: bool,
) -> Result<()> {
    let corpus = corpus(cfg)?;
    let locations = locations(cfg, &corpus)?;
    let mut scored = instances(cfg, &corpus, &locations)?;
    if !all {
        scored.retain(|i| i.date >= cfg.split_date);
    }
    if scored.is_empty() {
        bail!("empty test set: no instances to score");
    }
    let predicted = baseline_predictions(method, &scored, &corpus, &locations);
    let actual: Vec<bool> = scored.iter().map(is_positive).collect();
    write_json(
        out,
        &ReportJson {
            report: EvalReport::from_predictions(&predicted, &actual),
            instances: scored.len(),
            positives: actual.iter().filter(|&&a| a).count(),
            dropped: None,
        },
    )
}
