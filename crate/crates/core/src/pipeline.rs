//! End-to-end helpers chaining extraction, features, training and
//! evaluation.

use chrono::NaiveDate;

use crate::corpus::{build_trip_instances, Corpus, GroundTruth, MissedTrip, TripInstance};
use crate::dataset::{build_samples, DaySample, DroppedInstance, FeatureContext};
use crate::error::Result;
use crate::features::{train_cbow, CbowConfig, TfidfModel, WordVectors, DEFAULT_MAX_FEATURES};
use crate::geo::{ContainmentScope, CorpusLocations, GazetteerIndex};
use crate::graphs::DEFAULT_WINDOW;
use crate::kb::KnowledgeBase;
use crate::model::{Model, ModelConfig};
use crate::train_eval::{
    baseline_predictions, evaluate, split_dataset, train, BaselineMethod, EvalReport, Split, TrainConfig, TrainReport,
};

/// Extracted locations and labeled instances for a corpus.
pub struct Extraction {
    pub locations: CorpusLocations,
    pub instances: Vec<TripInstance>,
    pub missed: Vec<MissedTrip>,
}

pub fn extract(corpus: &Corpus, gazetteer: &GazetteerIndex, ground_truth: &[GroundTruth]) -> Extraction {
    let locations = CorpusLocations::extract(corpus, gazetteer, ContainmentScope::Article);
    let (instances, missed) = build_trip_instances(corpus, &locations, ground_truth);
    Extraction {
        locations,
        instances,
        missed,
    }
}

/// Stemmed sentences of every article, for embedding training.
pub fn corpus_sentences(corpus: &Corpus) -> Vec<Vec<String>> {
    corpus
        .articles()
        .iter()
        .flat_map(|a| a.sentences.iter().filter(|s| !s.is_empty()).cloned())
        .collect()
}

/// TF-IDF fitted on the articles published before `cutoff`.
pub fn fit_tfidf(corpus: &Corpus, cutoff: NaiveDate, max_features: usize) -> TfidfModel {
    TfidfModel::fit(
        corpus
            .articles()
            .iter()
            .filter(|a| a.publish_date.is_some_and(|d| d < cutoff)),
        max_features,
    )
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub cbow: CbowConfig,
    pub max_features: usize,
    pub window: usize,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub val_frac: f64,
    pub split_seed: u64,
    pub model_seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            cbow: CbowConfig::default(),
            max_features: DEFAULT_MAX_FEATURES,
            window: DEFAULT_WINDOW,
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            val_frac: 0.1,
            split_seed: 0,
            model_seed: 0,
        }
    }
}

/// Inputs shared by every model variant trained on one split.
pub struct Prepared {
    pub split: Split,
    pub word_vectors: WordVectors,
    pub tfidf: TfidfModel,
    pub train: Vec<DaySample>,
    pub val: Vec<DaySample>,
    pub test: Vec<DaySample>,
    pub dropped: Vec<DroppedInstance>,
}

impl Prepared {
    /// Model configuration with the input widths of these features.
    pub fn model_config(&self, base: &ModelConfig) -> ModelConfig {
        ModelConfig {
            word_dim: self.word_vectors.dim(),
            article_dim: self.tfidf.dim(),
            ..base.clone()
        }
    }
}

pub fn prepare(
    corpus: &Corpus,
    extraction: &Extraction,
    kb: Option<&KnowledgeBase>,
    split_date: NaiveDate,
    cfg: &ExperimentConfig,
) -> Result<Prepared> {
    let split = split_dataset(&extraction.instances, split_date, cfg.val_frac, cfg.split_seed)?;
    let word_vectors = train_cbow(&corpus_sentences(corpus), &cfg.cbow)?.vectors;
    let tfidf = fit_tfidf(corpus, split_date, cfg.max_features);
    let ctx = FeatureContext::new(
        corpus,
        &extraction.locations,
        &word_vectors,
        &tfidf,
        kb,
        cfg.window,
        cfg.model.q,
    );
    let mut dropped = Vec::new();
    let mut build = |instances: &[TripInstance]| -> Result<Vec<DaySample>> {
        let (s, d) = build_samples(instances, &ctx)?;
        dropped.extend(d);
        Ok(s)
    };
    let train = build(&split.train)?;
    let val = build(&split.val)?;
    let test = build(&split.test)?;
    Ok(Prepared {
        split,
        word_vectors,
        tfidf,
        train,
        val,
        test,
        dropped,
    })
}

pub struct Outcome {
    pub model: Model,
    pub report: TrainReport,
    pub train: EvalReport,
    pub test: EvalReport,
}

/// Trains a fresh model on prepared samples and scores it on the training
/// and test days.
pub fn fit(prepared: &Prepared, model_cfg: &ModelConfig, cfg: &ExperimentConfig) -> Result<Outcome> {
    let mut model = Model::new(prepared.model_config(model_cfg), cfg.model_seed)?;
    let report = train(&mut model, &prepared.train, &prepared.val, &cfg.train, None)?;
    let train_eval = evaluate(&model, &prepared.train, cfg.train.threshold)?;
    let test_eval = evaluate(&model, &prepared.test, cfg.train.threshold)?;
    Ok(Outcome {
        model,
        report,
        train: train_eval,
        test: test_eval,
    })
}

/// Baseline scores over a list of instances.
pub fn baseline_report(
    method: BaselineMethod,
    instances: &[TripInstance],
    corpus: &Corpus,
    locations: &CorpusLocations,
) -> EvalReport {
    let predicted = baseline_predictions(method, instances, corpus, locations);
    let actual: Vec<bool> = instances
        .iter()
        .map(|i| i.label.is_some_and(|l| l.as_f64() > 0.5))
        .collect();
    EvalReport::from_predictions(&predicted, &actual)
}
