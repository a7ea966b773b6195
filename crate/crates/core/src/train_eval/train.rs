use std::io::Write;
use std::path::Path;

use celetrip_tensor::{checkpoint, AdamConfig, AdamState, Tape};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::EvalReport;
use crate::dataset::DaySample;
use crate::error::{Error, Result};
use crate::model::{trip_forward, trip_loss, Model, ModelConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lr: f64,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub seed: u64,
    /// Multiplier on the positive-class loss term.
    pub pos_weight: f64,
    pub threshold: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            max_epochs: 200,
            patience: 10,
            seed: 0,
            pos_weight: 1.0,
            threshold: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_f1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub history: Vec<EpochLog>,
    pub best_epoch: usize,
    pub optimizer: AdamState,
}

fn labels(sample: &DaySample) -> Result<&[f64]> {
    sample
        .labels
        .as_deref()
        .ok_or_else(|| Error::Training(format!("{} {} has unlabeled candidates", sample.celebrity, sample.date)))
}

fn describe(sample: &DaySample) -> String {
    format!("{} {} ({})", sample.celebrity, sample.date, sample.locations.join(", "))
}

/// Visit probability per candidate location.
pub fn predict(model: &Model, sample: &DaySample) -> Result<Vec<f64>> {
    let tape = Tape::new();
    let y = trip_forward(&tape, model, &sample.input)?;
    let v = y.value();
    Ok(v.iter().copied().collect())
}

/// Mean loss and the confusion report over labeled samples.
fn score(model: &Model, samples: &[DaySample], cfg: &TrainConfig) -> Result<(f64, EvalReport)> {
    let mut predicted = Vec::new();
    let mut actual = Vec::new();
    let mut loss = 0.0;
    for s in samples {
        let labels = labels(s)?;
        let tape = Tape::new();
        let y = trip_forward(&tape, model, &s.input)?;
        loss += trip_loss(y, labels, cfg.pos_weight)?.scalar();
        predicted.extend(y.value().iter().map(|&p| p >= cfg.threshold));
        actual.extend(labels.iter().map(|&l| l > 0.5));
    }
    let mean = if samples.is_empty() {
        0.0
    } else {
        loss / samples.len() as f64
    };
    Ok((mean, EvalReport::from_predictions(&predicted, &actual)))
}

pub fn evaluate(model: &Model, samples: &[DaySample], threshold: f64) -> Result<EvalReport> {
    let cfg = TrainConfig {
        threshold,
        ..Default::default()
    };
    Ok(score(model, samples, &cfg)?.1)
}

/// Adam on one day per step with early stopping on validation F1 (ties
/// broken by lower validation loss). The model ends holding the best
/// epoch's parameters. Without validation samples the training set is
/// monitored instead.
pub fn train(
    model: &mut Model,
    train: &[DaySample],
    val: &[DaySample],
    cfg: &TrainConfig,
    mut log: Option<&mut dyn Write>,
) -> Result<TrainReport> {
    if train.is_empty() {
        return Err(Error::Training("empty training set".into()));
    }
    if cfg.max_epochs == 0 {
        return Err(Error::Config {
            field: "max_epochs",
            msg: "must be positive".into(),
        });
    }
    let monitor = if val.is_empty() {
        log::warn!("no validation samples; early stopping monitors the training set");
        train
    } else {
        val
    };
    let adam_cfg = AdamConfig {
        lr: cfg.lr,
        ..AdamConfig::default()
    };
    let mut adam = AdamState::new(&model.params, adam_cfg);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = Vec::new();
    let mut best: Option<(f64, f64, usize, celetrip_tensor::ParamStore, AdamState)> = None;

    if let Some(w) = log.as_deref_mut() {
        writeln!(w, "epoch,train_loss,val_loss,val_f1").map_err(|e| Error::Training(e.to_string()))?;
    }
    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for &i in &order {
            let sample = &train[i];
            let labels = labels(sample)?;
            let tape = Tape::new();
            let grads = trip_forward(&tape, model, &sample.input)
                .and_then(|y| trip_loss(y, labels, cfg.pos_weight))
                .and_then(|loss| {
                    let value = loss.scalar();
                    if !value.is_finite() {
                        return Err(Error::Training(format!("non-finite loss {value}")));
                    }
                    total += value;
                    Ok(tape.backward(loss)?)
                })
                .map_err(|e| Error::Training(format!("epoch {epoch}, instance {}: {e}", describe(sample))))?;
            if !grads.all_finite() {
                return Err(Error::Training(format!(
                    "epoch {epoch}, instance {}: non-finite gradient",
                    describe(sample)
                )));
            }
            adam.step(&mut model.params, &grads);
        }
        let (val_loss, report) = score(model, monitor, cfg)?;
        let entry = EpochLog {
            epoch,
            train_loss: total / train.len() as f64,
            val_loss,
            val_f1: report.f1,
        };
        log::info!(
            "epoch {epoch}: train loss {:.5}, val loss {:.5}, val F1 {:.2}",
            entry.train_loss,
            val_loss,
            report.f1
        );
        if let Some(w) = log.as_deref_mut() {
            writeln!(w, "{},{},{},{}", epoch, entry.train_loss, val_loss, report.f1)
                .map_err(|e| Error::Training(e.to_string()))?;
        }
        history.push(entry);
        let improved = match &best {
            None => true,
            Some((f1, loss, ..)) => report.f1 > *f1 || (report.f1 == *f1 && val_loss < *loss),
        };
        if improved {
            best = Some((report.f1, val_loss, epoch, model.params.clone(), adam.clone()));
        }
        let best_epoch = best.as_ref().map_or(epoch, |b| b.2);
        if epoch - best_epoch >= cfg.patience {
            break;
        }
    }
    let (_, _, best_epoch, params, optimizer) = best.expect("at least one epoch ran");
    model.params = params;
    Ok(TrainReport {
        history,
        best_epoch,
        optimizer,
    })
}

#[derive(Serialize, Deserialize)]
struct Meta {
    model: ModelConfig,
}

/// Writes parameters, the model configuration and optionally the optimizer
/// state to a checkpoint file.
pub fn save_model(path: impl AsRef<Path>, model: &Model, optimizer: Option<&AdamState>) -> Result<()> {
    let path = path.as_ref();
    let meta = serde_json::to_string(&Meta {
        model: model.config.clone(),
    })
    .expect("serializable");
    let mut buf = Vec::new();
    checkpoint::write(&mut buf, &meta, &model.params, optimizer)?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Model> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let ck = checkpoint::read(std::io::BufReader::new(file))?;
    let meta: Meta =
        serde_json::from_str(&ck.meta).map_err(|e| Error::parse(path, 0, format!("checkpoint metadata: {e}")))?;
    Model::from_params(meta.model, ck.params)
}
