mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use celetrip::train_eval::BaselineMethod;
use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};

/// Options shared by every subcommand. Any config key can also be set with
/// `--set key=value` or a `CELETRIP_<KEY>` environment variable.
#[derive(Debug, Args)]
pub struct Common {
    /// TOML config file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output file or directory; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Override a config key.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,

    #[arg(long, global = true)]
    corpus: Option<PathBuf>,
    /// Gazetteer TSV: id, canonical, aliases, admin chain, feature class.
    #[arg(long, global = true)]
    gazetteer: Option<PathBuf>,
    /// CSV with header `celebrity,date,location`.
    #[arg(long, global = true)]
    ground_truth: Option<PathBuf>,
    /// Trip instances JSONL written by `build-dataset`.
    #[arg(long, global = true)]
    instances: Option<PathBuf>,
    /// Word vectors in word2vec text format.
    #[arg(long, global = true)]
    word_vectors: Option<PathBuf>,
    #[arg(long, global = true)]
    kb_triples: Option<PathBuf>,
    #[arg(long, global = true)]
    kb_entity_vectors: Option<PathBuf>,
    #[arg(long, global = true)]
    kb_relation_vectors: Option<PathBuf>,
    #[arg(long, global = true)]
    kb_labels: Option<PathBuf>,
    /// Directory written by `train`.
    #[arg(long, global = true)]
    model_dir: Option<PathBuf>,
}

impl Common {
    fn overrides(&self) -> anyhow::Result<Vec<(String, String)>> {
        let mut out = Vec::new();
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| anyhow::anyhow!("--set expects KEY=VALUE, got {kv:?}"))?;
            out.push((k.trim().to_string(), v.trim().to_string()));
        }
        let paths = [
            ("corpus", &self.corpus),
            ("gazetteer", &self.gazetteer),
            ("ground_truth", &self.ground_truth),
            ("instances", &self.instances),
            ("word_vectors", &self.word_vectors),
            ("kb_triples", &self.kb_triples),
            ("kb_entity_vectors", &self.kb_entity_vectors),
            ("kb_relation_vectors", &self.kb_relation_vectors),
            ("kb_labels", &self.kb_labels),
            ("model_dir", &self.model_dir),
        ];
        for (k, p) in paths {
            if let Some(p) = p {
                out.push((k.to_string(), p.display().to_string()));
            }
        }
        if let Some(seed) = self.seed {
            out.push(("seed".into(), seed.to_string()));
        }
        Ok(out)
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Resolved dates per article, as JSONL.
    ExtractDates,
    /// Location mentions and candidates per article, as JSONL.
    ExtractLocations,
    /// Labeled trip instances from a corpus and ground truth, as JSONL.
    BuildDataset,
    /// CBOW word vectors over the corpus sentences.
    TrainEmbeddings,
    /// Train a model; `--out` names the model directory.
    Train,
    /// Score a trained model on the instances dated on or after the split date.
    Evaluate,
    /// Visit probabilities for one celebrity and date.
    Predict {
        #[arg(long)]
        celebrity: String,
        #[arg(long)]
        date: NaiveDate,
    },
    /// Frequency baseline scores on the test side of the split.
    Baseline {
        #[arg(long)]
        method: BaselineMethod,
        /// Score every instance instead of the test side only.
        #[arg(long)]
        all: bool,
    },
}

/// Detect celebrity trips from news articles.
#[derive(Debug, Parser)]
#[command(name = "celetrip", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("CELETRIP_LOG", "info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    match commands::run(&cli.common, &cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = format!("{e:#}").replace(['\n', '\r'], " ");
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
