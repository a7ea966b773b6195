//! Splitting, training, evaluation, frequency baselines and the synthetic
//! planted-trip corpus.

mod baselines;
mod metrics;
mod split;
pub mod synth;
mod train;

pub use baselines::{
    argmax_by_name, baseline_locfre, baseline_locjaccard, baseline_predictions, jaccard, BaselineMethod,
};
pub use metrics::EvalReport;
pub use split::{default_split_date, split_dataset, Split};
pub use train::{evaluate, load_model, predict, save_model, train, EpochLog, TrainConfig, TrainReport};
